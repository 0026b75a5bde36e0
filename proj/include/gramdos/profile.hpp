#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gramdos/types.hpp"

namespace gramdos {

/// Discrete variance profile s : [p] x [n] -> [0, inf) together with the
/// atom masses of the two underlying measure spaces. Unit weights reproduce
/// the counting-measure setup used for random Gram matrices; block profiles
/// built on coarse index sets carry the block sizes as weights instead.
struct VarianceProfile {
  Index p = 0;
  Index n = 0;
  Mat s;        // p x n, nonnegative variances
  Vec weight1;  // p positive atom masses, default 1
  Vec weight2;  // n positive atom masses, default 1

  // Block boundaries when this profile was produced by build_block_profile
  // (used only for reporting the piecewise-constant sufficient condition).
  std::vector<Index> rowBlockStarts;
  std::vector<Index> colBlockStarts;

  double mass1() const { return weight1.sum(); }
  double mass2() const { return weight2.sum(); }
  double totalMass() const { return mass1() + mass2(); }

  /// Throws std::invalid_argument if any invariant fails.
  void validate() const;
};

VarianceProfile make_profile(Mat s);
VarianceProfile make_profile(Mat s, Vec weight1, Vec weight2);
VarianceProfile constant_profile(Index p, Index n, double value);

enum class BlockNormalization { Paper, Raw };

/// Piecewise-constant profile description: an r x c grid of block values and
/// the fraction of each axis covered by every block row/column.
struct BlockSpec {
  Mat values;        // r x c, nonnegative
  Vec rowFractions;  // r positive entries summing to 1
  Vec colFractions;  // c positive entries summing to 1
  BlockNormalization normalization = BlockNormalization::Paper;

  void validate() const;
};

/// Expands a BlockSpec onto a p x n index grid. Block boundaries are placed
/// at floor(cumulative fraction * dimension); an index on a boundary belongs
/// to the earlier block. Under Paper normalization the values are divided by
/// p + n so the bounded-variance condition holds with s* = max block value.
VarianceProfile build_block_profile(const BlockSpec& spec, Index p, Index n);

/// (S v)_k = sum_q s_kq w2_q v_q, mapping length-n to length-p vectors.
CVec apply_S(const VarianceProfile& profile, const CVec& v);
/// (S^t u)_q = sum_k s_kq w1_k u_k, mapping length-p to length-n vectors.
CVec apply_St(const VarianceProfile& profile, const CVec& u);
/// Block operator on the combined index space: first p entries of the result
/// are S(w tail), the last n entries are S^t(w head).
CVec apply_boldS(const VarianceProfile& profile, const CVec& w);

/// Upper bound Sigma = 4 max{||S||_{B2->B1}, ||S^t||_{B1->B2}} for the
/// support of the self-consistent density (sup-norm operator norms are the
/// maximal weighted row/column sums).
double sigma_bound(const VarianceProfile& profile);

struct AssumptionReport {
  double massRatio = 0.0;  // pi1(X1) / pi2(X2)
  bool irreducible = false;
  int L = -1;              // smallest L with min (S S^t)^L 1 > 0, -1 if none up to Lmax
  double kappa1 = 0.0;     // min/avg of (S S^t)^L 1
  double kappa2 = 0.0;     // min/avg of (S^t S)^L 1
  double psi1 = 0.0;       // L2 -> sup bound for S
  double psi2 = 0.0;       // L2 -> sup bound for S^t
  bool piecewiseConstant = false;  // sufficient condition for the row/column regularity assumption
};

/// Diagnoses the model assumptions: measure comparability, irreducibility by
/// iterated operator applications (single-atom reachability probes, at most
/// Lmax rounds), L2-to-sup bounds, and the piecewise-constant sufficient
/// condition for block profiles. Irreducibility failure is reported in the
/// flags, not thrown.
AssumptionReport check_assumptions(const VarianceProfile& profile, int Lmax);

// Weighted averages and scalar products. avg1/avg2 average over the row and
// column index space with normalized pi1/pi2; the combined versions use the
// normalized measure pi on the disjoint union (first p entries, then n).
Complex avg1(const VarianceProfile& profile, const CVec& u);
Complex avg2(const VarianceProfile& profile, const CVec& v);
Complex avg_combined(const VarianceProfile& profile, const CVec& w);
double avg_combined(const VarianceProfile& profile, const Vec& w);
/// <u, w> with conjugation in the first slot, normalized combined measure.
Complex inner_combined(const VarianceProfile& profile, const CVec& u, const CVec& w);
double inner_combined(const VarianceProfile& profile, const Vec& u, const Vec& w);
/// L2(pi) norm on the combined space.
double norm2_combined(const VarianceProfile& profile, const CVec& w);

/// Normalized combined weight vector pi (length p+n, sums to 1).
Vec combined_pi(const VarianceProfile& profile);
/// Sign vector e_-: +1 on the first p entries, -1 on the last n.
Vec chiral_sign(const VarianceProfile& profile);

}  // namespace gramdos
