#pragma once

#include <cstdint>
#include <vector>

#include "gramdos/density.hpp"
#include "gramdos/dyson.hpp"
#include "gramdos/profile.hpp"
#include "gramdos/singularity.hpp"

namespace gramdos {

enum class EntryDistribution { RealGaussian, ComplexGaussian, RademacherScaled };

struct SampleConfig {
  VarianceProfile profile;
  int trials = 1;
  std::uint64_t seed = 0;
  EntryDistribution dist = EntryDistribution::ComplexGaussian;
};

/// p x n matrix with independent centered entries, E|x_kq|^2 = s_kq. The
/// random stream is keyed by (seed, trial, row), so samples are reproducible
/// independently of execution order.
CMat sample_matrix(const SampleConfig& config, int trialIndex);

struct EmpiricalSpectrum {
  Vec eigenvalues;  // ascending eigenvalues of X X^*
  Index p = 0;
  Index n = 0;
  int trial = 0;
};

EmpiricalSpectrum gram_eigenvalues(const CMat& x, int trial = 0);

/// Eigenvalues of H^2 for the linearization H = [[0, X],[X^*, 0]]; its
/// nonzero spectrum matches X X^* (twice, through X^* X).
Vec linearization_squared_eigenvalues(const CMat& x);

/// Diagonal of (X X^* - zeta)^{-1}.
CVec resolvent_diag(const CMat& x, SpectralParameter zeta);

/// Full resolvent via one Hermitian eigendecomposition, reusable across zeta.
class ResolventFactory {
 public:
  explicit ResolventFactory(const CMat& x);
  CMat resolvent(SpectralParameter zeta) const;
  const Vec& eigenvalues() const { return eigenvalues_; }

 private:
  Vec eigenvalues_;
  CMat vectors_;
};

struct LocalLawOptions {
  double epsilon = 0.1;    // p^epsilon slack in the bounds
  double prefactor = 10.0; // constant replacing the theorem's C_{eps,D}
  double gamma = 0.4;      // admissibility: Im zeta >= p^{-1+gamma}
  double delta = 0.05;     // admissibility: |zeta| >= delta
};

struct LocalLawPoint {
  SpectralParameter zeta;
  double kappaValue = 0.0;
  double imAvg = 0.0;  // <Im m> over the row space
  double boundEntry = 0.0;
  double boundAvg = 0.0;
  double boundOffdiag = 0.0;
  // per-trial observed errors
  Vec maxEntrywiseError;  // max_{k,l} |R_kl - m_k delta_kl|
  Vec maxOffdiagError;    // max_{k != l} |R_kl|
  Mat avgError;           // nWeights x trials, |p^{-1} sum_k w_k (R_kk - m_k)|
  double passFractionAvg = 0.0;
  double passFractionOffdiag = 0.0;
  double passFractionEntry = 0.0;
};

struct LocalLawReport {
  std::vector<LocalLawPoint> points;
  int trials = 0;
};

/// Compares resolvent errors against the local-law bounds at each admissible
/// zeta. w vectors must satisfy max_k |w_k| <= 1; kappa uses the supplied gap
/// function.
LocalLawReport local_law_check(const SampleConfig& config,
                               const std::vector<SpectralParameter>& zetas,
                               const GapFunction& gap, const std::vector<CVec>& wVectors,
                               const SolverOptions& solver = {},
                               const LocalLawOptions& opts = {});

struct CdfComparison {
  double ksDistance = 0.0;
  Index samplesUsed = 0;
  Vec overlayEnergies;   // curve grid restricted to [delta, inf)
  Vec overlayModelCdf;   // renormalized self-consistent CDF
  Vec overlayEmpirical;  // empirical CDF at the same energies
};

/// Kolmogorov distance between the pooled empirical spectrum above delta and
/// the integrated self-consistent density, both renormalized on [delta, inf).
/// Throws when no eigenvalue exceeds delta.
CdfComparison empirical_vs_selfconsistent(const SampleConfig& config, const DensityCurve& curve,
                                          double delta);

}  // namespace gramdos
