#include "gramdos/profile.hpp"

#include <cmath>
#include <stdexcept>

namespace gramdos {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

void VarianceProfile::validate() const {
  require(p >= 1 && n >= 1, "profile: p and n must be >= 1");
  require(s.rows() == p && s.cols() == n, "profile: s must be p x n");
  require(weight1.size() == p && weight2.size() == n,
          "profile: weight vectors must match dimensions");
  require((weight1.array() > 0.0).all() && (weight2.array() > 0.0).all(),
          "profile: measure weights must be strictly positive");
  require(s.allFinite(), "profile: variances must be finite");
  require((s.array() >= 0.0).all(), "profile: variances must be nonnegative");
}

VarianceProfile make_profile(Mat s) {
  const Index p = s.rows(), n = s.cols();
  return make_profile(std::move(s), Vec::Ones(p), Vec::Ones(n));
}

VarianceProfile make_profile(Mat s, Vec weight1, Vec weight2) {
  VarianceProfile profile;
  profile.p = s.rows();
  profile.n = s.cols();
  profile.s = std::move(s);
  profile.weight1 = std::move(weight1);
  profile.weight2 = std::move(weight2);
  profile.validate();
  return profile;
}

VarianceProfile constant_profile(Index p, Index n, double value) {
  return make_profile(Mat::Constant(p, n, value));
}

void BlockSpec::validate() const {
  require(values.rows() >= 1 && values.cols() >= 1, "block spec: empty value grid");
  require((values.array() >= 0.0).all() && values.allFinite(),
          "block spec: values must be nonnegative and finite");
  require(rowFractions.size() == values.rows() && colFractions.size() == values.cols(),
          "block spec: fraction vectors must match the value grid");
  require((rowFractions.array() > 0.0).all() && (colFractions.array() > 0.0).all(),
          "block spec: fractions must be positive");
  require(std::abs(rowFractions.sum() - 1.0) <= 1e-12, "block spec: row fractions must sum to 1");
  require(std::abs(colFractions.sum() - 1.0) <= 1e-12, "block spec: col fractions must sum to 1");
}

namespace {

// Boundary index of each block: floor of cumulative fraction times the
// dimension, ties to the earlier block. Returns the start index of every
// block; throws if a block receives no indices.
std::vector<Index> block_starts(const Vec& fractions, Index dim, const char* axis) {
  std::vector<Index> starts;
  starts.reserve(static_cast<size_t>(fractions.size()));
  double cum = 0.0;
  Index prevEnd = 0;
  for (Index b = 0; b < fractions.size(); ++b) {
    starts.push_back(prevEnd);
    cum += fractions[b];
    Index end = (b + 1 == fractions.size())
                    ? dim
                    : static_cast<Index>(std::floor(cum * static_cast<double>(dim)));
    if (end <= prevEnd)
      throw std::invalid_argument(std::string("block spec: degenerate block on ") + axis +
                                  " axis (a fraction maps to zero indices)");
    prevEnd = end;
  }
  return starts;
}

}  // namespace

VarianceProfile build_block_profile(const BlockSpec& spec, Index p, Index n) {
  spec.validate();
  require(p >= 1 && n >= 1, "block profile: p and n must be >= 1");

  const auto rowStarts = block_starts(spec.rowFractions, p, "row");
  const auto colStarts = block_starts(spec.colFractions, n, "col");
  const double norm =
      spec.normalization == BlockNormalization::Paper ? 1.0 / static_cast<double>(p + n) : 1.0;

  Mat s(p, n);
  for (size_t bi = 0; bi < rowStarts.size(); ++bi) {
    const Index r0 = rowStarts[bi];
    const Index r1 = (bi + 1 < rowStarts.size()) ? rowStarts[bi + 1] : p;
    for (size_t bj = 0; bj < colStarts.size(); ++bj) {
      const Index c0 = colStarts[bj];
      const Index c1 = (bj + 1 < colStarts.size()) ? colStarts[bj + 1] : n;
      s.block(r0, c0, r1 - r0, c1 - c0).setConstant(spec.values(bi, bj) * norm);
    }
  }

  VarianceProfile profile = make_profile(std::move(s));
  profile.rowBlockStarts = rowStarts;
  profile.colBlockStarts = colStarts;
  return profile;
}

CVec apply_S(const VarianceProfile& profile, const CVec& v) {
  if (v.size() != profile.n) throw std::invalid_argument("apply_S: length mismatch");
  return profile.s * (profile.weight2.array() * v.array()).matrix();
}

CVec apply_St(const VarianceProfile& profile, const CVec& u) {
  if (u.size() != profile.p) throw std::invalid_argument("apply_St: length mismatch");
  return profile.s.transpose() * (profile.weight1.array() * u.array()).matrix();
}

CVec apply_boldS(const VarianceProfile& profile, const CVec& w) {
  if (w.size() != profile.p + profile.n)
    throw std::invalid_argument("apply_boldS: length mismatch");
  CVec out(profile.p + profile.n);
  out.head(profile.p) = apply_S(profile, w.tail(profile.n));
  out.tail(profile.n) = apply_St(profile, w.head(profile.p));
  return out;
}

double sigma_bound(const VarianceProfile& profile) {
  const double rowNorm = (profile.s * profile.weight2).maxCoeff();
  const double colNorm = (profile.s.transpose() * profile.weight1).maxCoeff();
  return 4.0 * std::max(rowNorm, colNorm);
}

AssumptionReport check_assumptions(const VarianceProfile& profile, int Lmax) {
  profile.validate();
  AssumptionReport report;
  report.massRatio = profile.mass1() / profile.mass2();

  // Irreducibility probe. The all-ones vector stays positive even on
  // disconnected profiles, so reachability is tested from a single atom:
  // with S S^t having positive diagonal on nonzero rows, the support of
  // (S S^t)^L e_1 grows monotonically and fills up iff the bipartite graph
  // of s is connected. kappa estimates then use the ones vector at that L.
  const bool hasZeroRow = ((profile.s * profile.weight2).array() <= 0.0).any();
  const bool hasZeroCol = ((profile.s.transpose() * profile.weight1).array() <= 0.0).any();
  if (!hasZeroRow && !hasZeroCol) {
    CVec rowProbe = CVec::Zero(profile.p);
    CVec colProbe = CVec::Zero(profile.n);
    rowProbe[0] = 1.0;
    colProbe[0] = 1.0;
    int rowReached = -1, colReached = -1;
    for (int L = 1; L <= Lmax; ++L) {
      if (rowReached < 0) {
        rowProbe = apply_S(profile, apply_St(profile, rowProbe));
        rowProbe /= rowProbe.cwiseAbs().maxCoeff();  // keep magnitudes sane
        if (rowProbe.real().minCoeff() > 0.0) rowReached = L;
      }
      if (colReached < 0) {
        colProbe = apply_St(profile, apply_S(profile, colProbe));
        colProbe /= colProbe.cwiseAbs().maxCoeff();
        if (colProbe.real().minCoeff() > 0.0) colReached = L;
      }
      if (rowReached > 0 && colReached > 0) break;
    }
    if (rowReached > 0 && colReached > 0) {
      report.irreducible = true;
      report.L = std::max(rowReached, colReached);
      CVec u1 = CVec::Ones(profile.p);
      CVec v1 = CVec::Ones(profile.n);
      for (int L = 0; L < report.L; ++L) {
        u1 = apply_S(profile, apply_St(profile, u1));
        v1 = apply_St(profile, apply_S(profile, v1));
      }
      report.kappa1 = u1.real().minCoeff() / avg1(profile, u1).real();
      report.kappa2 = v1.real().minCoeff() / avg2(profile, v1).real();
    }
  }

  // A4: the L2(normalized) -> sup norms are attained on the rows/columns,
  // Psi1 = max_k sqrt(pi2(X2) * sum_q w2_q s_kq^2) and symmetrically.
  const Vec rowSq = (profile.s.array().square().matrix() * profile.weight2) * profile.mass2();
  const Vec colSq =
      (profile.s.array().square().matrix().transpose() * profile.weight1) * profile.mass1();
  report.psi1 = std::sqrt(rowSq.maxCoeff());
  report.psi2 = std::sqrt(colSq.maxCoeff());

  // Piecewise-constant rows/columns (sufficient for the regularity
  // assumption): detected from block metadata or by direct comparison.
  if (!profile.rowBlockStarts.empty()) {
    report.piecewiseConstant = true;
  } else {
    auto fewDistinctRows = [](const Mat& m) {
      Index distinct = 1;
      for (Index i = 1; i < m.rows(); ++i)
        if (m.row(i) != m.row(i - 1)) ++distinct;
      return distinct <= 16;
    };
    report.piecewiseConstant = fewDistinctRows(profile.s) && fewDistinctRows(profile.s.transpose());
  }
  return report;
}

Complex avg1(const VarianceProfile& profile, const CVec& u) {
  return (profile.weight1.cast<Complex>().array() * u.array()).sum() / profile.mass1();
}

Complex avg2(const VarianceProfile& profile, const CVec& v) {
  return (profile.weight2.cast<Complex>().array() * v.array()).sum() / profile.mass2();
}

Complex avg_combined(const VarianceProfile& profile, const CVec& w) {
  const Complex head = (profile.weight1.cast<Complex>().array() * w.head(profile.p).array()).sum();
  const Complex tail = (profile.weight2.cast<Complex>().array() * w.tail(profile.n).array()).sum();
  return (head + tail) / profile.totalMass();
}

double avg_combined(const VarianceProfile& profile, const Vec& w) {
  const double head = (profile.weight1.array() * w.head(profile.p).array()).sum();
  const double tail = (profile.weight2.array() * w.tail(profile.n).array()).sum();
  return (head + tail) / profile.totalMass();
}

Complex inner_combined(const VarianceProfile& profile, const CVec& u, const CVec& w) {
  return avg_combined(profile, CVec(u.conjugate().array() * w.array()));
}

double inner_combined(const VarianceProfile& profile, const Vec& u, const Vec& w) {
  return avg_combined(profile, Vec(u.array() * w.array()));
}

double norm2_combined(const VarianceProfile& profile, const CVec& w) {
  return std::sqrt(avg_combined(profile, Vec(w.array().abs2())));
}

Vec combined_pi(const VarianceProfile& profile) {
  Vec pi(profile.p + profile.n);
  pi.head(profile.p) = profile.weight1;
  pi.tail(profile.n) = profile.weight2;
  return pi / profile.totalMass();
}

Vec chiral_sign(const VarianceProfile& profile) {
  Vec e(profile.p + profile.n);
  e.head(profile.p).setOnes();
  e.tail(profile.n).setConstant(-1.0);
  return e;
}

}  // namespace gramdos
