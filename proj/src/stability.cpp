#include "gramdos/stability.hpp"

#include <cmath>
#include <stdexcept>

namespace gramdos {

namespace {

CMat stability_operator_hat(const SaturatedSelfEnergy& F, const CVec& m) {
  if (!F.isDense())
    throw std::runtime_error("stability operator: dense materialization required");
  const CVec phase = (m.array().abs2() / m.array().square()).matrix();
  CMat bHat = -F.denseHat().cast<Complex>();
  bHat.diagonal() += phase;
  return bHat;
}

}  // namespace

SaturatedSelfEnergy::SaturatedSelfEnergy(const VarianceProfile& profile, const CVec& m,
                                         Index denseLimit)
    : profile_(&profile) {
  const Index N = profile.p + profile.n;
  if (m.size() != N) throw std::invalid_argument("SaturatedSelfEnergy: solution length mismatch");
  absM_ = m.cwiseAbs();
  sqrtPi_ = combined_pi(profile).cwiseSqrt();

  if (N <= denseLimit) {
    // hat(F) = diag(|m|) [[0, B],[B^t, 0]] diag(|m|), B = diag(sqrt w1) s diag(sqrt w2)
    const Vec sw1 = profile.weight1.cwiseSqrt();
    const Vec sw2 = profile.weight2.cwiseSqrt();
    Mat block = sw1.asDiagonal() * profile.s * sw2.asDiagonal();
    hat_.setZero(N, N);
    hat_.topRightCorner(profile.p, profile.n) = block;
    hat_.bottomLeftCorner(profile.n, profile.p) = block.transpose();
    hat_ = absM_.asDiagonal() * hat_ * absM_.asDiagonal();
    hat_ = 0.5 * (hat_ + hat_.transpose().eval());  // exact symmetry for the eigensolver
  }
}

Vec SaturatedSelfEnergy::apply(const Vec& u) const {
  if (isDense()) {
    const Vec uHat = sqrtPi_.asDiagonal() * u;
    return (hat_ * uHat).cwiseQuotient(sqrtPi_);
  }
  const CVec scaled = (absM_.array() * u.array()).cast<Complex>().matrix();
  return (absM_.array() * apply_boldS(*profile_, scaled).real().array()).matrix();
}

Vec SaturatedSelfEnergy::applyHat(const Vec& uHat) const {
  if (isDense()) return hat_ * uHat;
  const Vec u = uHat.cwiseQuotient(sqrtPi_);
  return sqrtPi_.asDiagonal() * apply(u);
}

const Mat& SaturatedSelfEnergy::denseHat() const {
  if (!isDense()) throw std::runtime_error("SaturatedSelfEnergy: operator is matrix-free");
  return hat_;
}

const Eigen::SelfAdjointEigenSolver<Mat>& SaturatedSelfEnergy::spectrum() const {
  if (!isDense()) throw std::runtime_error("SaturatedSelfEnergy: no dense spectrum available");
  if (!spectrum_) {
    spectrum_.emplace(hat_);
    if (spectrum_->info() != Eigen::Success)
      throw std::runtime_error("SaturatedSelfEnergy: eigensolve failed");
  }
  return *spectrum_;
}

SaturatedSelfEnergy build_F(const VarianceProfile& profile, const QveSolution& qve) {
  return SaturatedSelfEnergy(profile, qve.m);
}

namespace {

LeadingPair leading_pair_dense(const SaturatedSelfEnergy& F) {
  const auto& es = F.spectrum();
  const Index N = F.size();
  const double top = es.eigenvalues()(N - 1);
  const double bottom = es.eigenvalues()(0);
  LeadingPair pair;
  pair.normF = std::max(top, -bottom);
  if (pair.normF <= 0.0)
    throw std::runtime_error("leading_pair: zero operator has no Perron eigenvector");

  Vec fHat = es.eigenvectors().col(N - 1);
  if (fHat.sum() < 0.0) fHat = -fHat;
  if (fHat.minCoeff() <= 0.0)
    throw std::runtime_error(
        "leading_pair: Perron vector not strictly positive (reducible profile?)");
  pair.fPlus = fHat.cwiseQuotient(F.sqrtPi());
  pair.fMinus = chiral_sign(F.profile()).asDiagonal() * pair.fPlus;
  return pair;
}

// Matrix-free: F is block-antidiagonal, so F^2 decouples into the two index
// spaces. Power iteration on each block of F^2 gives the halves of f_+; the
// relative scale is fixed by F f_+ = ||F|| f_+ restricted to the row space.
LeadingPair leading_pair_power(const SaturatedSelfEnergy& F) {
  const auto& profile = F.profile();
  const Index p = profile.p, n = profile.n, N = p + n;
  auto applyF2 = [&](const Vec& v) { return F.applyHat(F.applyHat(v)); };

  Vec v = Vec::Ones(N);
  v.head(p) /= v.head(p).norm();
  v.tail(n) /= v.tail(n).norm();
  double lambdaHead = 0.0, lambdaTail = 0.0;
  const int maxIter = 20000;
  const double tol = 1e-13;
  for (int it = 0; it < maxIter; ++it) {
    const Vec w = applyF2(v);
    const double lh = v.head(p).dot(w.head(p));
    const double lt = v.tail(n).dot(w.tail(n));
    Vec next(N);
    const double nh = w.head(p).norm(), nt = w.tail(n).norm();
    if (nh <= 0.0 || nt <= 0.0)
      throw std::runtime_error("leading_pair: power iteration collapsed (reducible profile?)");
    next.head(p) = w.head(p) / nh;
    next.tail(n) = w.tail(n) / nt;
    const bool settled = std::abs(lh - lambdaHead) <= tol * std::max(1.0, std::abs(lh)) &&
                         std::abs(lt - lambdaTail) <= tol * std::max(1.0, std::abs(lt));
    lambdaHead = lh;
    lambdaTail = lt;
    v = next;
    if (settled && it > 3) break;
    if (it + 1 == maxIter)
      throw std::runtime_error("leading_pair: power iteration stagnated (gap too small)");
  }

  const double normF = std::sqrt(std::max(lambdaHead, 0.0));
  if (normF <= 0.0) throw std::runtime_error("leading_pair: zero operator");
  Vec g1 = v.head(p), g2 = v.tail(n);
  if (g1.sum() < 0.0) g1 = -g1;
  if (g2.sum() < 0.0) g2 = -g2;
  if (g1.minCoeff() <= 0.0 || g2.minCoeff() <= 0.0)
    throw std::runtime_error(
        "leading_pair: Perron vector not strictly positive (reducible profile?)");

  // F(c2 g2) = normF c1 g1 with F g2|rows = t g1: scale halves via t.
  Vec g2full = Vec::Zero(N);
  g2full.tail(n) = g2;
  const double t = g1.dot(F.applyHat(g2full).head(p));
  const double ratio = normF / t;  // c2/c1
  const double c1 = 1.0 / std::sqrt(1.0 + ratio * ratio);
  const double c2 = c1 * ratio;
  Vec fHat(N);
  fHat.head(p) = c1 * g1;
  fHat.tail(n) = c2 * g2;

  LeadingPair pair;
  pair.normF = normF;
  pair.fPlus = fHat.cwiseQuotient(F.sqrtPi());
  pair.fMinus = chiral_sign(profile).asDiagonal() * pair.fPlus;
  return pair;
}

}  // namespace

LeadingPair leading_pair(const SaturatedSelfEnergy& F) {
  if (F.isDense()) return leading_pair_dense(F);
  return leading_pair_power(F);
}

double spectral_gap_FFt(const VarianceProfile& profile, const QveSolution& qve) {
  const Index p = profile.p, n = profile.n;
  const Vec absM1 = qve.m.head(p).cwiseAbs();
  const Vec absM2 = qve.m.tail(n).cwiseAbs();
  const Vec left = (profile.weight1.cwiseSqrt().array() * absM1.array()).matrix();
  const Vec right = (profile.weight2.cwiseSqrt().array() * absM2.array()).matrix();
  const Mat fHat = left.asDiagonal() * profile.s * right.asDiagonal();
  Mat fft = fHat * fHat.transpose();
  fft = 0.5 * (fft + fft.transpose().eval());
  Eigen::SelfAdjointEigenSolver<Mat> es(fft, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw std::runtime_error("spectral_gap_FFt: eigensolve failed");
  if (p == 1) return es.eigenvalues()(0);  // single eigenvalue: gap to the empty rest
  return es.eigenvalues()(p - 1) - es.eigenvalues()(p - 2);
}

SmallestEigenpair smallest_eigenpair_B(const VarianceProfile& profile, const QveSolution& qve) {
  const SaturatedSelfEnergy F(profile, qve.m);
  const LeadingPair pair = leading_pair(F);
  const CMat bHat = stability_operator_hat(F, qve.m);
  const Index N = bHat.rows();

  Eigen::PartialPivLU<CMat> lu(bHat);
  CVec v = CVec::Ones(N) / std::sqrt(static_cast<double>(N));
  Complex beta(0.0, 0.0);
  double residual = std::numeric_limits<double>::infinity();
  bool ok = false;
  for (int it = 0; it < 80; ++it) {
    CVec w = lu.solve(v);
    const double norm = w.norm();
    if (!std::isfinite(norm) || norm == 0.0) break;
    w /= norm;
    beta = w.dot(bHat * w);
    residual = (bHat * w - beta * w).norm();
    v = w;
    if (residual <= 1e-11 * std::max(1.0, std::abs(beta))) {
      ok = true;
      break;
    }
  }

  if (!ok) {
    // Dense fallback; expensive, only reached when inverse iteration stalls.
    Eigen::ComplexEigenSolver<CMat> ces(bHat);
    if (ces.info() != Eigen::Success)
      throw std::runtime_error("smallest_eigenpair_B: eigensolve failed");
    Index best = 0;
    for (Index i = 1; i < N; ++i)
      if (std::abs(ces.eigenvalues()(i)) < std::abs(ces.eigenvalues()(best))) best = i;
    beta = ces.eigenvalues()(best);
    v = ces.eigenvectors().col(best);
    residual = (bHat * v - beta * v).norm();
  }

  const Vec fPlusHat = (F.sqrtPi().array() * pair.fPlus.array()).matrix();
  const Complex overlap = v.dot(fPlusHat.cast<Complex>().eval());
  if (std::abs(overlap) < 1e-10)
    throw std::runtime_error("smallest_eigenpair_B: <b, f_+> vanishes, normalization failed");
  v /= std::conj(overlap);

  SmallestEigenpair out;
  out.beta = beta;
  out.b = v.cwiseQuotient(F.sqrtPi().cast<Complex>().eval());
  out.eigResidual = residual;
  return out;
}

double quad_form_D(const SaturatedSelfEnergy& F, const LeadingPair& pair, const Vec& w) {
  if (pair.normF >= 1.0 - 1e-14)
    throw std::runtime_error("quad_form_D: ||F|| too close to 1, form ill-conditioned");
  const Vec wHat = (F.sqrtPi().array() * w.array()).matrix();
  const Vec fHat = (F.sqrtPi().array() * pair.fPlus.array()).matrix();
  const Vec q = wHat - fHat.dot(wHat) * fHat;

  if (F.isDense()) {
    const auto& es = F.spectrum();
    const Vec coeffs = es.eigenvectors().transpose() * q;
    const Vec& lambda = es.eigenvalues();
    double total = 0.0;
    Index topIndex = 0;
    lambda.maxCoeff(&topIndex);
    for (Index i = 0; i < lambda.size(); ++i) {
      if (i == topIndex) continue;  // Q+ removed this direction exactly
      total += coeffs[i] * coeffs[i] * (pair.normF + lambda[i]) / (1.0 - lambda[i]);
    }
    return total;
  }

  // Matrix-free: x = (1 - F)^{-1} q by conjugate gradient, deflating f_+.
  auto applyDeflated = [&](const Vec& u) {
    Vec r = u - F.applyHat(u);
    return Vec(r - fHat.dot(r) * fHat);
  };
  Vec x = Vec::Zero(q.size());
  Vec r = q;
  Vec d = r;
  double rs = r.squaredNorm();
  const double target = 1e-26 * std::max(1.0, q.squaredNorm());
  for (int it = 0; it < 10000 && rs > target; ++it) {
    const Vec ad = applyDeflated(d);
    const double alpha = rs / d.dot(ad);
    x += alpha * d;
    r -= alpha * ad;
    const double rsNew = r.squaredNorm();
    d = r + (rsNew / rs) * d;
    rs = rsNew;
  }
  const Vec y = pair.normF * x + F.applyHat(x);
  return q.dot(y);
}

CubicDiagnostics cubic_diagnostics(const VarianceProfile& profile, const QveSolution& qve) {
  const SaturatedSelfEnergy F(profile, qve.m);
  const LeadingPair pair = leading_pair(F);

  CubicDiagnostics diag;
  Vec sign(qve.m.size());
  for (Index i = 0; i < qve.m.size(); ++i) {
    const double re = qve.m[i].real();
    if (re == 0.0) ++diag.signTies;
    sign[i] = re < 0.0 ? -1.0 : 1.0;
  }

  const Vec pf2 = (sign.array() * pair.fPlus.array().square()).matrix();
  diag.psi = quad_form_D(F, pair, pf2);
  diag.sigma = inner_combined(profile, pair.fPlus, pf2);
  const Vec imOverAbs = (qve.m.imag().array() / qve.m.cwiseAbs().array()).matrix();
  diag.alpha = inner_combined(profile, pair.fPlus, imOverAbs);
  diag.psiPlusSigma2 = diag.psi + diag.sigma * diag.sigma;
  return diag;
}

BinvProbe binv_norm_probe(const VarianceProfile& profile, const QveSolution& qve) {
  const SaturatedSelfEnergy F(profile, qve.m);
  const CMat bHat = stability_operator_hat(F, qve.m);
  const Index N = bHat.rows();

  BinvProbe probe;
  probe.imAvg = avg_combined(profile, Vec(qve.m.imag()));

  Eigen::PartialPivLU<CMat> lu(bHat);
  CVec v = CVec::Random(N);
  v /= v.norm();
  double estimate = 0.0;
  for (int it = 0; it < 40; ++it) {
    CVec y = lu.solve(v);
    y = lu.adjoint().solve(y);
    const double norm = y.norm();
    if (!std::isfinite(norm) || norm <= 0.0) {
      probe.saturated = true;
      break;
    }
    estimate = std::sqrt(norm);
    v = y / norm;
  }
  probe.normBinv = estimate;
  if (!std::isfinite(estimate) || estimate > 1e14) probe.saturated = true;
  return probe;
}

StabilityReport stability_report(const VarianceProfile& profile, const QveSolution& qve,
                                 double epsStar) {
  StabilityReport report;
  report.z = qve.z;

  const SaturatedSelfEnergy F(profile, qve.m);
  const LeadingPair pair = leading_pair(F);
  report.normF = pair.normF;
  report.fPlus = pair.fPlus;
  report.fMinus = pair.fMinus;
  report.gapFFt = spectral_gap_FFt(profile, qve);

  const CubicDiagnostics diag = cubic_diagnostics(profile, qve);
  report.psi = diag.psi;
  report.sigma = diag.sigma;
  report.alpha = diag.alpha;
  report.psiPlusSigma2 = diag.psiPlusSigma2;

  const BinvProbe probe = binv_norm_probe(profile, qve);
  report.normBinv = probe.normBinv;
  report.imAvg = probe.imAvg;
  report.regimeWarning = probe.imAvg > epsStar;

  const SmallestEigenpair eig = smallest_eigenpair_B(profile, qve);
  report.beta = eig.beta;
  report.bVector = eig.b;
  return report;
}

}  // namespace gramdos
