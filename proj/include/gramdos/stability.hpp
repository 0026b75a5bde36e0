#pragma once

#include <optional>

#include "gramdos/dyson.hpp"
#include "gramdos/profile.hpp"
#include "gramdos/types.hpp"

namespace gramdos {

/// Saturated self-energy operator u -> |m| S (|m| u) at a solved spectral
/// point. Internally the operator is conjugated with sqrt(pi) so that it is
/// symmetric in the standard sense; it is materialized densely up to
/// denseLimit and applied matrix-free above.
class SaturatedSelfEnergy {
 public:
  SaturatedSelfEnergy(const VarianceProfile& profile, const CVec& m, Index denseLimit = 4000);

  Index size() const { return absM_.size(); }
  bool isDense() const { return hat_.size() > 0; }
  const VarianceProfile& profile() const { return *profile_; }
  const Vec& absM() const { return absM_; }
  const Vec& sqrtPi() const { return sqrtPi_; }

  /// Action in function coordinates (F maps real to real).
  Vec apply(const Vec& u) const;
  /// Action in the symmetrized coordinates u_hat = sqrt(pi) u.
  Vec applyHat(const Vec& uHat) const;
  /// Dense symmetrized matrix; throws when matrix-free.
  const Mat& denseHat() const;

  /// Full spectrum (dense path only), cached after first use. Ascending.
  const Eigen::SelfAdjointEigenSolver<Mat>& spectrum() const;

 private:
  const VarianceProfile* profile_;
  Vec absM_;
  Vec sqrtPi_;
  Mat hat_;
  mutable std::optional<Eigen::SelfAdjointEigenSolver<Mat>> spectrum_;
};

SaturatedSelfEnergy build_F(const VarianceProfile& profile, const QveSolution& qve);

struct LeadingPair {
  double normF = 0.0;
  Vec fPlus;   // componentwise positive, L2(pi)-normalized, function coordinates
  Vec fMinus;  // e_- fPlus
};

/// Top eigenpair of F. Throws when the Perron vector is not strictly positive
/// (reducible profile) or when power iteration stagnates without a dense
/// fallback.
LeadingPair leading_pair(const SaturatedSelfEnergy& F);

/// Difference of the two largest eigenvalues of the row-space operator F F^t
/// built from the Gram-side blocks.
double spectral_gap_FFt(const VarianceProfile& profile, const QveSolution& qve);

struct SmallestEigenpair {
  Complex beta;
  CVec b;  // normalized so <b, f_+> = 1
  double eigResidual = 0.0;
};

/// Smallest-modulus eigenvalue of the stability operator
/// B = diag(|m|^2/m^2) - F by inverse iteration with a dense fallback.
SmallestEigenpair smallest_eigenpair_B(const VarianceProfile& profile, const QveSolution& qve);

/// Nonnegative quadratic form D(w) = <Q+ w, (||F|| + F)(1 - F)^{-1} Q+ w>
/// with Q+ the projection removing the f_+ component. Requires ||F|| < 1.
double quad_form_D(const SaturatedSelfEnergy& F, const LeadingPair& pair, const Vec& w);

struct CubicDiagnostics {
  double psi = 0.0;    // D(p f_+^2), p = sign Re m
  double sigma = 0.0;  // <f_+, p f_+^2>
  double alpha = 0.0;  // <f_+ Im m / |m|>
  double psiPlusSigma2 = 0.0;
  int signTies = 0;  // components with Re m == 0 (assigned +1)
};

CubicDiagnostics cubic_diagnostics(const VarianceProfile& profile, const QveSolution& qve);

struct BinvProbe {
  double normBinv = 0.0;  // spectral-norm estimate of B^{-1}
  double imAvg = 0.0;     // <Im m>
  bool saturated = false;
};

BinvProbe binv_norm_probe(const VarianceProfile& profile, const QveSolution& qve);

/// Everything above at one spectral point.
struct StabilityReport {
  SpectralParameter z;
  double normF = 0.0;
  Vec fPlus;
  Vec fMinus;
  double gapFFt = 0.0;
  Complex beta;
  CVec bVector;
  double psi = 0.0;
  double sigma = 0.0;
  double alpha = 0.0;
  double psiPlusSigma2 = 0.0;
  double normBinv = 0.0;
  double imAvg = 0.0;
  bool regimeWarning = false;  // <Im m> above the reporting threshold epsStar
};

StabilityReport stability_report(const VarianceProfile& profile, const QveSolution& qve,
                                 double epsStar = 0.05);

}  // namespace gramdos
