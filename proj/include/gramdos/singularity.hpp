#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gramdos/density.hpp"
#include "gramdos/dyson.hpp"
#include "gramdos/profile.hpp"

namespace gramdos {

enum class BoundaryKind { EdgeLeft, EdgeRight, Cusp, NearCusp };

std::string to_string(BoundaryKind kind);

struct BoundaryPoint {
  double e0 = 0.0;
  BoundaryKind kind = BoundaryKind::EdgeLeft;
  double exponent = 0.0;
  double coefficient = 0.0;
  double windowLo = 0.0;
  double windowHi = 0.0;
  double fitResidual = 0.0;
  double gap = 0.0;  // remaining gap for Cusp/NearCusp candidates
  bool fitOk = false;
};

struct SingularityReport {
  SupportSet support;
  std::vector<BoundaryPoint> boundaryPoints;
};

enum class FitSide { Left, Right, Both };

struct ExponentFit {
  double exponent = 0.0;
  double coefficient = 0.0;
  double residual = 0.0;  // rms log residual
  int pointsUsed = 0;
};

/// Least-squares slope of log density against log|lambda| over grid points
/// with |E - e0| in [wmin, wmax] on the requested side(s). Throws when fewer
/// than 5 usable points fall into the window or the density is nonpositive
/// throughout it.
ExponentFit fit_exponent(const DensityCurve& curve, double e0, FitSide side, double wmin,
                         double wmax);

/// Boundary classification: internal gaps at most cuspGapTol collapse to a
/// cusp candidate at the density minimum between the components (Cusp when
/// the components effectively touch, NearCusp for small but resolved gaps);
/// all remaining boundary points are edges with one-sided exponent fits.
SingularityReport classify_boundary(const DensityCurve& curve, const SupportSet& support,
                                    double cuspGapTol);

struct GapFunction {
  SupportSet support;
  double rho = 0.0;

  void validate() const;  // rho must stay below the smallest half-width
};

/// Local gap size: the distance alpha_{i+1} - beta_i when E lies within rho
/// of the closed gap [beta_i, alpha_{i+1}], 1 beyond the extreme edges
/// (E <= alpha_1 + rho or E >= beta_K - rho), 0 in the bulk.
double delta_rho(const GapFunction& gap, double E);

/// kappa(zeta) = (Delta_rho(Re zeta)^{1/3} + <Im m(zeta)>)^{-1}; +inf when
/// both terms vanish.
double kappa(const GapFunction& gap, const VarianceProfile& profile, const GramSolution& solution);

/// One-parameter family of profiles for cusp hunting.
struct ProfileFamily {
  std::function<VarianceProfile(double)> make;
  std::string parameterName = "parameter";
};

/// Figure-style block family: fixed block values on a gridP x gridN index
/// grid with row/column fractions 1/2; the parameter is the mass ratio
/// pi1(X1)/pi2(X2) carried by the row weights, and the values are divided by
/// the total mass (the bounded-variance normalization).
ProfileFamily aspect_ratio_family(Mat blockValues, Index gridP, Index gridN);

struct CuspScanOptions {
  double energyMin = 5e-2;
  double energyMax = 0.0;  // 0: derived from sigma_bound per parameter
  int coarseGridSize = 100;
  double coarseEtaFloor = 1e-4;
  double refineEtaFloor = 1e-6;
  double relThreshold = 1e-3;    // support threshold relative to the curve maximum
  double cuspGapTol = 1e-2;
  int refineSteps = 14;          // bisection steps toward the gap-closing parameter
  double minDipLo = 2e-3;        // target band for the dip minimum after refinement
  double minDipHi = 2e-2;
  double fitWindowLo = 1e-3;
  double fitWindowHi = 1e-2;
  SolverOptions solver;
};

struct CuspScanPoint {
  double parameter = 0.0;
  double functional = 0.0;  // gap length when split, interior dip density otherwise
  double gap = 0.0;
  double dipDensity = 0.0;
  double dipEnergy = 0.0;
  bool split = false;
};

struct CuspScanResult {
  bool found = false;
  double parameter = 0.0;   // refined gap-closing parameter
  double cuspEnergy = 0.0;
  double dipDensity = 0.0;
  ExponentFit fit;          // two-sided exponent at the dip
  std::vector<CuspScanPoint> scan;
  SingularityReport report;
};

/// Evaluates the gap-closing functional over the parameter grid, refines the
/// best bracket by bisection until the interior dip density enters the target
/// band, and fits the two-sided exponent at the dip.
CuspScanResult cusp_scan(const ProfileFamily& family, const Vec& parameterGrid,
                         const CuspScanOptions& opts = {});

}  // namespace gramdos
