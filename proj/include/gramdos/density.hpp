#pragma once

#include <vector>

#include "gramdos/dyson.hpp"
#include "gramdos/profile.hpp"
#include "gramdos/types.hpp"

namespace gramdos {

enum class CurveKind { Gram, Qve };

/// Self-consistent density sampled on an energy grid. The average uses the
/// normalized row measure for Gram curves and the combined measure for QVE
/// curves. perComponent is optional (empty when not requested).
struct DensityCurve {
  Vec energies;       // strictly increasing
  Vec avgDensity;
  Mat perComponent;   // (p or p+n) x grid, may be empty
  double etaUsed = 0.0;
  CurveKind kind = CurveKind::Gram;

  Index size() const { return energies.size(); }
  /// Linear interpolation of avgDensity; zero outside the grid.
  double interpolate(double energy) const;
};

struct SupportInterval {
  double lo = 0.0;
  double hi = 0.0;
  bool narrow = false;  // flagged when width < minComponentWidth
};

struct SupportSet {
  std::vector<SupportInterval> intervals;  // disjoint, sorted
  double threshold = 0.0;
  double deltaCutoff = 0.0;
};

/// Im m / pi componentwise and averaged. All solutions must share one eta and
/// be listed with increasing energies.
DensityCurve stieltjes_invert(const VarianceProfile& profile,
                              const std::vector<QveSolution>& solutions,
                              bool keepPerComponent = false);
DensityCurve stieltjes_invert(const VarianceProfile& profile,
                              const std::vector<GramSolution>& solutions,
                              bool keepPerComponent = false);

/// Two-point Richardson extrapolation toward eta = 0 assuming a quadratic
/// Poisson smoothing error (densities are real-analytic away from the support
/// boundary). Both curves must share grid and kind, with coarse.etaUsed >
/// fine.etaUsed.
DensityCurve richardson_extrapolate(const DensityCurve& coarse, const DensityCurve& fine);

/// nu_k(E) = E^{-1/2} rho_k(E^{1/2}): maps a QVE curve on a tau > 0 grid to a
/// Gram curve on the E = tau^2 grid.
DensityCurve qve_to_gram_density(const DensityCurve& rho);

/// Maximal grid runs with avgDensity > threshold, merged across single-point
/// dips, clipped to [deltaCutoff, inf). Components narrower than
/// minComponentWidth are kept but flagged.
SupportSet detect_support(const DensityCurve& curve, double threshold, double deltaCutoff,
                          double minComponentWidth);

struct MassReport {
  Vec densityMass;       // per-component trapezoid integral over [deltaCutoff, Sigma]
  Vec zeroMassEstimate;  // 1 - densityMass; includes unresolved mass in (0, deltaCutoff)
  double deltaCutoff = 0.0;
  bool nearZeroUnresolved = true;  // the estimate cannot separate the atom from (0, delta) mass
};

/// Trapezoid quadrature of the per-component density over [deltaCutoff, Sigma].
/// The curve must carry per-component data and cover that interval.
MassReport mass_decomposition(const VarianceProfile& profile, const DensityCurve& curve);

/// Geometric eta ladder from top down to floor, ending exactly at floor.
std::vector<double> geometric_ladder(double floor, double top = 1.0, double ratio = 0.25);

/// LadderPerEnergy runs the full eta ladder at every grid point (robust,
/// spec-default). MarchAcrossEnergies ladders only the first point and then
/// warm-starts each energy from its neighbor at the floor eta, falling back
/// to a full ladder whenever the marched solve fails to converge.
enum class SweepStrategy { LadderPerEnergy, MarchAcrossEnergies };

/// Gram density on an energy grid: per energy, an eta ladder for the QVE at
/// tau = sqrt(E) down to etaFloor, transformed back through m(zeta) =
/// m_1(sqrt zeta)/sqrt zeta. With richardson=true the two smallest rungs are
/// combined with the quadratic smoothing-error model toward eta = 0.
DensityCurve solve_gram_density(const VarianceProfile& profile, const Vec& energies,
                                double etaFloor, const SolverOptions& opts = {},
                                bool keepPerComponent = false, bool richardson = false,
                                SweepStrategy strategy = SweepStrategy::LadderPerEnergy);

/// QVE density on a tau grid, same ladder scheme, averaged with the combined
/// measure.
DensityCurve solve_qve_density(const VarianceProfile& profile, const Vec& taus, double etaFloor,
                               const SolverOptions& opts = {}, bool keepPerComponent = false,
                               bool richardson = false,
                               SweepStrategy strategy = SweepStrategy::LadderPerEnergy);

}  // namespace gramdos
