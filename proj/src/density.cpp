#include "gramdos/density.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace gramdos {

namespace {

constexpr double kPi = std::numbers::pi;

void check_increasing(const Vec& energies) {
  for (Index i = 1; i < energies.size(); ++i)
    if (energies[i] <= energies[i - 1])
      throw std::invalid_argument("density: energy grid must be strictly increasing");
}

}  // namespace

double DensityCurve::interpolate(double energy) const {
  if (size() == 0) return 0.0;
  if (energy <= energies[0]) return energy == energies[0] ? avgDensity[0] : 0.0;
  if (energy >= energies[size() - 1])
    return energy == energies[size() - 1] ? avgDensity[size() - 1] : 0.0;
  const double* begin = energies.data();
  const double* it = std::upper_bound(begin, begin + size(), energy);
  const Index hi = it - begin;
  const double t = (energy - energies[hi - 1]) / (energies[hi] - energies[hi - 1]);
  return (1.0 - t) * avgDensity[hi - 1] + t * avgDensity[hi];
}

DensityCurve stieltjes_invert(const VarianceProfile& profile,
                              const std::vector<QveSolution>& solutions, bool keepPerComponent) {
  DensityCurve curve;
  curve.kind = CurveKind::Qve;
  if (solutions.empty()) return curve;
  curve.etaUsed = solutions.front().z.im;
  const Index N = profile.p + profile.n;
  curve.energies.resize(static_cast<Index>(solutions.size()));
  curve.avgDensity.resize(curve.energies.size());
  if (keepPerComponent) curve.perComponent.resize(N, curve.energies.size());

  for (size_t i = 0; i < solutions.size(); ++i) {
    const auto& sol = solutions[i];
    if (std::abs(sol.z.im - curve.etaUsed) > 1e-15 * std::max(1.0, curve.etaUsed))
      throw std::invalid_argument("stieltjes_invert: mixed eta inputs");
    curve.energies[static_cast<Index>(i)] = sol.z.re;
    const Vec im = sol.m.imag() / kPi;
    curve.avgDensity[static_cast<Index>(i)] = avg_combined(profile, im);
    if (keepPerComponent) curve.perComponent.col(static_cast<Index>(i)) = im;
  }
  check_increasing(curve.energies);
  return curve;
}

DensityCurve stieltjes_invert(const VarianceProfile& profile,
                              const std::vector<GramSolution>& solutions, bool keepPerComponent) {
  DensityCurve curve;
  curve.kind = CurveKind::Gram;
  if (solutions.empty()) return curve;
  curve.etaUsed = solutions.front().zeta.im;
  curve.energies.resize(static_cast<Index>(solutions.size()));
  curve.avgDensity.resize(curve.energies.size());
  if (keepPerComponent) curve.perComponent.resize(profile.p, curve.energies.size());

  for (size_t i = 0; i < solutions.size(); ++i) {
    const auto& sol = solutions[i];
    if (std::abs(sol.zeta.im - curve.etaUsed) > 1e-15 * std::max(1.0, curve.etaUsed))
      throw std::invalid_argument("stieltjes_invert: mixed eta inputs");
    curve.energies[static_cast<Index>(i)] = sol.zeta.re;
    const Vec im = sol.m.imag() / kPi;
    curve.avgDensity[static_cast<Index>(i)] =
        (profile.weight1.array() * im.array()).sum() / profile.mass1();
    if (keepPerComponent) curve.perComponent.col(static_cast<Index>(i)) = im;
  }
  check_increasing(curve.energies);
  return curve;
}

DensityCurve richardson_extrapolate(const DensityCurve& coarse, const DensityCurve& fine) {
  if (coarse.kind != fine.kind || coarse.size() != fine.size() ||
      (coarse.size() > 0 && coarse.energies != fine.energies))
    throw std::invalid_argument("richardson_extrapolate: curves must share grid and kind");
  if (!(coarse.etaUsed > fine.etaUsed && fine.etaUsed > 0.0))
    throw std::invalid_argument("richardson_extrapolate: need etaCoarse > etaFine > 0");

  // The Poisson smoothing error of a real-analytic density is even in eta,
  // so the leading term is eta^2.
  const double c2 = coarse.etaUsed * coarse.etaUsed;
  const double f2 = fine.etaUsed * fine.etaUsed;
  const double t = c2 / (c2 - f2);
  DensityCurve out = fine;
  out.avgDensity = (t * fine.avgDensity + (1.0 - t) * coarse.avgDensity).cwiseMax(0.0);
  if (fine.perComponent.size() > 0 && coarse.perComponent.size() > 0)
    out.perComponent =
        (t * fine.perComponent + (1.0 - t) * coarse.perComponent).cwiseMax(0.0);
  out.etaUsed = fine.etaUsed;  // nominal; the extrapolation targets eta = 0
  return out;
}

DensityCurve qve_to_gram_density(const DensityCurve& rho) {
  if (rho.kind != CurveKind::Qve)
    throw std::invalid_argument("qve_to_gram_density: input must be a QVE curve");
  DensityCurve out;
  out.kind = CurveKind::Gram;
  out.etaUsed = rho.etaUsed;
  if (rho.size() == 0) return out;
  if (rho.energies[0] <= 0.0)
    throw std::invalid_argument("qve_to_gram_density: grid must be strictly positive");

  out.energies = rho.energies.array().square();
  out.avgDensity = (rho.avgDensity.array() / rho.energies.array()).matrix();
  if (rho.perComponent.size() > 0) {
    out.perComponent = rho.perComponent;
    for (Index j = 0; j < out.perComponent.cols(); ++j)
      out.perComponent.col(j) /= rho.energies[j];
  }
  return out;
}

SupportSet detect_support(const DensityCurve& curve, double threshold, double deltaCutoff,
                          double minComponentWidth) {
  if (deltaCutoff <= 0.0) throw std::invalid_argument("detect_support: delta cutoff must be > 0");
  SupportSet support;
  support.threshold = threshold;
  support.deltaCutoff = deltaCutoff;
  const Index n = curve.size();
  if (n == 0) return support;

  // above-threshold mask with single-point dips filled in
  std::vector<bool> above(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) above[static_cast<size_t>(i)] = curve.avgDensity[i] > threshold;
  for (Index i = 1; i + 1 < n; ++i)
    if (!above[static_cast<size_t>(i)] && above[static_cast<size_t>(i - 1)] &&
        above[static_cast<size_t>(i + 1)])
      above[static_cast<size_t>(i)] = true;

  Index i = 0;
  while (i < n) {
    if (!above[static_cast<size_t>(i)]) {
      ++i;
      continue;
    }
    Index j = i;
    while (j + 1 < n && above[static_cast<size_t>(j + 1)]) ++j;
    double lo = curve.energies[i];
    double hi = curve.energies[j];
    if (hi >= deltaCutoff) {
      lo = std::max(lo, deltaCutoff);
      SupportInterval interval{lo, hi, (hi - lo) < minComponentWidth};
      if (hi > lo) support.intervals.push_back(interval);
    }
    i = j + 1;
  }
  return support;
}

MassReport mass_decomposition(const VarianceProfile& profile, const DensityCurve& curve) {
  if (curve.kind != CurveKind::Gram)
    throw std::invalid_argument("mass_decomposition: expects a Gram-kind curve");
  if (curve.perComponent.size() == 0)
    throw std::invalid_argument("mass_decomposition: curve must carry per-component densities");

  MassReport report;
  report.deltaCutoff = curve.size() > 0 ? curve.energies[0] : 0.0;
  const double sigma = sigma_bound(profile);
  if (curve.size() < 2 || curve.energies[curve.size() - 1] < sigma)
    throw std::invalid_argument("mass_decomposition: grid must cover [delta_cutoff, Sigma]");

  report.densityMass = Vec::Zero(profile.p);
  for (Index j = 1; j < curve.size(); ++j) {
    const double h = curve.energies[j] - curve.energies[j - 1];
    report.densityMass +=
        0.5 * h * (curve.perComponent.col(j) + curve.perComponent.col(j - 1));
  }
  report.zeroMassEstimate = (Vec::Ones(profile.p) - report.densityMass).cwiseMax(0.0);
  return report;
}

std::vector<double> geometric_ladder(double floor, double top, double ratio) {
  if (!(floor > 0.0 && top > floor && ratio > 0.0 && ratio < 1.0))
    throw std::invalid_argument("geometric_ladder: need 0 < floor < top and ratio in (0,1)");
  std::vector<double> ladder;
  for (double eta = top; eta > floor * (1.0 + 1e-12); eta *= ratio) ladder.push_back(eta);
  ladder.push_back(floor);
  return ladder;
}

namespace {

// Shared ladder driver: full solutions at the floor and, when requested, at
// the penultimate rung 2*floor for the Richardson combination.
struct LadderSolutions {
  CMat mFloor;  // N x grid
  CMat mPrev;   // N x grid (eta = 2*floor), only when richardson
};

LadderSolutions run_ladders(const VarianceProfile& profile, const Vec& res, double etaFloor,
                            const SolverOptions& optsIn, bool richardson,
                            SweepStrategy strategy) {
  SolverOptions opts = optsIn;
  opts.etaFloor = std::min(opts.etaFloor, etaFloor);
  const double topEta = richardson ? 2.0 * etaFloor : etaFloor;
  const std::vector<double> ladder = geometric_ladder(topEta);

  const Index N = profile.p + profile.n;
  LadderSolutions out;
  out.mFloor.resize(N, res.size());
  if (richardson) out.mPrev.resize(N, res.size());

  QveSolution previous;  // marched neighbor at topEta
  for (Index i = 0; i < res.size(); ++i) {
    QveSolution sol;
    bool solved = false;
    if (strategy == SweepStrategy::MarchAcrossEnergies && i > 0 && previous.converged) {
      sol = solve_qve(profile, SpectralParameter(res[i], topEta), &previous.m, opts);
      solved = sol.converged;
    }
    if (!solved) {
      const CVec* init = nullptr;
      for (double eta : ladder) {
        sol = solve_qve(profile, SpectralParameter(res[i], eta), init, opts);
        init = &sol.m;
        if (!sol.converged) break;
      }
    }
    if (!sol.converged)
      throw std::runtime_error("density: ladder failed to converge at grid point " +
                               std::to_string(res[i]) + " (residual " +
                               std::to_string(sol.residual) + ")");
    previous = sol;
    if (richardson) {
      out.mPrev.col(i) = sol.m;
      sol = solve_qve(profile, SpectralParameter(res[i], etaFloor), &sol.m, opts);
      if (!sol.converged)
        throw std::runtime_error("density: Richardson rung failed at grid point " +
                                 std::to_string(res[i]));
    }
    out.mFloor.col(i) = sol.m;
  }
  return out;
}

Vec gram_component_density(const VarianceProfile& profile, const CVec& m, double tau, double eta) {
  const Complex z(tau, eta);
  return (m.head(profile.p) / z).imag() / std::numbers::pi;
}

}  // namespace

DensityCurve solve_gram_density(const VarianceProfile& profile, const Vec& energies,
                                double etaFloor, const SolverOptions& opts, bool keepPerComponent,
                                bool richardson, SweepStrategy strategy) {
  for (Index i = 0; i < energies.size(); ++i)
    if (!(energies[i] > 0.0))
      throw std::invalid_argument("solve_gram_density: energies must be positive");
  const Vec taus = energies.array().sqrt();
  const LadderSolutions data = run_ladders(profile, taus, etaFloor, opts, richardson, strategy);

  DensityCurve curve;
  curve.kind = CurveKind::Gram;
  curve.etaUsed = etaFloor;
  curve.energies = energies;
  curve.avgDensity.resize(energies.size());
  if (keepPerComponent) curve.perComponent.resize(profile.p, energies.size());

  for (Index i = 0; i < energies.size(); ++i) {
    Vec nu = gram_component_density(profile, data.mFloor.col(i), taus[i], etaFloor);
    if (richardson) {
      const Vec nuPrev =
          gram_component_density(profile, data.mPrev.col(i), taus[i], 2.0 * etaFloor);
      nu = ((4.0 * nu - nuPrev) / 3.0).cwiseMax(0.0);
    }
    curve.avgDensity[i] = (profile.weight1.array() * nu.array()).sum() / profile.mass1();
    if (keepPerComponent) curve.perComponent.col(i) = nu;
  }
  return curve;
}

DensityCurve solve_qve_density(const VarianceProfile& profile, const Vec& taus, double etaFloor,
                               const SolverOptions& opts, bool keepPerComponent, bool richardson,
                               SweepStrategy strategy) {
  const LadderSolutions data = run_ladders(profile, taus, etaFloor, opts, richardson, strategy);

  DensityCurve curve;
  curve.kind = CurveKind::Qve;
  curve.etaUsed = etaFloor;
  curve.energies = taus;
  curve.avgDensity.resize(taus.size());
  if (keepPerComponent) curve.perComponent.resize(profile.p + profile.n, taus.size());

  for (Index i = 0; i < taus.size(); ++i) {
    Vec rho = data.mFloor.col(i).imag() / std::numbers::pi;
    if (richardson) {
      const Vec rhoPrev = data.mPrev.col(i).imag() / std::numbers::pi;
      rho = ((4.0 * rho - rhoPrev) / 3.0).cwiseMax(0.0);
    }
    curve.avgDensity[i] = avg_combined(profile, rho);
    if (keepPerComponent) curve.perComponent.col(i) = rho;
  }
  return curve;
}

}  // namespace gramdos
