// Acceptance suite: one line per criterion, nonzero exit when any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdarg>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "gramdos/density.hpp"
#include "gramdos/dyson.hpp"
#include "gramdos/profile.hpp"
#include "gramdos/rmt_lab.hpp"
#include "gramdos/singularity.hpp"
#include "gramdos/stability.hpp"
#include "oracles.hpp"

using namespace gramdos;

namespace {

int failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %2d: %s\n", pass ? "PASS" : "FAIL", criterion, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

double seconds_since(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string format(const char* fmt, ...) {
  char buffer[512];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buffer, sizeof(buffer), fmt, args);
  va_end(args);
  return buffer;
}

Mat figure_blocks() { return (Mat(2, 2) << 6, 4, 4, 3).finished(); }

VarianceProfile mp_profile(Index n) { return constant_profile(n, n, 1.0 / n); }

// shared state across criteria
double cuspParameter = 0.0;  // criterion 3 result, reused by 4 and 6
VarianceProfile cuspProfile;
double cuspEnergy = 0.0;

// ---------------------------------------------------------------------------

void criterion_1_marchenko_pastur() {
  const auto start = std::chrono::steady_clock::now();
  const VarianceProfile profile = mp_profile(400);
  Vec energies(5);
  energies << 0.5, 1.0, 2.0, 3.0, 3.9;
  const DensityCurve curve =
      solve_gram_density(profile, energies, 1e-6, {}, false, /*richardson=*/true);

  double worst = 0.0;
  for (Index i = 0; i < energies.size(); ++i)
    worst = std::max(worst,
                     std::abs(curve.avgDensity[i] - oracles::marchenko_pastur_density(energies[i])));
  const double elapsed = seconds_since(start);
  const bool pass = worst <= 1e-3 && elapsed < 60.0;
  report(1, pass,
         format("ratio-1 law at p=n=400: max |density - oracle| = %.2e (tol 1e-3), %.1f s "
                "(budget 60 s)",
                worst, elapsed));
}

void criterion_2_edge_exponent() {
  const VarianceProfile profile = mp_profile(400);
  // coarse grid plus a log patch toward the right edge
  std::vector<double> points;
  for (int i = 0; i < 150; ++i) points.push_back(0.05 + i * (4.4 - 0.05) / 149.0);
  for (int i = 0; i < 45; ++i)
    points.push_back(4.0 - 1.5e-1 * std::pow(4e-4 / 1.5e-1, i / 44.0));
  std::sort(points.begin(), points.end());
  Vec energies(static_cast<Index>(points.size()));
  for (size_t i = 0; i < points.size(); ++i) energies[static_cast<Index>(i)] = points[i];

  const DensityCurve curve = solve_gram_density(profile, energies, 1e-6, {}, false, false,
                                                SweepStrategy::MarchAcrossEnergies);
  const SupportSet support =
      detect_support(curve, 1e-3 * curve.avgDensity.maxCoeff(), 0.05, 0.2);
  const SingularityReport classified = classify_boundary(curve, support, 1e-2);

  bool pass = false;
  double edge = 0.0, exponent = 0.0;
  for (const auto& point : classified.boundaryPoints) {
    if (point.kind != BoundaryKind::EdgeRight) continue;
    edge = point.e0;
    const ExponentFit fit = fit_exponent(curve, point.e0, FitSide::Left, 1e-3, 1e-1);
    exponent = fit.exponent;
    pass = std::abs(edge - 4.0) <= 0.01 && std::abs(exponent - 0.5) <= 0.03;
  }
  report(2, pass,
         format("right edge at %.4f (want 4.0 +- 0.01), exponent %.3f on [1e-3,1e-1] "
                "(want 0.5 +- 0.03)",
                edge, exponent));
}

void criterion_3_cusp_scan() {
  const auto start = std::chrono::steady_clock::now();
  const ProfileFamily family = aspect_ratio_family(figure_blocks(), 200, 200);
  Vec grid(20);
  for (Index i = 0; i < 20; ++i) grid[i] = 0.008 * std::pow(0.12 / 0.008, i / 19.0);
  CuspScanOptions opts;
  opts.coarseGridSize = 90;
  const CuspScanResult result = cusp_scan(family, grid, opts);
  const double elapsed = seconds_since(start);

  bool pass = result.found && elapsed < 600.0;
  if (result.found) {
    pass = pass && std::abs(result.fit.exponent - 1.0 / 3.0) <= 0.05;
    pass = pass && result.cuspEnergy > 3.0 && result.cuspEnergy < 5.0;
    cuspParameter = result.parameter;
    cuspProfile = family.make(cuspParameter);
    cuspEnergy = result.cuspEnergy;
  }
  const double scale = result.found ? 8.0 / result.cuspEnergy : 0.0;
  report(3, pass,
         format("gap closes at mass ratio %.5f; cusp at E = %.3f, two-sided exponent %.3f "
                "(want 1/3 +- 0.05); x%.2f value scale matches the reference E ~ 8; %.0f s "
                "(budget 600 s)",
                result.parameter, result.cuspEnergy, result.fit.exponent, scale, elapsed));
}

void criterion_4_symmetry_identity() {
  double worst = 0.0;
  long solves = 0;
  const std::vector<double> ladder = geometric_ladder(1e-6);

  auto sweepCheck = [&](const VarianceProfile& profile, const Vec& taus) {
    const SweepResult sweep = continuation_sweep(profile, taus, ladder);
    for (const auto& sol : sweep.solutions) {
      if (!sol.converged) continue;
      worst = std::max(worst, symmetry_residual(profile, sol));
      ++solves;
    }
  };

  // suite-1 energies on the square-root scale
  Vec suite1(5);
  suite1 << std::sqrt(0.5), 1.0, std::sqrt(2.0), std::sqrt(3.0), std::sqrt(3.9);
  sweepCheck(mp_profile(400), suite1);
  // suite-2 window around the edge
  Vec suite2 = Vec::LinSpaced(12, std::sqrt(3.85), std::sqrt(4.1));
  sweepCheck(mp_profile(400), suite2);
  // suite-3 profile across its support, including the cusp region
  if (cuspProfile.p > 0) {
    Vec suite3 = Vec::LinSpaced(25, 0.3, std::sqrt(1.05 * sigma_bound(cuspProfile)));
    sweepCheck(cuspProfile, suite3);
  }

  const bool pass = solves > 30 && worst <= 1e-8;
  report(4, pass,
         format("|z<e_-, m> + <e_->| <= %.2e over %ld converged solves (tol 1e-8)", worst,
                solves));
}

void criterion_5_operator_properties() {
  const VarianceProfile mp = mp_profile(150);
  const VarianceProfile fig =
      cuspProfile.p > 0 ? cuspProfile : build_block_profile(
                                            [] {
                                              BlockSpec spec;
                                              spec.values = figure_blocks();
                                              spec.rowFractions = Vec::Constant(2, 0.5);
                                              spec.colFractions = Vec::Constant(2, 0.5);
                                              return spec;
                                            }(),
                                            150, 150);

  std::mt19937 engine(2024);
  std::normal_distribution<double> gauss;
  double worstNorm = 0.0, worstEigen = 0.0, worstD = 0.0, worstNeg = 0.0;
  int points = 0;

  auto probe = [&](const VarianceProfile& profile, double tau, double eta) {
    const QveSolution sol = solve_qve(profile, SpectralParameter(tau, eta));
    if (!sol.converged) return;
    const SaturatedSelfEnergy F(profile, sol.m);
    const LeadingPair pair = leading_pair(F);
    worstNorm = std::max(worstNorm, pair.normF - 1.0);
    const Vec residual = F.apply(pair.fMinus) + pair.normF * pair.fMinus;
    worstEigen = std::max(worstEigen, residual.cwiseAbs().maxCoeff());
    worstD = std::max(worstD, quad_form_D(F, pair, pair.fPlus));
    worstD = std::max(worstD, quad_form_D(F, pair, pair.fMinus));
    for (int k = 0; k < 100; ++k) {
      Vec w(F.size());
      for (Index i = 0; i < w.size(); ++i) w[i] = gauss(engine);
      worstNeg = std::min(worstNeg, quad_form_D(F, pair, w));
    }
    ++points;
  };

  // bulk, edge, and off-support spectral parameters for both profiles
  for (double tau : {0.6, 1.0, 1.4, 1.8, 1.99, 2.05, 2.4, 3.0}) {
    for (double eta : {1e-2, 1e-4}) {
      probe(mp, tau, eta);
    }
  }
  const double sigmaFig = std::sqrt(sigma_bound(fig));
  for (double frac : {0.2, 0.45, 0.7, 0.9, 0.99, 1.05, 1.3}) {
    for (double eta : {1e-2, 1e-4}) {
      probe(fig, frac * sigmaFig, eta);
    }
  }
  for (double tau : {0.35, 0.8, 1.6, 2.6}) probe(fig, tau, 1e-3);

  const bool pass = points >= 50 && worstNorm <= 1e-12 && worstEigen <= 1e-8 &&
                    worstD <= 1e-8 && worstNeg >= -1e-12;
  report(5, pass,
         format("%d points: ||F||-1 <= %.1e, ||F f_- + ||F|| f_-|| <= %.1e, "
                "D(f_+/f_-) <= %.1e, min D(w) = %.1e over 100 random w per point",
                points, worstNorm, worstEigen, worstD, worstNeg));
}

void criterion_6_cubic_floor() {
  if (cuspProfile.p == 0) {
    report(6, false, "skipped: cusp profile unavailable (criterion 3 failed)");
    return;
  }
  const double deltaTilde = std::sqrt(0.05) / 2.0;
  const double sigma = sigma_bound(cuspProfile);
  const double lo = 2.0 * deltaTilde;
  const double hi = 10.0 * std::sqrt(sigma);

  // dense near the support, logarithmic into the far tail
  std::vector<double> taus;
  for (int i = 0; i < 40; ++i)
    taus.push_back(lo + (1.1 * std::sqrt(sigma) - lo) * i / 39.0);
  for (int i = 0; i < 12; ++i)
    taus.push_back(1.15 * std::sqrt(sigma) *
                   std::pow(hi / (1.15 * std::sqrt(sigma)), i / 11.0));

  double minVal = 1e300, maxVal = 0.0;
  int used = 0;
  for (double tau : taus) {
    if (tau > hi) continue;
    const QveSolution sol = solve_qve(cuspProfile, SpectralParameter(tau, 1e-5));
    if (!sol.converged) continue;
    const double imAvg = avg_combined(cuspProfile, Vec(sol.m.imag()));
    if (imAvg > 0.05) continue;  // restricted sweep
    const CubicDiagnostics diag = cubic_diagnostics(cuspProfile, sol);
    minVal = std::min(minVal, diag.psiPlusSigma2);
    maxVal = std::max(maxVal, diag.psiPlusSigma2);
    ++used;
  }
  const bool pass = used >= 20 && minVal >= 1e-3 && maxVal <= 1e3;
  report(6, pass,
         format("psi + sigma^2 in [%.3e, %.3e] over %d sweep points with <Im m> <= 0.05 "
                "(want within [1e-3, 1e3])",
                minVal, maxVal, used));
}

void criterion_7_linearization() {
  SampleConfig config;
  config.profile = mp_profile(200);
  config.seed = 1234;
  config.trials = 20;

  double worst = 0.0;
  for (int trial = 0; trial < config.trials; ++trial) {
    const CMat x = sample_matrix(config, trial);
    const EmpiricalSpectrum gram = gram_eigenvalues(x, trial);
    const Vec hsq = linearization_squared_eigenvalues(x);
    std::vector<double> nonzero;
    for (Index i = 0; i < hsq.size(); ++i)
      if (hsq[i] > 1e-10) nonzero.push_back(hsq[i]);
    if (nonzero.size() != 2 * static_cast<size_t>(gram.eigenvalues.size())) {
      worst = 1.0;
      break;
    }
    for (Index k = 0; k < gram.eigenvalues.size(); ++k) {
      const double reference = std::max(gram.eigenvalues[k], 1e-300);
      worst = std::max(worst, std::abs(nonzero[2 * k] - reference) / reference);
      worst = std::max(worst, std::abs(nonzero[2 * k + 1] - reference) / reference);
    }
  }
  report(7, worst <= 1e-10,
         format("H^2 vs X X^* spectra over 20 trials at p=n=200: max relative gap %.2e "
                "(tol 1e-10)",
                worst));
}

void criterion_8_local_law() {
  const Index p = 300;
  SampleConfig config;
  config.profile = mp_profile(p);
  config.seed = 777;
  config.trials = 50;

  GapFunction gap;
  gap.support.intervals.push_back({0.05, 4.0, false});
  gap.rho = 0.5;

  const double eta = std::pow(static_cast<double>(p), -0.6);
  std::vector<SpectralParameter> zetas = {SpectralParameter(1.0, eta),
                                          SpectralParameter(2.0, eta),
                                          SpectralParameter(3.0, eta)};
  std::vector<CVec> ws = {CVec::Ones(p)};
  const LocalLawReport report8 = local_law_check(config, zetas, gap, ws);

  double worstAvg = 1.0, worstOff = 1.0;
  for (const auto& point : report8.points) {
    worstAvg = std::min(worstAvg, point.passFractionAvg);
    worstOff = std::min(worstOff, point.passFractionOffdiag);
  }
  const bool pass = worstAvg >= 0.95 && worstOff >= 0.95;
  report(8, pass,
         format("p=300, 50 trials, eta = p^-0.6: averaged-law pass fraction >= %.2f, "
                "off-diagonal pass fraction >= %.2f (want >= 0.95)",
                worstAvg, worstOff));
}

void criterion_9_empirical_cdf() {
  // constant profile
  SampleConfig mpConfig;
  mpConfig.profile = mp_profile(500);
  mpConfig.seed = 31337;
  mpConfig.trials = 20;
  const Vec mpGrid = Vec::LinSpaced(320, 0.05, 4.4);
  const DensityCurve mpCurve = solve_gram_density(
      mpConfig.profile, mpGrid, 1e-5, {}, false, false, SweepStrategy::MarchAcrossEnergies);
  const CdfComparison mpCdf = empirical_vs_selfconsistent(mpConfig, mpCurve, 0.05);

  // figure-style block profile at the default half/half fractions
  BlockSpec spec;
  spec.values = figure_blocks();
  spec.rowFractions = Vec::Constant(2, 0.5);
  spec.colFractions = Vec::Constant(2, 0.5);
  SampleConfig figConfig;
  figConfig.profile = build_block_profile(spec, 500, 500);
  figConfig.seed = 4242;
  figConfig.trials = 20;
  const double sigma = sigma_bound(figConfig.profile);
  const Vec figGrid = Vec::LinSpaced(320, 0.05, 1.05 * sigma);
  const DensityCurve figCurve = solve_gram_density(
      figConfig.profile, figGrid, 1e-5, {}, false, false, SweepStrategy::MarchAcrossEnergies);
  const CdfComparison figCdf = empirical_vs_selfconsistent(figConfig, figCurve, 0.05);

  const bool pass = mpCdf.ksDistance <= 0.02 && figCdf.ksDistance <= 0.04;
  report(9, pass,
         format("KS distance on [0.05, inf): constant profile %.4f (tol 0.02), figure "
                "profile %.4f (tol 0.04), p=n=500, 20 trials",
                mpCdf.ksDistance, figCdf.ksDistance));
}

void criterion_10_delta_rho_equivalence() {
  const std::vector<std::vector<std::pair<double, double>>> supports = {
      {},
      {{1.0, 2.0}},
      {{1.0, 2.0}, {3.0, 4.0}},
      {{0.5, 1.6}, {2.0, 2.9}, {5.0, 7.0}},
      {{0.2, 0.9}, {1.0, 1.8}, {2.2, 3.1}, {4.0, 6.5}},
  };
  long mismatches = 0, checked = 0;
  for (const auto& intervals : supports) {
    GapFunction gap;
    for (const auto& [lo, hi] : intervals) gap.support.intervals.push_back({lo, hi, false});
    double minHalf = 0.45;
    for (const auto& [lo, hi] : intervals) minHalf = std::min(minHalf, 0.5 * (hi - lo));
    for (double rho : {0.0, 0.2 * minHalf, 0.6 * minHalf, 0.95 * minHalf}) {
      gap.rho = rho;
      for (double e = -1.0; e <= 8.5; e += 0.003) {
        ++checked;
        if (delta_rho(gap, e) != oracles::delta_rho_reference(intervals, rho, e)) ++mismatches;
      }
    }
  }
  // kappa consistency against a direct transcription on the same grid
  const VarianceProfile profile = constant_profile(3, 3, 0.1);
  GramSolution sol;
  sol.m = CVec::Constant(3, Complex(0.0, 0.37));
  GapFunction gap;
  gap.support.intervals.push_back({1.0, 2.0, false});
  gap.support.intervals.push_back({3.0, 4.0, false});
  gap.rho = 0.25;
  for (double e = 0.0; e <= 5.0; e += 0.01) {
    sol.zeta = SpectralParameter(e, 1e-3);
    ++checked;
    const double direct =
        1.0 / (std::cbrt(oracles::delta_rho_reference({{1.0, 2.0}, {3.0, 4.0}}, 0.25, e)) + 0.37);
    if (std::abs(kappa(gap, profile, sol) - direct) > 1e-14) ++mismatches;
  }
  report(10, mismatches == 0,
         format("local gap size and kappa vs independent transcription: %ld mismatches "
                "over %ld evaluations",
                mismatches, checked));
}

}  // namespace

int main() {
  std::printf("acceptance suite: self-consistent Gram-matrix density library\n");
  criterion_1_marchenko_pastur();
  criterion_2_edge_exponent();
  criterion_3_cusp_scan();
  criterion_4_symmetry_identity();
  criterion_5_operator_properties();
  criterion_6_cubic_floor();
  criterion_7_linearization();
  criterion_8_local_law();
  criterion_9_empirical_cdf();
  criterion_10_delta_rho_equivalence();
  if (failures == 0)
    std::printf("all acceptance criteria passed\n");
  else
    std::printf("%d acceptance criteria FAILED\n", failures);
  return failures == 0 ? 0 : 1;
}
