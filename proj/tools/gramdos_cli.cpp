// Command-line entry point: profiles in, curves/reports/spectra out, one
// manifest per run. Exit codes: 0 ok, 2 validation error, 3 numerical failure.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include <nlohmann/json.hpp>
#include "CLI11.hpp"

#include "gramdos/density.hpp"
#include "gramdos/dyson.hpp"
#include "gramdos/io.hpp"
#include "gramdos/profile.hpp"
#include "gramdos/rmt_lab.hpp"
#include "gramdos/singularity.hpp"
#include "gramdos/stability.hpp"

using namespace gramdos;
using nlohmann::json;

namespace {

bool jsonLogs = false;

void log_event(const std::string& event, const json& detail = {}) {
  if (jsonLogs) {
    json j = detail;
    j["event"] = event;
    std::cerr << j.dump() << "\n";
  } else {
    std::cerr << "[gramdos] " << event;
    if (!detail.empty()) std::cerr << " " << detail.dump();
    std::cerr << "\n";
  }
}

struct CommonArgs {
  std::string profilePath;
  std::string outPath;
};

VarianceProfile load_profile(const std::string& path) {
  const KeyValueConfig config = load_config(path);
  return profile_from_config(config);
}

Manifest begin_manifest(const std::string& command, const VarianceProfile& profile) {
  Manifest manifest;
  manifest.command = command;
  manifest.profileHash = profile_hash(profile);
  manifest.startedAt = current_timestamp();
  return manifest;
}

void finish_manifest(Manifest& manifest, const std::string& primaryOutput) {
  manifest.finishedAt = current_timestamp();
  manifest.outputs.push_back(primaryOutput);
  write_manifest(manifest, primaryOutput);
}

std::vector<double> ladder_from_arg(const std::string& etaArg, double floorDefault) {
  if (etaArg.empty()) return geometric_ladder(floorDefault);
  const std::vector<double> values = parse_list(etaArg);
  if (values.size() == 1) return geometric_ladder(values[0]);
  return values;
}

int run_solve(const std::string& profilePath, const std::string& energiesArg,
              const std::string& etaArg, const std::string& outPath) {
  const VarianceProfile profile = load_profile(profilePath);
  const Vec energies = parse_grid(energiesArg);
  const std::vector<double> ladder = ladder_from_arg(etaArg, 1e-6);

  SolverOptions opts;
  opts.etaFloor = std::min(opts.etaFloor, ladder.back());
  Manifest manifest = begin_manifest("solve", profile);
  manifest.config = {{"profile", profilePath},
                     {"energies", energiesArg},
                     {"eta", etaArg.empty() ? "1e-06" : etaArg},
                     {"tol", std::to_string(opts.tol)},
                     {"max_iter", std::to_string(opts.maxIter)}};

  log_event("solve.start", {{"energies", energies.size()}, {"rungs", ladder.size()}});
  const SweepResult sweep = continuation_sweep(profile, energies, ladder, opts);
  if (sweep.failures > 0)
    log_event("solve.failures", {{"count", sweep.failures}});

  Vec e(energies.size()), eta(energies.size()), reAvg(energies.size()), imAvg(energies.size()),
      residual(energies.size()), iterations(energies.size());
  for (Index i = 0; i < energies.size(); ++i) {
    const QveSolution& sol = sweep.solutions[static_cast<size_t>(i)];
    e[i] = sol.z.re;
    eta[i] = sol.z.im;
    const Complex avg = avg_combined(profile, sol.m);
    reAvg[i] = avg.real();
    imAvg[i] = avg.imag();
    residual[i] = sol.residual;
    iterations[i] = static_cast<double>(sol.iterations);
  }
  write_csv(outPath, {"E", "eta", "re_avg_m", "im_avg_m", "residual", "iterations"},
            {e, eta, reAvg, imAvg, residual, iterations});
  finish_manifest(manifest, outPath);
  return sweep.failures == 0 ? 0 : 3;
}

int run_density(const std::string& profilePath, const std::string& energiesArg,
                double etaFloor, bool richardson, const std::string& outPath) {
  const VarianceProfile profile = load_profile(profilePath);
  const Vec energies = parse_grid(energiesArg);

  Manifest manifest = begin_manifest("density", profile);
  manifest.config = {{"profile", profilePath},
                     {"energies", energiesArg},
                     {"eta_floor", std::to_string(etaFloor)},
                     {"richardson", richardson ? "true" : "false"},
                     {"support_threshold", "1e-3 * max density"}};

  log_event("density.start", {{"energies", energies.size()}});
  const DensityCurve curve =
      solve_gram_density(profile, energies, etaFloor, {}, true, richardson);

  Vec minComp(curve.size()), maxComp(curve.size());
  for (Index i = 0; i < curve.size(); ++i) {
    minComp[i] = curve.perComponent.col(i).minCoeff();
    maxComp[i] = curve.perComponent.col(i).maxCoeff();
  }
  write_csv(outPath, {"E", "avg_density", "min_component", "max_component"},
            {curve.energies, curve.avgDensity, minComp, maxComp});

  const double threshold = 1e-3 * curve.avgDensity.maxCoeff();
  const double delta = std::max(curve.energies[0], 1e-12);
  const SupportSet support = detect_support(curve, threshold, delta, 0.0);
  std::ofstream supportOut(outPath + ".support.txt");
  supportOut << "# support of the self-consistent density\n";
  supportOut << "threshold = " << threshold << "\n";
  supportOut << "delta_cutoff = " << delta << "\n";
  for (const auto& interval : support.intervals)
    supportOut << "interval " << interval.lo << " " << interval.hi
               << (interval.narrow ? "  # narrow" : "") << "\n";
  manifest.outputs.push_back(outPath + ".support.txt");
  finish_manifest(manifest, outPath);
  return 0;
}

int run_classify(const std::string& profilePath, double delta, double etaFloor,
                 double cuspGapTol, const std::string& outPath) {
  const VarianceProfile profile = load_profile(profilePath);
  const double sigma = sigma_bound(profile);

  Manifest manifest = begin_manifest("classify", profile);
  manifest.config = {{"profile", profilePath},
                     {"delta", std::to_string(delta)},
                     {"eta_floor", std::to_string(etaFloor)},
                     {"cusp_gap_tol", std::to_string(cuspGapTol)}};

  // coarse curve for support detection, then log patches toward each edge
  const Vec coarse = Vec::LinSpaced(240, delta, 1.05 * sigma + delta);
  log_event("classify.coarse", {{"energies", coarse.size()}});
  const DensityCurve coarseCurve = solve_gram_density(profile, coarse, etaFloor);
  const double threshold = 1e-3 * coarseCurve.avgDensity.maxCoeff();
  const SupportSet coarseSupport = detect_support(coarseCurve, threshold, delta, 0.0);

  std::vector<double> points(coarse.data(), coarse.data() + coarse.size());
  for (const auto& interval : coarseSupport.intervals) {
    for (int k = 0; k < 25; ++k) {
      const double lambda = 1e-4 * std::pow(0.15 / 1e-4, k / 24.0);
      points.push_back(interval.lo + lambda);
      points.push_back(interval.hi - lambda);
    }
  }
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());
  Vec refined(static_cast<Index>(points.size()));
  for (size_t i = 0; i < points.size(); ++i) refined[static_cast<Index>(i)] = points[i];

  log_event("classify.refined", {{"energies", refined.size()}});
  const DensityCurve curve = solve_gram_density(profile, refined, etaFloor);
  const SupportSet support = detect_support(curve, threshold, delta, 0.0);
  const SingularityReport report = classify_boundary(curve, support, cuspGapTol);

  json j;
  j["delta"] = delta;
  j["sigma_bound"] = sigma;
  j["threshold"] = threshold;
  j["support"] = json::array();
  for (const auto& interval : support.intervals)
    j["support"].push_back({{"lo", interval.lo}, {"hi", interval.hi},
                            {"narrow", interval.narrow}});
  j["boundary_points"] = json::array();
  for (const auto& point : report.boundaryPoints) {
    j["boundary_points"].push_back({{"E0", point.e0},
                                    {"kind", to_string(point.kind)},
                                    {"exponent", point.exponent},
                                    {"coefficient", point.coefficient},
                                    {"window", {point.windowLo, point.windowHi}},
                                    {"fit_residual", point.fitResidual},
                                    {"gap", point.gap},
                                    {"fit_ok", point.fitOk}});
  }
  std::ofstream out(outPath);
  out << j.dump(2) << "\n";
  finish_manifest(manifest, outPath);
  return 0;
}

int run_stability(const std::string& profilePath, const std::string& energiesArg, double eta,
                  const std::string& outPath) {
  const VarianceProfile profile = load_profile(profilePath);
  const Vec energies = parse_grid(energiesArg);

  Manifest manifest = begin_manifest("stability", profile);
  manifest.config = {{"profile", profilePath},
                     {"energies", energiesArg},
                     {"eta", std::to_string(eta)},
                     {"eps_star", "0.05"}};

  log_event("stability.start", {{"points", energies.size()}});
  Vec e(energies.size()), etaCol(energies.size()), normF(energies.size()),
      gapFFt(energies.size()), absBeta(energies.size()), psi(energies.size()),
      sigma(energies.size()), alpha(energies.size()), psiPlus(energies.size()),
      normBinv(energies.size()), imAvg(energies.size());
  const std::vector<double> ladder = geometric_ladder(eta);
  int failures = 0;
  for (Index i = 0; i < energies.size(); ++i) {
    QveSolution sol;
    const CVec* init = nullptr;
    for (double rung : ladder) {
      sol = solve_qve(profile, SpectralParameter(energies[i], rung), init, {});
      init = &sol.m;
      if (!sol.converged) break;
    }
    if (!sol.converged) {
      ++failures;
      log_event("stability.point_failed", {{"E", energies[i]}});
      e[i] = energies[i];
      etaCol[i] = eta;
      normF[i] = gapFFt[i] = absBeta[i] = psi[i] = sigma[i] = alpha[i] = psiPlus[i] =
          normBinv[i] = imAvg[i] = std::nan("");
      continue;
    }
    const StabilityReport report = stability_report(profile, sol);
    e[i] = energies[i];
    etaCol[i] = eta;
    normF[i] = report.normF;
    gapFFt[i] = report.gapFFt;
    absBeta[i] = std::abs(report.beta);
    psi[i] = report.psi;
    sigma[i] = report.sigma;
    alpha[i] = report.alpha;
    psiPlus[i] = report.psiPlusSigma2;
    normBinv[i] = report.normBinv;
    imAvg[i] = report.imAvg;
  }
  write_csv(outPath,
            {"E", "eta", "normF", "gapFFt", "abs_beta", "psi", "sigma", "alpha",
             "psi_plus_sigma2", "normBinv", "imAvg"},
            {e, etaCol, normF, gapFFt, absBeta, psi, sigma, alpha, psiPlus, normBinv, imAvg});
  finish_manifest(manifest, outPath);
  return failures == 0 ? 0 : 3;
}

int run_cusp_scan(const std::string& familyPath, const std::string& outPath) {
  const KeyValueConfig config = load_config(familyPath);
  const Mat values = config.getMatrix("block_values");
  const Index gridP = config.getLong("p");
  const Index gridN = config.getLong("n");
  const std::string paramKind = config.getOr("param", "mass_ratio");
  if (paramKind != "mass_ratio")
    throw std::invalid_argument("cusp-scan: only the 'mass_ratio' family parameter is supported");

  std::vector<double> gridValues = parse_list(config.get("grid"));
  if (config.getOr("grid_scale", "linear") == "log") {
    // reinterpret min:max:count geometrically
    const Vec lin = parse_grid(config.get("grid"));
    const double lo = lin[0], hi = lin[lin.size() - 1];
    gridValues.clear();
    for (Index i = 0; i < lin.size(); ++i)
      gridValues.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (lin.size() - 1)));
  }
  Vec grid(static_cast<Index>(gridValues.size()));
  for (size_t i = 0; i < gridValues.size(); ++i) grid[static_cast<Index>(i)] = gridValues[i];

  const ProfileFamily family = aspect_ratio_family(values, gridP, gridN);
  CuspScanOptions opts;
  if (config.has("coarse_grid")) opts.coarseGridSize = static_cast<int>(config.getLong("coarse_grid"));

  Manifest manifest = begin_manifest("cusp-scan", family.make(grid[0]));
  manifest.config = {{"family", familyPath},
                     {"param", paramKind},
                     {"grid", config.get("grid")},
                     {"coarse_grid", std::to_string(opts.coarseGridSize)},
                     {"fit_window", "[1e-3, 1e-2]"}};

  log_event("cusp-scan.start", {{"parameters", grid.size()}});
  const CuspScanResult result = cusp_scan(family, grid, opts);

  json j;
  j["found"] = result.found;
  j["parameter_name"] = family.parameterName;
  j["scan"] = json::array();
  for (const auto& point : result.scan)
    j["scan"].push_back({{"parameter", point.parameter},
                         {"functional", point.functional},
                         {"split", point.split},
                         {"gap", point.gap},
                         {"dip_density", point.dipDensity},
                         {"dip_energy", point.dipEnergy}});
  if (result.found) {
    j["parameter"] = result.parameter;
    j["cusp_energy"] = result.cuspEnergy;
    j["dip_density"] = result.dipDensity;
    j["exponent"] = result.fit.exponent;
    j["coefficient"] = result.fit.coefficient;
    j["fit_residual"] = result.fit.residual;
  }
  std::ofstream out(outPath);
  out << j.dump(2) << "\n";
  finish_manifest(manifest, outPath);
  return 0;
}

int run_sample(const std::string& profilePath, int trials, std::uint64_t seed,
               const std::string& distName, const std::string& outPrefix) {
  SampleConfig config;
  config.profile = load_profile(profilePath);
  config.trials = trials;
  config.seed = seed;
  if (distName == "real_gaussian")
    config.dist = EntryDistribution::RealGaussian;
  else if (distName == "complex_gaussian")
    config.dist = EntryDistribution::ComplexGaussian;
  else if (distName == "rademacher")
    config.dist = EntryDistribution::RademacherScaled;
  else
    throw std::invalid_argument("sample: unknown distribution '" + distName + "'");

  Manifest manifest = begin_manifest("sample", config.profile);
  manifest.seed = seed;
  manifest.config = {{"profile", profilePath},
                     {"trials", std::to_string(trials)},
                     {"seed", std::to_string(seed)},
                     {"dist", distName}};

  for (int trial = 0; trial < trials; ++trial) {
    const EmpiricalSpectrum spectrum =
        gram_eigenvalues(sample_matrix(config, trial), trial);
    const std::string path = outPrefix + "_trial" + std::to_string(trial) + ".csv";
    write_csv(path, {"eigenvalue"}, {spectrum.eigenvalues});
    manifest.outputs.push_back(path);
    log_event("sample.trial", {{"trial", trial}});
  }
  finish_manifest(manifest, outPrefix + "_trials.done");
  std::ofstream(outPrefix + "_trials.done") << trials << "\n";
  return 0;
}

int run_verify(const std::string& profilePath, int trials, std::uint64_t seed, double gamma,
               double delta, const std::string& zetaGridArg, const std::string& outPath) {
  SampleConfig config;
  config.profile = load_profile(profilePath);
  config.trials = trials;
  config.seed = seed;

  Manifest manifest = begin_manifest("verify", config.profile);
  manifest.seed = seed;
  manifest.config = {{"profile", profilePath},    {"trials", std::to_string(trials)},
                     {"seed", std::to_string(seed)}, {"gamma", std::to_string(gamma)},
                     {"delta", std::to_string(delta)}, {"zeta_grid", zetaGridArg},
                     {"epsilon", "0.1"},           {"prefactor", "10"}};

  const double p = static_cast<double>(config.profile.p);
  const double eta = std::pow(p, -1.0 + gamma);
  const Vec energies = parse_grid(zetaGridArg);
  std::vector<SpectralParameter> zetas;
  for (Index i = 0; i < energies.size(); ++i) zetas.emplace_back(energies[i], eta);

  // self-consistent support for the gap function
  const double sigma = sigma_bound(config.profile);
  const Vec curveGrid = Vec::LinSpaced(160, delta, 1.05 * sigma + delta);
  log_event("verify.density", {{"energies", curveGrid.size()}});
  const DensityCurve curve = solve_gram_density(config.profile, curveGrid, 1e-5);
  const SupportSet support =
      detect_support(curve, 1e-3 * curve.avgDensity.maxCoeff(), delta, 0.0);
  GapFunction gap;
  gap.support = support;
  double minHalf = 1e300;
  for (const auto& interval : support.intervals)
    minHalf = std::min(minHalf, 0.5 * (interval.hi - interval.lo));
  gap.rho = support.intervals.empty() ? 0.0 : 0.5 * minHalf;

  LocalLawOptions llOpts;
  llOpts.gamma = gamma;
  llOpts.delta = delta;
  std::vector<CVec> ws = {CVec::Ones(config.profile.p)};
  log_event("verify.local_law", {{"zetas", zetas.size()}, {"trials", trials}});
  const LocalLawReport report = local_law_check(config, zetas, gap, ws, {}, llOpts);
  const CdfComparison cdf = empirical_vs_selfconsistent(config, curve, delta);

  json j;
  j["trials"] = trials;
  j["eta"] = eta;
  j["rho"] = gap.rho;
  j["ks_distance"] = cdf.ksDistance;
  j["samples_used"] = cdf.samplesUsed;
  j["points"] = json::array();
  for (const auto& point : report.points) {
    j["points"].push_back({{"E", point.zeta.re},
                           {"eta", point.zeta.im},
                           {"kappa", point.kappaValue},
                           {"im_avg", point.imAvg},
                           {"bound_entry", point.boundEntry},
                           {"bound_avg", point.boundAvg},
                           {"bound_offdiag", point.boundOffdiag},
                           {"pass_fraction_avg", point.passFractionAvg},
                           {"pass_fraction_offdiag", point.passFractionOffdiag},
                           {"pass_fraction_entry", point.passFractionEntry},
                           {"max_entry_error", point.maxEntrywiseError.maxCoeff()},
                           {"max_offdiag_error", point.maxOffdiagError.maxCoeff()}});
  }
  std::ofstream out(outPath);
  out << j.dump(2) << "\n";
  finish_manifest(manifest, outPath);
  return 0;
}

int run_check_assumptions(const std::string& profilePath, int lmax,
                          const std::string& outPath) {
  const VarianceProfile profile = load_profile(profilePath);
  const AssumptionReport report = check_assumptions(profile, lmax);

  json j;
  j["mass_ratio"] = report.massRatio;
  j["irreducible"] = report.irreducible;
  j["L"] = report.L;
  j["kappa1"] = report.kappa1;
  j["kappa2"] = report.kappa2;
  j["psi1"] = report.psi1;
  j["psi2"] = report.psi2;
  j["piecewise_constant"] = report.piecewiseConstant;
  j["sigma_bound"] = sigma_bound(profile);

  std::cout << j.dump(2) << "\n";
  if (!outPath.empty()) {
    Manifest manifest = begin_manifest("check-assumptions", profile);
    manifest.config = {{"profile", profilePath}, {"lmax", std::to_string(lmax)}};
    std::ofstream out(outPath);
    out << j.dump(2) << "\n";
    finish_manifest(manifest, outPath);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* threads = std::getenv("GRAMDOS_THREADS"))
    Eigen::setNbThreads(std::max(1, std::atoi(threads)));

  CLI::App app{"Self-consistent density of states for random Gram matrices"};
  app.require_subcommand(1);
  app.add_flag("--json-logs", jsonLogs, "emit machine-readable progress on stderr");

  std::string profilePath, outPath, energiesArg, etaArg, familyPath, zetaGrid, distName;
  double etaFloor = 1e-6, delta = 0.05, cuspGapTol = 1e-2, eta = 1e-4, gamma = 0.4;
  int trials = 20, lmax = 64;
  std::uint64_t seed = 0;
  bool richardson = false;

  auto* solve = app.add_subcommand("solve", "sweep the vector equation over an energy grid");
  solve->add_option("--profile", profilePath)->required();
  solve->add_option("--energies", energiesArg, "min:max:count")->required();
  solve->add_option("--eta", etaArg, "ladder (comma list) or floor");
  solve->add_option("--out", outPath)->required();

  auto* density = app.add_subcommand("density", "self-consistent density on an energy grid");
  density->add_option("--profile", profilePath)->required();
  density->add_option("--energies", energiesArg, "min:max:count")->required();
  density->add_option("--eta-floor", etaFloor);
  density->add_flag("--richardson", richardson, "extrapolate toward eta = 0");
  density->add_option("--out", outPath)->required();

  auto* classify = app.add_subcommand("classify", "support and boundary-point classification");
  classify->add_option("--profile", profilePath)->required();
  classify->add_option("--delta", delta, "low-energy cutoff");
  classify->add_option("--eta-floor", etaFloor);
  classify->add_option("--cusp-gap-tol", cuspGapTol);
  classify->add_option("--out", outPath)->required();

  auto* stability = app.add_subcommand("stability", "stability diagnostics along a sweep");
  stability->add_option("--profile", profilePath)->required();
  stability->add_option("--energies", energiesArg, "min:max:count on the QVE side")->required();
  stability->add_option("--eta", eta);
  stability->add_option("--out", outPath)->required();

  auto* cuspScan = app.add_subcommand("cusp-scan", "scan a block family for gap closing");
  cuspScan->add_option("--family", familyPath)->required();
  cuspScan->add_option("--out", outPath)->required();

  auto* sample = app.add_subcommand("sample", "sample matrices and emit eigenvalue CSVs");
  sample->add_option("--profile", profilePath)->required();
  sample->add_option("--trials", trials);
  sample->add_option("--seed", seed);
  sample->add_option("--dist", distName)->default_str("complex_gaussian");
  sample->add_option("--out", outPath, "output prefix")->required();

  auto* verify = app.add_subcommand("verify", "Monte Carlo local-law verification");
  verify->add_option("--profile", profilePath)->required();
  verify->add_option("--trials", trials);
  verify->add_option("--seed", seed);
  verify->add_option("--gamma", gamma, "admissibility exponent: eta = p^(gamma-1)");
  verify->add_option("--delta", delta);
  verify->add_option("--zeta-grid", zetaGrid, "min:max:count of Re zeta")->required();
  verify->add_option("--out", outPath)->required();

  auto* checkAssumptions = app.add_subcommand("check-assumptions", "diagnose model assumptions");
  checkAssumptions->add_option("--profile", profilePath)->required();
  checkAssumptions->add_option("--lmax", lmax);
  checkAssumptions->add_option("--out", outPath);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (solve->parsed()) return run_solve(profilePath, energiesArg, etaArg, outPath);
    if (density->parsed())
      return run_density(profilePath, energiesArg, etaFloor, richardson, outPath);
    if (classify->parsed())
      return run_classify(profilePath, delta, etaFloor, cuspGapTol, outPath);
    if (stability->parsed()) return run_stability(profilePath, energiesArg, eta, outPath);
    if (cuspScan->parsed()) return run_cusp_scan(familyPath, outPath);
    if (sample->parsed()) {
      if (distName.empty()) distName = "complex_gaussian";
      return run_sample(profilePath, trials, seed, distName, outPath);
    }
    if (verify->parsed())
      return run_verify(profilePath, trials, seed, gamma, delta, zetaGrid, outPath);
    if (checkAssumptions->parsed()) return run_check_assumptions(profilePath, lmax, outPath);
  } catch (const std::invalid_argument& err) {
    log_event("error.validation", {{"what", err.what()}});
    return 2;
  } catch (const std::exception& err) {
    log_event("error.numerical", {{"what", err.what()}});
    return 3;
  }
  return 2;
}
