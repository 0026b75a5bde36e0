#include "gramdos/rmt_lab.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace gramdos {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t stream_key(std::uint64_t seed, std::uint64_t trial, std::uint64_t row) {
  return splitmix64(splitmix64(seed ^ 0x853c49e6748fea9bULL) ^
                    splitmix64(trial * 0x2545f4914f6cdd1dULL + row));
}

}  // namespace

CMat sample_matrix(const SampleConfig& config, int trialIndex) {
  const auto& profile = config.profile;
  profile.validate();
  CMat x(profile.p, profile.n);

  for (Index k = 0; k < profile.p; ++k) {
    std::mt19937_64 engine(stream_key(config.seed, static_cast<std::uint64_t>(trialIndex),
                                      static_cast<std::uint64_t>(k)));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::bernoulli_distribution coin(0.5);
    for (Index q = 0; q < profile.n; ++q) {
      const double sd = std::sqrt(profile.s(k, q));
      switch (config.dist) {
        case EntryDistribution::RealGaussian:
          x(k, q) = Complex(sd * gauss(engine), 0.0);
          break;
        case EntryDistribution::ComplexGaussian: {
          const double re = gauss(engine);
          const double im = gauss(engine);
          x(k, q) = Complex(sd * re / std::numbers::sqrt2, sd * im / std::numbers::sqrt2);
          break;
        }
        case EntryDistribution::RademacherScaled:
          x(k, q) = Complex(coin(engine) ? sd : -sd, 0.0);
          break;
      }
    }
  }
  return x;
}

EmpiricalSpectrum gram_eigenvalues(const CMat& x, int trial) {
  if (!x.allFinite()) throw std::invalid_argument("gram_eigenvalues: matrix must be finite");
  const CMat gram = x * x.adjoint();
  Eigen::SelfAdjointEigenSolver<CMat> es(gram, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw std::runtime_error("gram_eigenvalues: eigensolve failed");

  EmpiricalSpectrum spectrum;
  spectrum.eigenvalues = es.eigenvalues().cwiseMax(0.0);
  spectrum.p = x.rows();
  spectrum.n = x.cols();
  spectrum.trial = trial;
  return spectrum;
}

Vec linearization_squared_eigenvalues(const CMat& x) {
  const Index p = x.rows(), n = x.cols();
  CMat h = CMat::Zero(p + n, p + n);
  h.topRightCorner(p, n) = x;
  h.bottomLeftCorner(n, p) = x.adjoint();
  Eigen::SelfAdjointEigenSolver<CMat> es(h, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("linearization_squared_eigenvalues: eigensolve failed");
  Vec sq = es.eigenvalues().array().square();
  std::sort(sq.data(), sq.data() + sq.size());
  return sq;
}

CVec resolvent_diag(const CMat& x, SpectralParameter zeta) {
  if (!zeta.valid()) throw std::domain_error("resolvent_diag: Im zeta must be > 0");
  const Index p = x.rows();
  CMat shifted = x * x.adjoint();
  shifted.diagonal().array() -= zeta.value();
  return shifted.partialPivLu().solve(CMat::Identity(p, p)).diagonal();
}

ResolventFactory::ResolventFactory(const CMat& x) {
  Eigen::SelfAdjointEigenSolver<CMat> es(x * x.adjoint());
  if (es.info() != Eigen::Success) throw std::runtime_error("ResolventFactory: eigensolve failed");
  eigenvalues_ = es.eigenvalues();
  vectors_ = es.eigenvectors();
}

CMat ResolventFactory::resolvent(SpectralParameter zeta) const {
  if (!zeta.valid()) throw std::domain_error("ResolventFactory: Im zeta must be > 0");
  const CVec inv =
      (eigenvalues_.cast<Complex>().array() - zeta.value()).inverse().matrix();
  return vectors_ * inv.asDiagonal() * vectors_.adjoint();
}

LocalLawReport local_law_check(const SampleConfig& config,
                               const std::vector<SpectralParameter>& zetas,
                               const GapFunction& gap, const std::vector<CVec>& wVectors,
                               const SolverOptions& solver, const LocalLawOptions& opts) {
  const auto& profile = config.profile;
  const double p = static_cast<double>(profile.p);
  const double etaMin = std::pow(p, -1.0 + opts.gamma);

  for (const auto& zeta : zetas) {
    if (std::abs(zeta.value()) < opts.delta || zeta.im < etaMin)
      throw std::invalid_argument("local_law_check: zeta outside the admissible domain");
  }
  for (const auto& w : wVectors) {
    if (w.size() != profile.p || w.cwiseAbs().maxCoeff() > 1.0 + 1e-12)
      throw std::invalid_argument("local_law_check: w must have length p and sup-norm <= 1");
  }

  LocalLawReport report;
  report.trials = config.trials;
  report.points.resize(zetas.size());

  // deterministic model quantities per zeta
  std::vector<CVec> mVectors(zetas.size());
  for (size_t zi = 0; zi < zetas.size(); ++zi) {
    auto& point = report.points[zi];
    point.zeta = zetas[zi];
    const GramSolution sol = solve_gram(profile, zetas[zi], solver);
    if (!sol.converged)
      throw std::runtime_error("local_law_check: Dyson solve failed at a grid point");
    mVectors[zi] = sol.m;
    point.imAvg = (profile.weight1.array() * sol.m.imag().array()).sum() / profile.mass1();
    point.kappaValue = kappa(gap, profile, sol);

    const double eta = zetas[zi].im;
    const double slack = opts.prefactor * std::pow(p, opts.epsilon);
    const double fluct = std::sqrt(point.imAvg / (p * eta));
    const double avgTerm = std::min(1.0 / std::sqrt(p * eta), point.kappaValue / (p * eta));
    point.boundEntry = slack * (fluct + avgTerm);
    point.boundAvg = slack * avgTerm;
    point.boundOffdiag = slack * fluct;

    point.maxEntrywiseError.resize(config.trials);
    point.maxOffdiagError.resize(config.trials);
    point.avgError.resize(static_cast<Index>(wVectors.size()), config.trials);
  }

  for (int trial = 0; trial < config.trials; ++trial) {
    const CMat x = sample_matrix(config, trial);
    const ResolventFactory factory(x);
    for (size_t zi = 0; zi < zetas.size(); ++zi) {
      auto& point = report.points[zi];
      const CMat r = factory.resolvent(zetas[zi]);
      CMat diff = r;
      diff.diagonal() -= mVectors[zi];
      point.maxEntrywiseError[trial] = diff.cwiseAbs().maxCoeff();
      CMat off = r;
      off.diagonal().setZero();
      point.maxOffdiagError[trial] = off.cwiseAbs().maxCoeff();
      for (size_t wi = 0; wi < wVectors.size(); ++wi) {
        const Complex avg = (wVectors[wi].array() * diff.diagonal().array()).sum() /
                            static_cast<double>(profile.p);
        point.avgError(static_cast<Index>(wi), trial) = std::abs(avg);
      }
    }
  }

  for (auto& point : report.points) {
    const double trials = static_cast<double>(config.trials);
    point.passFractionEntry =
        (point.maxEntrywiseError.array() <= point.boundEntry).count() / trials;
    point.passFractionOffdiag =
        (point.maxOffdiagError.array() <= point.boundOffdiag).count() / trials;
    Index passes = 0;
    for (Index wi = 0; wi < point.avgError.rows(); ++wi)
      passes += (point.avgError.row(wi).array() <= point.boundAvg).count();
    point.passFractionAvg =
        static_cast<double>(passes) / (trials * static_cast<double>(point.avgError.rows()));
  }
  return report;
}

CdfComparison empirical_vs_selfconsistent(const SampleConfig& config, const DensityCurve& curve,
                                          double delta) {
  if (curve.kind != CurveKind::Gram)
    throw std::invalid_argument("empirical_vs_selfconsistent: expects a Gram curve");
  if (curve.size() < 2)
    throw std::invalid_argument("empirical_vs_selfconsistent: curve too small");

  // pooled eigenvalues above delta
  std::vector<double> pooled;
  for (int trial = 0; trial < config.trials; ++trial) {
    const EmpiricalSpectrum spectrum = gram_eigenvalues(sample_matrix(config, trial), trial);
    for (Index i = 0; i < spectrum.eigenvalues.size(); ++i)
      if (spectrum.eigenvalues[i] >= delta) pooled.push_back(spectrum.eigenvalues[i]);
  }
  if (pooled.empty())
    throw std::runtime_error("empirical_vs_selfconsistent: no eigenvalues above delta");
  std::sort(pooled.begin(), pooled.end());

  // cumulative trapezoid of the average density from delta on
  Vec cdf = Vec::Zero(curve.size());
  for (Index i = 1; i < curve.size(); ++i) {
    const double lo = curve.energies[i - 1], hi = curve.energies[i];
    double seg = 0.5 * (hi - lo) * (curve.avgDensity[i] + curve.avgDensity[i - 1]);
    if (hi <= delta) seg = 0.0;
    else if (lo < delta)
      seg *= (hi - delta) / (hi - lo);
    cdf[i] = cdf[i - 1] + seg;
  }
  const double total = cdf[curve.size() - 1];
  if (total <= 0.0)
    throw std::runtime_error("empirical_vs_selfconsistent: model density vanishes above delta");
  cdf /= total;

  auto modelCdf = [&](double e) {
    if (e <= std::max(delta, curve.energies[0])) return 0.0;
    if (e >= curve.energies[curve.size() - 1]) return 1.0;
    const double* begin = curve.energies.data();
    const double* it = std::upper_bound(begin, begin + curve.size(), e);
    const Index hi = it - begin;
    const double t = (e - curve.energies[hi - 1]) / (curve.energies[hi] - curve.energies[hi - 1]);
    return (1.0 - t) * cdf[hi - 1] + t * cdf[hi];
  };

  CdfComparison comparison;
  comparison.samplesUsed = static_cast<Index>(pooled.size());
  const double count = static_cast<double>(pooled.size());
  double ks = 0.0;
  for (size_t i = 0; i < pooled.size(); ++i) {
    const double model = modelCdf(pooled[i]);
    const double above = (static_cast<double>(i) + 1.0) / count;
    const double below = static_cast<double>(i) / count;
    ks = std::max({ks, std::abs(above - model), std::abs(below - model)});
  }
  comparison.ksDistance = ks;

  comparison.overlayEnergies = curve.energies;
  comparison.overlayModelCdf = cdf;
  comparison.overlayEmpirical.resize(curve.size());
  for (Index i = 0; i < curve.size(); ++i) {
    const auto it = std::upper_bound(pooled.begin(), pooled.end(), curve.energies[i]);
    comparison.overlayEmpirical[i] =
        static_cast<double>(it - pooled.begin()) / count;
  }
  return comparison;
}

}  // namespace gramdos
