#include "gramdos/density.hpp"

#include <cmath>

#include "doctest.h"
#include "oracles.hpp"

using namespace gramdos;

TEST_CASE("stieltjes inversion reproduces the ratio-1 density") {
  const Index n = 50;
  const VarianceProfile constant = constant_profile(n, n, 1.0 / n);
  const Vec energies = (Vec(3) << 1.0, 2.0, 5.0).finished();
  const DensityCurve curve = solve_gram_density(constant, energies, 1e-6);

  CHECK(curve.avgDensity[0] ==
        doctest::Approx(oracles::marchenko_pastur_density(1.0)).epsilon(1e-4));
  CHECK(curve.avgDensity[1] ==
        doctest::Approx(oracles::marchenko_pastur_density(2.0)).epsilon(1e-4));
  CHECK(curve.avgDensity[1] == doctest::Approx(1.0 / (2.0 * std::numbers::pi)).epsilon(1e-4));
  // off-support: O(eta)
  CHECK(curve.avgDensity[2] <= 1e-4);
}

TEST_CASE("stieltjes_invert on explicit solution lists") {
  const Index n = 16;
  const VarianceProfile constant = constant_profile(n, n, 1.0 / n);
  std::vector<QveSolution> sols;
  for (double tau : {0.8, 1.0, 1.2})
    sols.push_back(solve_qve(constant, SpectralParameter(tau, 1e-3)));
  const DensityCurve curve = stieltjes_invert(constant, sols, true);
  CHECK(curve.kind == CurveKind::Qve);
  CHECK(curve.size() == 3);
  CHECK(curve.perComponent.rows() == 2 * n);
  for (Index i = 0; i < 3; ++i) {
    const Complex expected = oracles::semicircle_m(sols[static_cast<size_t>(i)].z.value());
    CHECK(curve.avgDensity[i] ==
          doctest::Approx(expected.imag() / std::numbers::pi).epsilon(1e-6));
  }

  // mixed eta rejected
  sols.push_back(solve_qve(constant, SpectralParameter(1.4, 1e-2)));
  CHECK_THROWS_AS(stieltjes_invert(constant, sols), std::invalid_argument);
}

TEST_CASE("richardson extrapolation removes the smoothing error") {
  const Index n = 30;
  const VarianceProfile constant = constant_profile(n, n, 1.0 / n);
  const Vec energies = Vec::Constant(1, 3.2);
  const DensityCurve plain = solve_gram_density(constant, energies, 1e-2, {}, false, false);
  const DensityCurve extrapolated = solve_gram_density(constant, energies, 1e-2, {}, false, true);
  const double exact = oracles::marchenko_pastur_density(3.2);
  CHECK(std::abs(extrapolated.avgDensity[0] - exact) <
        std::abs(plain.avgDensity[0] - exact));
}

TEST_CASE("richardson_extrapolate validates inputs") {
  DensityCurve a, b;
  a.energies = b.energies = Vec::LinSpaced(4, 1.0, 2.0);
  a.avgDensity = Vec::Ones(4);
  b.avgDensity = Vec::Ones(4);
  a.etaUsed = 1e-3;
  b.etaUsed = 2e-3;
  CHECK_THROWS_AS(richardson_extrapolate(a, b), std::invalid_argument);  // coarse < fine
  const DensityCurve ok = richardson_extrapolate(b, a);
  CHECK(ok.avgDensity.isApprox(Vec::Ones(4)));
}

TEST_CASE("qve_to_gram_density applies the square-root transform") {
  DensityCurve rho;
  rho.kind = CurveKind::Qve;
  rho.etaUsed = 1e-6;
  rho.energies = (Vec(2) << 1.0, 2.0).finished();
  rho.avgDensity = (Vec(2) << 0.3, 0.3).finished();
  const DensityCurve nu = qve_to_gram_density(rho);
  CHECK(nu.energies[0] == doctest::Approx(1.0));
  CHECK(nu.energies[1] == doctest::Approx(4.0));
  CHECK(nu.avgDensity[0] == doctest::Approx(0.3));
  CHECK(nu.avgDensity[1] == doctest::Approx(0.15));

  DensityCurve empty;
  empty.kind = CurveKind::Qve;
  CHECK(qve_to_gram_density(empty).size() == 0);

  DensityCurve bad = rho;
  bad.energies[0] = -1.0;
  CHECK_THROWS_AS(qve_to_gram_density(bad), std::invalid_argument);
}

TEST_CASE("transform of the semicircle matches the ratio-1 law") {
  const Index n = 40;
  const VarianceProfile constant = constant_profile(n, n, 1.0 / n);
  const Vec taus = (Vec(2) << 1.0, std::sqrt(2.0)).finished();
  const DensityCurve rho = solve_qve_density(constant, taus, 1e-6);
  const DensityCurve nu = qve_to_gram_density(rho);
  CHECK(nu.energies[1] == doctest::Approx(2.0));
  CHECK(nu.avgDensity[1] ==
        doctest::Approx(oracles::marchenko_pastur_density(2.0)).epsilon(1e-4));
  CHECK(nu.avgDensity[0] ==
        doctest::Approx(oracles::marchenko_pastur_density(1.0)).epsilon(1e-4));
}

TEST_CASE("qve density is symmetric in tau") {
  const Index n = 14;
  const VarianceProfile constant = constant_profile(n, 2 * n, 0.5 / n);
  const Vec taus = (Vec(4) << -1.5, -0.7, 0.7, 1.5).finished();
  const DensityCurve rho = solve_qve_density(constant, taus, 1e-5);
  CHECK(rho.avgDensity[0] == doctest::Approx(rho.avgDensity[3]).epsilon(1e-7));
  CHECK(rho.avgDensity[1] == doctest::Approx(rho.avgDensity[2]).epsilon(1e-7));
}

TEST_CASE("detect_support") {
  SUBCASE("ratio-1 profile: one interval clipped at delta") {
    const Index n = 40;
    const VarianceProfile constant = constant_profile(n, n, 1.0 / n);
    const Vec energies = Vec::LinSpaced(160, 0.05, 5.0);
    const DensityCurve curve = solve_gram_density(constant, energies, 1e-6);
    const SupportSet support = detect_support(curve, 1e-3 * curve.avgDensity.maxCoeff(),
                                              0.05, 0.2);
    REQUIRE(support.intervals.size() == 1);
    CHECK(support.intervals[0].lo == doctest::Approx(0.05));
    CHECK(support.intervals[0].hi == doctest::Approx(4.0).epsilon(0.02));
    CHECK_FALSE(support.intervals[0].narrow);
  }

  SUBCASE("zero density: empty support") {
    DensityCurve curve;
    curve.energies = Vec::LinSpaced(50, 0.1, 2.0);
    curve.avgDensity = Vec::Zero(50);
    const SupportSet support = detect_support(curve, 1e-6, 0.05, 0.1);
    CHECK(support.intervals.empty());
  }

  SUBCASE("two synthetic bumps with a single-point dip merged") {
    DensityCurve curve;
    curve.energies = Vec::LinSpaced(100, 0.0, 10.0);
    curve.avgDensity = Vec::Zero(100);
    for (Index i = 10; i <= 30; ++i) curve.avgDensity[i] = 1.0;
    for (Index i = 60; i <= 80; ++i) curve.avgDensity[i] = 0.5;
    curve.avgDensity[20] = 0.0;  // single-point dip, must not split
    const SupportSet support = detect_support(curve, 0.1, 0.05, 0.3);
    REQUIRE(support.intervals.size() == 2);
    CHECK(support.intervals[0].lo == doctest::Approx(curve.energies[10]));
    CHECK(support.intervals[0].hi == doctest::Approx(curve.energies[30]));
    CHECK(support.intervals[1].lo == doctest::Approx(curve.energies[60]));
  }
}

TEST_CASE("mass decomposition") {
  SolverOptions opts;

  SUBCASE("ratio-1 profile carries full density mass") {
    const Index n = 40;
    const VarianceProfile constant = constant_profile(n, n, 1.0 / n);
    // log-spaced head resolves the 1/sqrt(E) blowup near zero
    const Index head = 60, tail = 240;
    Vec energies(head + tail);
    for (Index i = 0; i < head; ++i)
      energies[i] = 1e-4 * std::pow(0.3 / 1e-4, double(i) / head);
    energies.tail(tail) = Vec::LinSpaced(tail, 0.301, 4.3);
    const DensityCurve curve = solve_gram_density(constant, energies, 1e-6, opts, true);
    const MassReport report = mass_decomposition(constant, curve);
    // oracle: mass below the 1e-4 cutoff of the ratio-1 law
    double below = 0.0;
    for (int i = 0; i < 2000; ++i) {
      const double e = 1e-4 * (i + 0.5) / 2000;
      below += oracles::marchenko_pastur_density(e) * 1e-4 / 2000;
    }
    // the zero-mass estimate picks up exactly the unresolved below-cutoff mass
    CHECK(report.densityMass[0] == doctest::Approx(1.0 - below).epsilon(3e-3));
    CHECK(report.zeroMassEstimate[0] == doctest::Approx(below).epsilon(0.5));
  }

  SUBCASE("ratio-1/2 profile: no atom, clean total mass") {
    const Index n = 60, p = 30;
    const VarianceProfile constant = constant_profile(p, n, 1.0 / n);
    const Vec energies = Vec::LinSpaced(400, 0.02, 4.2);
    const DensityCurve curve = solve_gram_density(constant, energies, 1e-6, opts, true);
    const MassReport report = mass_decomposition(constant, curve);
    CHECK(report.densityMass[0] == doctest::Approx(1.0).epsilon(4e-3));
    CHECK(report.zeroMassEstimate[0] <= 4e-3);
  }

  SUBCASE("zero kernel: everything sits at zero") {
    const VarianceProfile zero = constant_profile(4, 4, 0.0);
    const Vec energies = Vec::LinSpaced(30, 0.05, 1.0);
    const DensityCurve curve = solve_gram_density(zero, energies, 1e-6, opts, true);
    const MassReport report = mass_decomposition(zero, curve);
    CHECK(report.densityMass.cwiseAbs().maxCoeff() <= 1e-4);  // eta tail only
    CHECK(report.zeroMassEstimate[0] == doctest::Approx(1.0).epsilon(1e-4));
  }

  SUBCASE("grid must cover [delta, Sigma]") {
    const VarianceProfile constant = constant_profile(8, 8, 1.0 / 8);
    const Vec energies = Vec::LinSpaced(10, 0.05, 1.0);  // Sigma = 4
    const DensityCurve curve = solve_gram_density(constant, energies, 1e-4, opts, true);
    CHECK_THROWS_AS(mass_decomposition(constant, curve), std::invalid_argument);
  }
}

TEST_CASE("component comparability on the bulk of the support") {
  BlockSpec spec;
  spec.values = (Mat(2, 2) << 6, 4, 4, 3).finished();
  spec.rowFractions = Vec::Constant(2, 0.5);
  spec.colFractions = Vec::Constant(2, 0.5);
  const VarianceProfile profile = build_block_profile(spec, 30, 30);
  const Vec energies = Vec::LinSpaced(40, 0.5, 8.0);
  const DensityCurve curve = solve_gram_density(profile, energies, 1e-6, {}, true);
  const double threshold = 1e-3 * curve.avgDensity.maxCoeff();
  for (Index i = 0; i < curve.size(); ++i) {
    if (curve.avgDensity[i] <= threshold) continue;
    const double mx = curve.perComponent.col(i).maxCoeff();
    const double mn = curve.perComponent.col(i).minCoeff();
    CHECK(mn > 0.0);
    CHECK(mx / mn <= 50.0);
  }
}

TEST_CASE("nonnegativity and Hoelder sanity of emitted densities") {
  const Index n = 25;
  const VarianceProfile constant = constant_profile(n, n, 1.0 / n);
  const Vec energies = Vec::LinSpaced(120, 0.2, 4.5);
  const DensityCurve curve = solve_gram_density(constant, energies, 1e-6);
  CHECK(curve.avgDensity.minCoeff() >= -1e-12);
  // discrete 1/3-Hoelder quotient stays bounded across refinement
  double quotient = 0.0;
  for (Index i = 1; i < curve.size(); ++i)
    quotient = std::max(quotient, std::abs(curve.avgDensity[i] - curve.avgDensity[i - 1]) /
                                      std::cbrt(energies[i] - energies[i - 1]));
  const Vec fine = Vec::LinSpaced(240, 0.2, 4.5);
  const DensityCurve fineCurve = solve_gram_density(constant, fine, 1e-6);
  double fineQuotient = 0.0;
  for (Index i = 1; i < fineCurve.size(); ++i)
    fineQuotient = std::max(fineQuotient,
                            std::abs(fineCurve.avgDensity[i] - fineCurve.avgDensity[i - 1]) /
                                std::cbrt(fine[i] - fine[i - 1]));
  CHECK(fineQuotient <= 2.0 * std::max(quotient, 1.0));
}
