#include "gramdos/singularity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gramdos {

namespace {

constexpr double kBigFunctional = std::numeric_limits<double>::max();

double local_spacing(const DensityCurve& curve, double e0) {
  const Index n = curve.size();
  if (n < 2) return 0.0;
  Index k = 0;
  double best = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < n; ++i) {
    const double d = std::abs(curve.energies[i] - e0);
    if (d < best) {
      best = d;
      k = i;
    }
  }
  if (k == 0) return curve.energies[1] - curve.energies[0];
  if (k == n - 1) return curve.energies[n - 1] - curve.energies[n - 2];
  return 0.5 * (curve.energies[k + 1] - curve.energies[k - 1]);
}

}  // namespace

std::string to_string(BoundaryKind kind) {
  switch (kind) {
    case BoundaryKind::EdgeLeft: return "EDGE_LEFT";
    case BoundaryKind::EdgeRight: return "EDGE_RIGHT";
    case BoundaryKind::Cusp: return "CUSP";
    case BoundaryKind::NearCusp: return "NEAR_CUSP";
  }
  return "UNKNOWN";
}

ExponentFit fit_exponent(const DensityCurve& curve, double e0, FitSide side, double wmin,
                         double wmax) {
  if (!(wmin > 0.0 && wmax > wmin)) throw std::invalid_argument("fit_exponent: bad window");
  std::vector<double> logLam, logNu;
  for (Index i = 0; i < curve.size(); ++i) {
    const double lambda = curve.energies[i] - e0;
    const double absLam = std::abs(lambda);
    if (absLam < wmin || absLam > wmax) continue;
    if (side == FitSide::Left && lambda >= 0.0) continue;
    if (side == FitSide::Right && lambda <= 0.0) continue;
    if (curve.avgDensity[i] <= 0.0) continue;
    logLam.push_back(std::log(absLam));
    logNu.push_back(std::log(curve.avgDensity[i]));
  }
  if (logLam.size() < 5)
    throw std::runtime_error("fit_exponent: fewer than 5 usable points in the window");

  const double n = static_cast<double>(logLam.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < logLam.size(); ++i) {
    sx += logLam[i];
    sy += logNu[i];
    sxx += logLam[i] * logLam[i];
    sxy += logLam[i] * logNu[i];
  }
  const double denom = n * sxx - sx * sx;
  if (denom <= 0.0) throw std::runtime_error("fit_exponent: degenerate abscissae");

  ExponentFit fit;
  fit.exponent = (n * sxy - sx * sy) / denom;
  const double intercept = (sy - fit.exponent * sx) / n;
  fit.coefficient = std::exp(intercept);
  double ss = 0.0;
  for (size_t i = 0; i < logLam.size(); ++i) {
    const double r = logNu[i] - fit.exponent * logLam[i] - intercept;
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / n);
  fit.pointsUsed = static_cast<int>(logLam.size());
  return fit;
}

namespace {

// Square-root edges make nu^2 locally linear; extrapolating it to zero pins
// the edge much better than the detection grid. Returns the refined edge,
// clamped to a small neighborhood of the detected one.
double refine_edge(const DensityCurve& curve, double e0, BoundaryKind kind) {
  const double inward = kind == BoundaryKind::EdgeLeft ? 1.0 : -1.0;
  std::vector<double> xs, ys;
  for (Index i = 0; i < curve.size(); ++i) {
    const double lambda = inward * (curve.energies[i] - e0);
    if (lambda < 0.0 || lambda > 0.03) continue;
    if (curve.avgDensity[i] <= 0.0) continue;
    xs.push_back(curve.energies[i]);
    ys.push_back(curve.avgDensity[i] * curve.avgDensity[i]);
  }
  if (xs.size() < 6) return e0;
  // drop the eta-rounded tip: keep the upper 70% of the nu^2 range
  const double yMax = *std::max_element(ys.begin(), ys.end());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int used = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    if (ys[i] < 0.05 * yMax) continue;
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
    ++used;
  }
  if (used < 4) return e0;
  const double denom = used * sxx - sx * sx;
  if (denom == 0.0) return e0;
  const double slope = (used * sxy - sx * sy) / denom;
  if (inward * slope <= 0.0) return e0;  // not edge-shaped
  const double intercept = (sy - slope * sx) / used;
  const double refined = -intercept / slope;
  if (std::abs(refined - e0) > 0.02) return e0;
  return refined;
}

BoundaryPoint make_edge(const DensityCurve& curve, double e0, BoundaryKind kind, double width) {
  BoundaryPoint point;
  point.e0 = refine_edge(curve, e0, kind);
  point.kind = kind;
  const double h = local_spacing(curve, e0);
  point.windowLo = 5.0 * h;
  point.windowHi = std::min(0.1, width / 4.0);
  if (point.windowHi > point.windowLo) {
    try {
      const FitSide side = kind == BoundaryKind::EdgeLeft ? FitSide::Right : FitSide::Left;
      const ExponentFit fit =
          fit_exponent(curve, point.e0, side, point.windowLo, point.windowHi);
      point.exponent = fit.exponent;
      point.coefficient = fit.coefficient;
      point.fitResidual = fit.residual;
      point.fitOk = true;
    } catch (const std::exception&) {
      point.fitOk = false;
    }
  }
  return point;
}

BoundaryPoint make_cusp(const DensityCurve& curve, double lo, double hi, double gap,
                        double touchTol) {
  BoundaryPoint point;
  point.kind = gap <= touchTol ? BoundaryKind::Cusp : BoundaryKind::NearCusp;
  point.gap = gap;

  // candidate sits at the density minimum between the components
  double e0 = 0.5 * (lo + hi);
  double best = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < curve.size(); ++i) {
    const double e = curve.energies[i];
    if (e < lo || e > hi) continue;
    if (curve.avgDensity[i] < best) {
      best = curve.avgDensity[i];
      e0 = e;
    }
  }
  point.e0 = e0;

  const double h = local_spacing(curve, e0);
  point.windowLo = std::max(5.0 * h, gap);
  point.windowHi = std::min(0.1, (hi - lo + 0.2) / 2.0);
  if (point.windowHi > point.windowLo) {
    try {
      const ExponentFit fit =
          fit_exponent(curve, e0, FitSide::Both, point.windowLo, point.windowHi);
      point.exponent = fit.exponent;
      point.coefficient = fit.coefficient;
      point.fitResidual = fit.residual;
      point.fitOk = true;
    } catch (const std::exception&) {
      point.fitOk = false;
    }
  }
  return point;
}

}  // namespace

SingularityReport classify_boundary(const DensityCurve& curve, const SupportSet& support,
                                    double cuspGapTol) {
  SingularityReport report;
  report.support = support;
  const auto& intervals = support.intervals;
  if (intervals.empty()) return report;

  for (size_t i = 0; i < intervals.size(); ++i) {
    const double width = intervals[i].hi - intervals[i].lo;

    // left boundary: either an extreme/normal edge or half of a cusp pair
    const bool cuspWithPrev =
        i > 0 && (intervals[i].lo - intervals[i - 1].hi) <= cuspGapTol;
    if (!cuspWithPrev)
      report.boundaryPoints.push_back(
          make_edge(curve, intervals[i].lo, BoundaryKind::EdgeLeft, width));

    // internal pair with the next component
    if (i + 1 < intervals.size()) {
      const double gap = intervals[i + 1].lo - intervals[i].hi;
      if (gap <= cuspGapTol) {
        const double touchTol = 2.0 * local_spacing(curve, intervals[i].hi);
        report.boundaryPoints.push_back(
            make_cusp(curve, intervals[i].hi, intervals[i + 1].lo, gap, touchTol));
      } else {
        report.boundaryPoints.push_back(
            make_edge(curve, intervals[i].hi, BoundaryKind::EdgeRight, width));
      }
    } else {
      report.boundaryPoints.push_back(
          make_edge(curve, intervals[i].hi, BoundaryKind::EdgeRight, width));
    }

    // interior cusp candidates: near-vanishing local minima strictly inside
    // the component (a touching cusp never splits the detected support)
    const double margin = 0.05 * width;
    double intervalMax = 0.0;
    for (Index k = 0; k < curve.size(); ++k)
      if (curve.energies[k] >= intervals[i].lo && curve.energies[k] <= intervals[i].hi)
        intervalMax = std::max(intervalMax, curve.avgDensity[k]);
    const double dipTol = std::max(2.0 * support.threshold, 0.02 * intervalMax);
    double bestDip = dipTol;
    double bestEnergy = 0.0;
    bool hasDip = false;
    for (Index k = 1; k + 1 < curve.size(); ++k) {
      const double e = curve.energies[k];
      if (e <= intervals[i].lo + margin || e >= intervals[i].hi - margin) continue;
      const double v = curve.avgDensity[k];
      if (v > curve.avgDensity[k - 1] || v > curve.avgDensity[k + 1]) continue;
      if (v <= bestDip) {
        bestDip = v;
        bestEnergy = e;
        hasDip = true;
      }
    }
    if (hasDip) {
      const double h = local_spacing(curve, bestEnergy);
      report.boundaryPoints.push_back(
          make_cusp(curve, bestEnergy - 3.0 * h, bestEnergy + 3.0 * h, 0.0, h));
    }
  }
  return report;
}

void GapFunction::validate() const {
  if (rho < 0.0) throw std::invalid_argument("GapFunction: rho must be nonnegative");
  double prevHi = -std::numeric_limits<double>::infinity();
  for (const auto& interval : support.intervals) {
    if (!(interval.lo < interval.hi) || interval.lo <= prevHi)
      throw std::invalid_argument("GapFunction: support intervals must be disjoint and sorted");
    prevHi = interval.hi;
    if (rho >= 0.5 * (interval.hi - interval.lo))
      throw std::invalid_argument("GapFunction: rho must stay below the smallest half-width");
  }
}

double delta_rho(const GapFunction& gap, double E) {
  gap.validate();
  const auto& intervals = gap.support.intervals;
  if (intervals.empty()) return 1.0;

  const size_t K = intervals.size();
  for (size_t i = 0; i + 1 < K; ++i) {
    const double beta = intervals[i].hi;
    const double alphaNext = intervals[i + 1].lo;
    if (beta - gap.rho <= E && E <= alphaNext + gap.rho) return alphaNext - beta;
  }
  if (E <= intervals.front().lo + gap.rho || E >= intervals.back().hi - gap.rho) return 1.0;
  return 0.0;
}

double kappa(const GapFunction& gap, const VarianceProfile& profile,
             const GramSolution& solution) {
  const double delta = delta_rho(gap, solution.zeta.re);
  const double imAvg =
      (profile.weight1.array() * solution.m.imag().array()).sum() / profile.mass1();
  const double denom = std::cbrt(delta) + imAvg;
  if (denom <= 0.0) return std::numeric_limits<double>::infinity();
  return 1.0 / denom;
}

ProfileFamily aspect_ratio_family(Mat blockValues, Index gridP, Index gridN) {
  ProfileFamily family;
  family.parameterName = "mass_ratio";
  family.make = [blockValues = std::move(blockValues), gridP, gridN](double ratio) {
    if (!(ratio > 0.0)) throw std::invalid_argument("aspect_ratio_family: ratio must be > 0");
    BlockSpec spec;
    spec.values = blockValues;
    spec.rowFractions = Vec::Constant(blockValues.rows(), 1.0 / blockValues.rows());
    spec.colFractions = Vec::Constant(blockValues.cols(), 1.0 / blockValues.cols());
    spec.normalization = BlockNormalization::Raw;
    VarianceProfile profile = build_block_profile(spec, gridP, gridN);
    // X1 carries total mass ratio * n, X2 mass n; values divided by the total
    // mass, the weighted analogue of the 1/(p+n) bound.
    profile.weight1.setConstant(ratio * static_cast<double>(gridN) / static_cast<double>(gridP));
    profile.s /= (1.0 + ratio) * static_cast<double>(gridN);
    return profile;
  };
  return family;
}

namespace {

struct DipProbe {
  bool split = false;
  double gap = 0.0;
  double dipDensity = std::numeric_limits<double>::infinity();
  double dipEnergy = 0.0;
  bool hasDip = false;
};

DipProbe probe_dip(const DensityCurve& curve, double relThreshold) {
  DipProbe probe;
  const double mx = curve.avgDensity.maxCoeff();
  if (mx <= 0.0) return probe;
  const double threshold = relThreshold * mx;

  SupportSet support = detect_support(curve, threshold, curve.energies[0], 0.0);
  if (support.intervals.size() >= 2) {
    probe.split = true;
    probe.gap = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i + 1 < support.intervals.size(); ++i) {
      const double lo = support.intervals[i].hi;
      const double hi = support.intervals[i + 1].lo;
      if (hi - lo < probe.gap) {
        probe.gap = hi - lo;
        probe.dipEnergy = 0.5 * (lo + hi);
      }
    }
    probe.hasDip = true;
    // density at the flagged gap midpoint
    probe.dipDensity = curve.interpolate(probe.dipEnergy);
    return probe;
  }

  // single component: deepest interior local minimum with a genuine rise on
  // both sides
  const Index n = curve.size();
  for (Index k = 2; k + 2 < n; ++k) {
    const double v = curve.avgDensity[k];
    if (v >= curve.avgDensity[k - 1] || v >= curve.avgDensity[k + 1]) continue;
    const double leftMax = curve.avgDensity.head(k).maxCoeff();
    const double rightMax = curve.avgDensity.tail(n - k - 1).maxCoeff();
    if (leftMax > 1.25 * v && rightMax > 1.25 * v && v < probe.dipDensity) {
      probe.dipDensity = v;
      probe.dipEnergy = curve.energies[k];
      probe.hasDip = true;
    }
  }
  return probe;
}

double golden_min_energy(const VarianceProfile& profile, double lo, double hi, double etaFloor,
                         const SolverOptions& solver, double tol) {
  auto nuAt = [&](double E) {
    const Vec single = Vec::Constant(1, E);
    const DensityCurve c = solve_gram_density(profile, single, etaFloor, solver);
    return c.avgDensity[0];
  };
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double c1 = b - gr * (b - a), d1 = a + gr * (b - a);
  double fc = nuAt(c1), fd = nuAt(d1);
  while (b - a > tol) {
    if (fc < fd) {
      b = d1;
      d1 = c1;
      fd = fc;
      c1 = b - gr * (b - a);
      fc = nuAt(c1);
    } else {
      a = c1;
      c1 = d1;
      fc = fd;
      d1 = a + gr * (b - a);
      fd = nuAt(d1);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

CuspScanResult cusp_scan(const ProfileFamily& family, const Vec& parameterGrid,
                         const CuspScanOptions& opts) {
  if (parameterGrid.size() < 2) throw std::invalid_argument("cusp_scan: need a parameter grid");
  CuspScanResult result;
  result.scan.reserve(static_cast<size_t>(parameterGrid.size()));

  std::vector<DipProbe> probes;
  for (Index i = 0; i < parameterGrid.size(); ++i) {
    const VarianceProfile profile = family.make(parameterGrid[i]);
    double emax = opts.energyMax > 0.0 ? opts.energyMax : 1.05 * sigma_bound(profile);
    if (opts.energyMax <= 0.0) {
      // quick pass to find the actual support extent, then re-grid: the
      // a-priori bound overshoots by a factor of a few
      const Vec wide = Vec::LinSpaced(40, opts.energyMin, emax);
      const DensityCurve sketch =
          solve_gram_density(profile, wide, 1e-3, opts.solver, false, false,
                             SweepStrategy::MarchAcrossEnergies);
      const double top = sketch.avgDensity.maxCoeff();
      for (Index k = wide.size() - 1; k >= 0; --k)
        if (sketch.avgDensity[k] > opts.relThreshold * top) {
          emax = std::min(emax, wide[k] + 2.0 * (wide[1] - wide[0]));
          break;
        }
      emax = std::max(emax, opts.energyMin + 1.0);
    }
    const Vec energies = Vec::LinSpaced(opts.coarseGridSize, opts.energyMin, emax);
    const DensityCurve curve =
        solve_gram_density(profile, energies, opts.coarseEtaFloor, opts.solver, false, false,
                           SweepStrategy::MarchAcrossEnergies);
    const DipProbe probe = probe_dip(curve, opts.relThreshold);
    probes.push_back(probe);

    CuspScanPoint point;
    point.parameter = parameterGrid[i];
    point.split = probe.split;
    point.gap = probe.split ? probe.gap : 0.0;
    point.dipDensity = probe.hasDip ? probe.dipDensity : 0.0;
    point.dipEnergy = probe.hasDip ? probe.dipEnergy : 0.0;
    point.functional =
        probe.split ? probe.gap : (probe.hasDip ? probe.dipDensity : kBigFunctional);
    result.scan.push_back(point);
  }

  // candidate bracket: adjacent parameters on opposite sides of the split
  // transition, smallest functional first
  Index bracketLo = -1;
  double bestJ = kBigFunctional;
  for (Index i = 0; i + 1 < parameterGrid.size(); ++i) {
    const bool flips = probes[static_cast<size_t>(i)].split !=
                       probes[static_cast<size_t>(i + 1)].split;
    if (!flips) continue;
    const double j = std::min(result.scan[static_cast<size_t>(i)].functional,
                              result.scan[static_cast<size_t>(i + 1)].functional);
    if (j < bestJ) {
      bestJ = j;
      bracketLo = i;
    }
  }
  if (bracketLo < 0) return result;  // no gap-closing transition across the grid

  double dipCenter = probes[static_cast<size_t>(bracketLo)].hasDip
                         ? probes[static_cast<size_t>(bracketLo)].dipEnergy
                         : probes[static_cast<size_t>(bracketLo + 1)].dipEnergy;

  // The coarse grid can misread a barely-resolved gap, and the cubic-root
  // shape is too sharp for any fixed grid, so every dip measurement locates
  // the minimum first on a local curve and then by golden section.
  auto fineDip = [&](double param) {
    const VarianceProfile profile = family.make(param);
    const Vec local = Vec::LinSpaced(60, dipCenter - 0.5, dipCenter + 0.5);
    const DensityCurve curve =
        solve_gram_density(profile, local, opts.refineEtaFloor, opts.solver, false, false,
                           SweepStrategy::MarchAcrossEnergies);
    Index argmin = 0;
    curve.avgDensity.minCoeff(&argmin);
    const double spacing = local[1] - local[0];
    dipCenter = golden_min_energy(profile, curve.energies[argmin] - 1.5 * spacing,
                                  curve.energies[argmin] + 1.5 * spacing,
                                  opts.refineEtaFloor, opts.solver, 1e-6);
    const Vec single = Vec::Constant(1, dipCenter);
    return solve_gram_density(profile, single, opts.refineEtaFloor, opts.solver)
        .avgDensity[0];
  };

  Index loIdx = bracketLo, hiIdx = bracketLo + 1;
  const bool splitAtLo = probes[static_cast<size_t>(bracketLo)].split;
  // orientation: gap side has the smaller fine minimum
  double fineLo = fineDip(parameterGrid[loIdx]);
  double fineHi = fineDip(parameterGrid[hiIdx]);
  const bool gapOnLow = splitAtLo ? true : fineLo < fineHi;
  Index gapIdx = gapOnLow ? loIdx : hiIdx;
  Index closedIdx = gapOnLow ? hiIdx : loIdx;
  double fineGapSide = gapOnLow ? fineLo : fineHi;
  double fineClosedSide = gapOnLow ? fineHi : fineLo;
  const Index step = closedIdx > gapIdx ? 1 : -1;
  // walk the closed end outward until it truly lies on the closed side
  while (fineClosedSide < opts.minDipLo && closedIdx + step >= 0 &&
         closedIdx + step < parameterGrid.size()) {
    closedIdx += step;
    fineClosedSide = fineDip(parameterGrid[closedIdx]);
  }
  while (fineGapSide > opts.minDipHi && gapIdx - step >= 0 &&
         gapIdx - step < parameterGrid.size()) {
    gapIdx -= step;
    fineGapSide = fineDip(parameterGrid[gapIdx]);
  }
  if (fineClosedSide < opts.minDipLo || fineGapSide > opts.minDipHi)
    return result;  // the transition is not bracketable on this grid

  double gapSide = parameterGrid[gapIdx];
  double closedSide = parameterGrid[closedIdx];
  double parameter = closedSide;
  double dipDensity = fineClosedSide;

  // bisect until the dip minimum enters the target band
  for (int it = 0; it < opts.refineSteps; ++it) {
    if (dipDensity >= opts.minDipLo && dipDensity <= opts.minDipHi) break;
    const double mid = 0.5 * (gapSide + closedSide);
    const double dmin = fineDip(mid);
    if (dmin < opts.minDipLo) {
      gapSide = mid;
    } else {
      closedSide = mid;
      parameter = mid;
      dipDensity = dmin;
      if (dmin <= opts.minDipHi) break;
    }
  }

  const VarianceProfile profile = family.make(parameter);
  const double e0 = dipCenter;  // golden-refined by the last fineDip call

  // log-spaced patch around the dip for the two-sided fit
  const int perSide = 20;
  std::vector<double> es;
  for (int k = 0; k < perSide; ++k) {
    const double lam = opts.fitWindowLo * 0.7 *
                       std::pow(opts.fitWindowHi * 1.4 / (opts.fitWindowLo * 0.7),
                                static_cast<double>(k) / (perSide - 1));
    es.push_back(e0 - lam);
    es.push_back(e0 + lam);
  }
  std::sort(es.begin(), es.end());
  Vec patch(static_cast<Index>(es.size()));
  for (size_t k = 0; k < es.size(); ++k) patch[static_cast<Index>(k)] = es[k];
  const DensityCurve patchCurve = solve_gram_density(profile, patch, opts.refineEtaFloor, opts.solver);

  result.found = true;
  result.parameter = parameter;
  result.cuspEnergy = e0;
  result.dipDensity = dipDensity;
  result.fit =
      fit_exponent(patchCurve, e0, FitSide::Both, opts.fitWindowLo, opts.fitWindowHi);

  // full classification on a refined global curve
  const double emax = opts.energyMax > 0.0 ? opts.energyMax : 1.05 * sigma_bound(profile);
  const Vec globalGrid = Vec::LinSpaced(2 * opts.coarseGridSize, opts.energyMin, emax);
  const DensityCurve globalCurve =
      solve_gram_density(profile, globalGrid, opts.refineEtaFloor, opts.solver);
  const double threshold = opts.relThreshold * globalCurve.avgDensity.maxCoeff();
  const SupportSet support = detect_support(globalCurve, threshold, opts.energyMin, 0.0);
  result.report = classify_boundary(globalCurve, support, opts.cuspGapTol);
  result.report.boundaryPoints.push_back([&] {
    BoundaryPoint cuspPoint;
    cuspPoint.e0 = e0;
    cuspPoint.kind = BoundaryKind::Cusp;
    cuspPoint.exponent = result.fit.exponent;
    cuspPoint.coefficient = result.fit.coefficient;
    cuspPoint.windowLo = opts.fitWindowLo;
    cuspPoint.windowHi = opts.fitWindowHi;
    cuspPoint.fitResidual = result.fit.residual;
    cuspPoint.gap = 0.0;
    cuspPoint.fitOk = true;
    return cuspPoint;
  }());
  return result;
}

}  // namespace gramdos
