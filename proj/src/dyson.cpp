#include "gramdos/dyson.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gramdos {

namespace {

double sup_norm(const CVec& v) { return v.cwiseAbs().maxCoeff(); }

CVec qve_residual_vec(const VarianceProfile& profile, Complex z, const CVec& m) {
  return (m.array().inverse() + z + apply_boldS(profile, m).array()).matrix();
}

bool im_positive(const CVec& m) { return (m.imag().array() > 0.0).all(); }

// One Newton step for G(m) = 1/m + z + S m = 0, eliminating the column-space
// block: with D_i = diag(1/m_i^2), solve
//   (S W2 D2^{-1} S^t W1 - D1) d1 = -G1 - S W2 D2^{-1} G2,
//   d2 = D2^{-1} (S^t W1 d1 + G2),
// where W_i are the measure weights entering the integral operators.
CVec newton_direction(const VarianceProfile& profile, const CVec& m, const CVec& g) {
  const Index p = profile.p, n = profile.n;
  const CVec m1 = m.head(p), m2 = m.tail(n);
  const CVec g1 = g.head(p), g2 = g.tail(n);

  const CVec d2inv = (m2.array().square()).matrix();  // 1/D2
  // columns of S scaled by w2 * m2^2, rows by w1
  CMat scaledSt = profile.s.transpose().cast<Complex>();
  scaledSt.array().colwise() *=
      (profile.weight2.cast<Complex>().array() * d2inv.array());  // n x p
  CMat schur = profile.s.cast<Complex>() * scaledSt *
               profile.weight1.cast<Complex>().asDiagonal();  // S W2 D2^{-1} S^t W1
  schur -= (m1.array().square().inverse()).matrix().asDiagonal();

  const CVec rhs = -g1 - profile.s.cast<Complex>() *
                             (profile.weight2.cast<Complex>().array() * d2inv.array() * g2.array())
                                 .matrix();
  const CVec d1 = schur.partialPivLu().solve(rhs);
  const CVec d2 =
      (d2inv.array() * (apply_St(profile, d1).array() + g2.array())).matrix();

  CVec d(p + n);
  d.head(p) = d1;
  d.tail(n) = d2;
  return d;
}

}  // namespace

Complex upper_half_sqrt(Complex zeta) {
  Complex root = std::sqrt(zeta);
  if (root.imag() < 0.0) root = -root;
  return root;
}

QveSolution solve_qve(const VarianceProfile& profile, SpectralParameter z, const CVec* init,
                      const SolverOptions& opts) {
  profile.validate();
  if (!z.valid()) throw std::domain_error("solve_qve: spectral parameter must satisfy Im z > 0");
  const Index N = profile.p + profile.n;
  const Complex zc = z.value();

  QveSolution sol;
  sol.z = z;

  // Degenerate kernel: the QVE reduces to m = -1/z exactly.
  if ((profile.s.array() == 0.0).all()) {
    sol.m = CVec::Constant(N, -1.0 / zc);
    sol.residual = 0.0;
    sol.converged = true;
    return sol;
  }

  CVec m;
  if (init != nullptr) {
    if (init->size() != N) throw std::invalid_argument("solve_qve: init length mismatch");
    m = *init;
    if (!im_positive(m)) m = CVec::Constant(N, Complex(0.0, std::min(1.0, 1.0 / z.im)));
  } else {
    m = CVec::Constant(N, Complex(0.0, std::min(1.0, 1.0 / z.im)));
  }

  double residual = sup_norm(qve_residual_vec(profile, zc, m));
  CVec best = m;
  double bestResidual = residual;
  double damping = 1.0;
  int okStreak = 0;
  long it = 0;
  long sinceNewton = 0;

  while (residual > opts.tol && it < opts.maxIter) {
    ++it;
    ++sinceNewton;

    // Newton accelerator: quadratic convergence once the iterate is close.
    if (opts.useNewton && residual < opts.newtonThreshold && sinceNewton >= 1) {
      bool newtonProgress = false;
      for (int ns = 0; ns < opts.newtonMaxSteps && residual > opts.tol; ++ns) {
        const CVec g = qve_residual_vec(profile, zc, m);
        const CVec dir = newton_direction(profile, m, g);
        double step = 1.0;
        bool accepted = false;
        while (step > 1e-8) {
          const CVec cand = m + step * dir;
          if (im_positive(cand)) {
            const double candRes = sup_norm(qve_residual_vec(profile, zc, cand));
            if (candRes < residual) {
              m = cand;
              residual = candRes;
              accepted = true;
              newtonProgress = true;
              break;
            }
          }
          step *= 0.5;
        }
        ++it;
        if (!accepted) break;
      }
      if (residual <= opts.tol) break;
      if (!newtonProgress) sinceNewton = -200;  // cool off, let fixed-point move first
      if (newtonProgress) continue;
    }

    const CVec phi = (-(zc + apply_boldS(profile, m).array()).inverse()).matrix();
    const CVec cand = m + damping * (phi - m);
    if (!im_positive(cand)) {
      // restart the step with stronger damping
      damping = std::max(damping / 2.0, 1e-3);
      okStreak = 0;
      continue;
    }
    const double candRes = sup_norm(qve_residual_vec(profile, zc, cand));
    // a residual increase only slows future steps; the move is kept (the
    // sup-norm residual is not monotone along the convergent iteration)
    if (candRes > residual) {
      damping = std::max(damping / 2.0, 1e-3);
      okStreak = 0;
    } else if (++okStreak >= 5) {
      damping = 1.0;
    }
    m = cand;
    residual = candRes;
    if (residual < bestResidual) {
      best = m;
      bestResidual = residual;
    }
  }

  if (residual < bestResidual) {
    best = m;
    bestResidual = residual;
  }
  sol.m = best;
  sol.residual = bestResidual;
  sol.iterations = it;
  sol.converged = bestResidual <= opts.tol;
  return sol;
}

GramSolution solve_gram(const VarianceProfile& profile, SpectralParameter zeta,
                        const SolverOptions& opts) {
  if (!zeta.valid())
    throw std::domain_error("solve_gram: spectral parameter must satisfy Im zeta > 0");
  const Complex z = upper_half_sqrt(zeta.value());
  const QveSolution qve = solve_qve(profile, SpectralParameter(z), nullptr, opts);

  GramSolution sol;
  sol.zeta = zeta;
  sol.m = qve.m.head(profile.p) / z;
  sol.m2 = qve.m.tail(profile.n) * z;
  sol.iterations = qve.iterations;
  sol.converged = qve.converged;

  // Direct residual of the Dyson equation -1/m = zeta - S (1 + S^t m)^{-1}.
  const CVec denom = (CVec::Ones(profile.n) + apply_St(profile, sol.m));
  const CVec rhs = apply_S(profile, denom.array().inverse().matrix());
  sol.residual =
      sup_norm((sol.m.array().inverse() + zeta.value() - rhs.array()).matrix());
  return sol;
}

double symmetry_residual(const VarianceProfile& profile, const QveSolution& qve) {
  const Vec e = chiral_sign(profile);
  const Complex lhs = qve.z.value() * inner_combined(profile, e.cast<Complex>().eval(), qve.m);
  const double eAvg = avg_combined(profile, e);
  return std::abs(lhs + eAvg);
}

SweepResult continuation_sweep(const VarianceProfile& profile, const Vec& energies,
                               const std::vector<double>& etaLadder, const SolverOptions& opts) {
  if (etaLadder.empty()) throw std::invalid_argument("continuation_sweep: empty eta ladder");
  for (size_t i = 0; i + 1 < etaLadder.size(); ++i)
    if (etaLadder[i + 1] >= etaLadder[i])
      throw std::invalid_argument("continuation_sweep: eta ladder must be strictly decreasing");
  if (etaLadder.back() < opts.etaFloor)
    throw std::invalid_argument("continuation_sweep: ladder goes below the eta floor");

  SweepResult result;
  result.solutions.reserve(static_cast<size_t>(energies.size()));
  result.ladder.resize(static_cast<size_t>(energies.size()));

  for (Index i = 0; i < energies.size(); ++i) {
    QveSolution current;
    const CVec* init = nullptr;
    for (size_t r = 0; r < etaLadder.size(); ++r) {
      current = solve_qve(profile, SpectralParameter(energies[i], etaLadder[r]), init, opts);
      result.ladder[static_cast<size_t>(i)].push_back(
          {etaLadder[r], current.residual, current.iterations, current.converged});
      init = &current.m;
      if (!current.converged) break;  // deeper rungs would start from garbage
    }
    if (!current.converged) ++result.failures;
    result.solutions.push_back(std::move(current));
  }
  return result;
}

}  // namespace gramdos
