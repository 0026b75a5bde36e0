#pragma once

#include <optional>
#include <vector>

#include "gramdos/profile.hpp"
#include "gramdos/types.hpp"

namespace gramdos {

struct SolverOptions {
  double tol = 1e-10;        // sup-norm residual target
  long maxIter = 100000;     // fixed-point iteration cap
  double etaFloor = 1e-6;    // smallest admissible Im z in ladders
  bool useNewton = true;     // enable the Newton accelerator
  double newtonThreshold = 1e-3;  // residual below which Newton engages
  int newtonMaxSteps = 40;
};

/// Solution of the quadratic vector equation -1/m = z + S m on the combined
/// index space, with componentwise positive imaginary part.
struct QveSolution {
  SpectralParameter z;
  CVec m;                 // length p+n
  double residual = 0.0;  // sup-norm of 1/m + z + S m
  long iterations = 0;
  bool converged = false;
};

/// Solution of the Dyson equation -1/m = zeta - S (1 + S^t m)^{-1} on the
/// row index space. m2 is the auxiliary sqrt(zeta) * (QVE solution on the
/// column space), which satisfies m2 = -(1 + S^t m)^{-1}.
struct GramSolution {
  SpectralParameter zeta;
  CVec m;   // length p
  CVec m2;  // length n
  double residual = 0.0;  // sup-norm residual of the Dyson equation
  long iterations = 0;
  bool converged = false;
};

/// Damped fixed-point iteration m <- (1-g) m + g (-1/(z + S m)) with adaptive
/// damping, optionally accelerated by Newton steps once the residual is small.
/// init, when given, must have length p+n and positive imaginary parts.
/// Throws std::domain_error for Im z <= 0. Non-convergence is reported through
/// converged=false with the best residual reached.
QveSolution solve_qve(const VarianceProfile& profile, SpectralParameter z,
                      const CVec* init = nullptr, const SolverOptions& opts = {});

/// Solves the QVE at z = sqrt(zeta) (principal branch into the upper
/// half-plane) and transforms back, verifying the Dyson equation directly.
GramSolution solve_gram(const VarianceProfile& profile, SpectralParameter zeta,
                        const SolverOptions& opts = {});

/// |z <e_-, m> + <e_->| : exact identity for exact solutions of the QVE.
double symmetry_residual(const VarianceProfile& profile, const QveSolution& qve);

struct RungRecord {
  double eta = 0.0;
  double residual = 0.0;
  long iterations = 0;
  bool converged = false;
};

struct SweepResult {
  std::vector<QveSolution> solutions;           // final-eta solution per energy
  std::vector<std::vector<RungRecord>> ladder;  // [energy][rung]
  int failures = 0;
};

/// For each energy solves at z = E + i eta down the ladder, warm-starting each
/// rung from the previous one. Per-energy failures are recorded and the sweep
/// continues. The ladder must be strictly decreasing with min >= opts.etaFloor.
SweepResult continuation_sweep(const VarianceProfile& profile, const Vec& energies,
                               const std::vector<double>& etaLadder,
                               const SolverOptions& opts = {});

/// sqrt into the closed upper half-plane: Im sqrt(zeta) >= 0, principal branch.
Complex upper_half_sqrt(Complex zeta);

}  // namespace gramdos
