#pragma once

// Solvers for the mean field equation: damped Newton-Krylov (optionally deflated),
// pseudo-arclength continuation in alpha, an independent axisymmetric Legendre solver,
// and the bifurcation scan of the trivial branch.

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mfe/mfe_core.hpp"

namespace mfe {

struct SolveOutcome {
  SphereField solution;
  double alpha = 0.0;
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  /// Deflated solves only: converged onto a known solution or diverged.
  bool exhausted = false;
  /// Dimension of the trivial-branch kernel at this alpha (modes with |1 - a k(k+1)/2| < 1e-8).
  int kernel_dimension = 0;
  /// Smallest |eigenvalue| of the low-degree Galerkin linearization at the solution.
  double smallest_singular_value = 0.0;
  Vec3 center_of_mass = Vec3::Zero();
  /// Largest per-degree coefficient norm over the top quarter of degrees, relative to
  /// max(1, ||u||_inf). Large values mean the grid does not resolve the solution.
  double spectral_tail = 0.0;
  /// spectral_tail < kResolvedTail.
  bool resolved = true;
};

inline constexpr double kResolvedTail = 1e-8;

/// Tail measure used for SolveOutcome::spectral_tail.
double spectral_tail(const SphereField& u);

/// Newton-Krylov solve from u0 (requires ||u0||_inf <= 50).
///
/// Each iteration solves J d = -F with GMRES preconditioned by the harmonic diagonal
/// (1 - alpha k(k+1)/2)^-1 (clamped away from zero), backtracks on ||F||_2 by halving
/// down to 2^-12 and renormalizes. When alpha sits on a bifurcation value and the
/// iterate is within 1e-8 of zero the kernel harmonics are projected out of the solve.
/// Non-convergence is reported in the outcome, not thrown.
SolveOutcome solve_newton(const SphereField& u0, const MfeParameters& params);

/// Newton with multiplicative deflation M(u) = prod_i (||u - u_i||^-2 + 1) of the known
/// solutions. The result is flagged `exhausted` when it diverges or lands within 1e-3
/// (sup-norm) of a known solution.
SolveOutcome deflated_solve(const SphereField& u0, const MfeParameters& params, std::span<const SphereField> known);

/// Random band-limited start: c_km ~ scale * N(0,1) / sqrt(2k+1) for 1 <= k <= max_degree,
/// zero mean, from mt19937_64 seeded with `seed`.
SphereField random_field(GridPtr grid, std::uint64_t seed, int max_degree = 8, double scale = 0.3);

/// Runs solve_newton from random_field(seed_i) for every seed on worker threads; results
/// are returned in seed order.
std::vector<SolveOutcome> multi_start(GridPtr grid, const MfeParameters& params, std::span<const std::uint64_t> seeds,
                                      int max_degree = 8, double scale = 0.3);

// --- continuation ----------------------------------------------------------------------

struct StepControl {
  double initial = 0.01;
  double max = 0.05;
  double min = 1e-5;
  double growth = 1.5;
  int max_points = 2000;
  /// Highest harmonic degree of the Galerkin matrix whose inertia is monitored.
  int monitor_degree = 8;
};

struct BranchEvent {
  enum class Kind { SingularCrossing, NearSingular, Fold };
  Kind kind = Kind::SingularCrossing;
  /// Bracketing alphas of the consecutive accepted points.
  double alpha_lo = 0.0;
  double alpha_hi = 0.0;
  /// Interpolated location of the zero of the eigenvalue closest to zero.
  double alpha_estimate = 0.0;
  double smallest_singular_value = 0.0;
};

std::string to_string(BranchEvent::Kind kind);

struct BranchPoint {
  SolveOutcome outcome;
  int negative_eigenvalues = 0;
};

struct SolutionBranch {
  int branch_id = 0;
  std::vector<BranchPoint> points;
  std::vector<BranchEvent> events;
  /// Why continuation stopped ("target reached", "step below minimum", "max points").
  std::string termination;
};

/// Pseudo-arclength continuation from a converged seed toward alpha_target.
SolutionBranch continue_branch(const SolveOutcome& seed, double alpha_target, const StepControl& control,
                               const MfeParameters& params, int branch_id = 0);

// --- axisymmetric oracle ---------------------------------------------------------------

/// Zonal solution u(t) = sum_k a_k P_k(cos t) of (alpha/2) Lap u + e^u - 1 = 0, solved by
/// Legendre-Galerkin Newton with a dense Jacobian.
struct AxisymmetricProfile {
  double alpha = 0.0;
  /// Coefficients of the classical (unnormalized) Legendre polynomials P_k.
  Eigen::VectorXd legendre;
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = false;

  double operator()(double cos_t) const;
  double derivative_theta(double cos_t, double sin_t) const;
  /// Spherical field u(x) = profile(x . axis), truncated to the grid bandlimit.
  SphereField lift(GridPtr grid, const Vec3& axis = Vec3::UnitZ()) const;
};

/// Solves from the initial Legendre coefficients (padded to `modes`, which must be >= 64).
AxisymmetricProfile axisymmetric_solve(double alpha, const Eigen::VectorXd& initial, int modes = 64,
                                       double tol = 1e-10, int max_iter = 100);

/// Pointwise residual of a profile, sup over `samples` colatitudes including both poles.
double axisymmetric_residual(const AxisymmetricProfile& profile, int samples = 401);

// --- bifurcation scan ------------------------------------------------------------------

struct SingularPoint {
  double alpha = 0.0;
  double smallest_singular_value = 0.0;
  int kernel_dimension = 0;
};

struct BifurcationScan {
  std::vector<double> alphas;
  std::vector<double> smallest_singular_values;
  std::vector<SingularPoint> zeros;
};

/// Smallest singular value of the linearization at u = 0 sampled at n equispaced alphas in
/// [alpha_lo, alpha_hi]. Zeros are located by inertia changes and refined by bisection.
BifurcationScan bifurcation_scan(double alpha_lo, double alpha_hi, int n, GridPtr grid);

}  // namespace mfe
