#include "mfe/solver.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <thread>

#include "mfe/errors.hpp"
#include "mfe/krylov.hpp"
#include "mfe/rotation.hpp"

namespace mfe {

namespace {

constexpr double kKernelThreshold = 1e-8;
constexpr double kPreconditionerFloor = 1e-2;
constexpr double kMinDamping = 1.0 / 4096.0;
constexpr int kMonitorDegree = 8;

Eigen::VectorXd inverse_diagonal(int L, double alpha) {
  Eigen::VectorXd d(harmonic_count(L));
  for (int k = 0; k <= L; ++k) {
    double v = 1.0 - 0.5 * alpha * k * (k + 1.0);
    if (std::abs(v) < kPreconditionerFloor) v = v < 0.0 ? -kPreconditionerFloor : kPreconditionerFloor;
    d.segment(harmonic_index(k, -k), 2 * k + 1).setConstant(1.0 / v);
  }
  return d;
}

std::vector<int> kernel_degrees(int L, double alpha) {
  std::vector<int> out;
  for (int k = 1; k <= L; ++k)
    if (std::abs(1.0 - 0.5 * alpha * k * (k + 1.0)) < kKernelThreshold) out.push_back(k);
  return out;
}

int kernel_dimension_of(int L, double alpha) {
  int dim = 0;
  for (int k : kernel_degrees(L, alpha)) dim += 2 * k + 1;
  return dim;
}

double grid_sup(const SphereGrid& grid, const Eigen::VectorXd& coeffs) {
  return grid.synthesize(coeffs).cwiseAbs().maxCoeff();
}

struct Spectrum {
  double smallest = 0.0;
  int negative = 0;
  double closest_signed = 0.0;
};

/// Number of independent infinitesimal rotations (a x x) . grad u; these span a kernel
/// of the linearization at every nontrivial solution.
/// Grid values of (e_i x x) . grad u for i = 1, 2, 3.
Eigen::MatrixXd rotation_generators(const SphereField& u) {
  const SphereGrid& grid = u.grid();
  const auto grad = grid.synthesize_gradient(u.coeffs());
  const Eigen::MatrixX3d& x = grid.nodes();
  Eigen::MatrixXd gens(grid.size(), 3);
  gens.col(0) = (x.col(1).array() * grad[2].array() - x.col(2).array() * grad[1].array()).matrix();
  gens.col(1) = (x.col(2).array() * grad[0].array() - x.col(0).array() * grad[2].array()).matrix();
  gens.col(2) = (x.col(0).array() * grad[1].array() - x.col(1).array() * grad[0].array()).matrix();
  return gens;
}

/// Orthonormal coefficient basis of the rotation orbit tangent at u (empty near constants).
Eigen::MatrixXd orbit_basis(const SphereField& u) {
  const SphereGrid& grid = u.grid();
  const Eigen::MatrixXd gens = rotation_generators(u);
  Eigen::MatrixXd c(grid.coefficient_count(), 3);
  for (int i = 0; i < 3; ++i) c.col(i) = grid.analyze(gens.col(i));
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(c, Eigen::ComputeThinU);
  const Eigen::VectorXd sv = svd.singularValues();
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > 1e-6 && sv[i] > 1e-4 * sv[0]) ++rank;
  return svd.matrixU().leftCols(rank);
}

int symmetry_mode_count(const SphereField& u) {
  const SphereGrid& grid = u.grid();
  const Eigen::MatrixXd gens = rotation_generators(u);
  const Eigen::VectorXd sw = grid.weights().cwiseSqrt();
  const Eigen::MatrixXd weighted = sw.asDiagonal() * gens;
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(weighted);
  const Eigen::VectorXd sv = svd.singularValues();
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > 1e-6 && sv[i] > 1e-4 * sv[0]) ++rank;
  return rank;
}

Spectrum low_mode_spectrum(const SphereField& u, double alpha, int degree) {
  const Linearization lin(u, alpha);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(lin.galerkin_matrix(degree), Eigen::EigenvaluesOnly);
  // Drop the eigenvalues belonging to rotational symmetry modes (the ones closest to 0).
  std::vector<double> values(eig.eigenvalues().data(), eig.eigenvalues().data() + eig.eigenvalues().size());
  std::sort(values.begin(), values.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
  const int drop = std::min<int>(symmetry_mode_count(u), static_cast<int>(values.size()));
  values.erase(values.begin(), values.begin() + drop);
  Spectrum s;
  s.smallest = std::numeric_limits<double>::infinity();
  for (const double v : values) {
    if (v < 0.0) ++s.negative;
    if (std::abs(v) < s.smallest) {
      s.smallest = std::abs(v);
      s.closest_signed = v;
    }
  }
  return s;
}

/// Multiplicative shifted deflation with exponent 2 and shift 1 in the L^2 norm.
class Deflation {
 public:
  explicit Deflation(std::span<const SphereField> known) : known_(known) {}

  double factor(const Eigen::VectorXd& c) const {
    double m = 1.0;
    for (const auto& k : known_) m *= 1.0 / (c - k.coeffs()).squaredNorm() + 1.0;
    return m;
  }

  /// (grad M . d) / M
  double log_derivative(const Eigen::VectorXd& c, const Eigen::VectorXd& d) const {
    double s = 0.0;
    for (const auto& k : known_) {
      const Eigen::VectorXd diff = c - k.coeffs();
      const double n2 = diff.squaredNorm();
      s += -2.0 * diff.dot(d) / (n2 * n2) / (1.0 / n2 + 1.0);
    }
    return s;
  }

  bool empty() const { return known_.empty(); }

 private:
  std::span<const SphereField> known_;
};

SolveOutcome finish(SphereField u, const MfeParameters& params, int iterations, bool converged) {
  SolveOutcome out{.solution = u};
  out.alpha = params.alpha;
  out.iterations = iterations;
  out.converged = converged;
  out.residual_norm = residual(u, params.alpha).sup_norm();
  out.kernel_dimension = kernel_dimension_of(u.bandlimit(), params.alpha);
  out.smallest_singular_value = low_mode_spectrum(u, params.alpha, kMonitorDegree).smallest;
  out.center_of_mass = center_of_mass(u);
  out.spectral_tail = spectral_tail(u);
  out.resolved = out.spectral_tail < kResolvedTail;
  return out;
}

SolveOutcome newton(const SphereField& u0, const MfeParameters& params, std::span<const SphereField> known) {
  params.validate();
  if (!(u0.sup_norm() <= 50.0)) throw ValidationError("initial guess sup-norm exceeds 50");
  const SphereGrid& grid = u0.grid();
  const int L = grid.bandlimit();
  const double alpha = params.alpha;
  const Eigen::VectorXd precond = inverse_diagonal(L, alpha);
  const std::vector<int> kernel = kernel_degrees(L, alpha);
  const Deflation deflation(known);

  auto project_kernel = [&](Eigen::VectorXd& v) {
    for (int k : kernel) v.segment(harmonic_index(k, -k), 2 * k + 1).setZero();
  };

  SphereField u = normalize(u0);
  double last_step = std::numeric_limits<double>::infinity();
  int iter = 0;
  bool converged = false;
  try {
    for (; iter <= params.max_iter; ++iter) {
      const Eigen::VectorXd f = residual_coefficients(u.coeffs(), alpha, grid);
      const double r_sup = grid_sup(grid, f);
      if (r_sup < params.newton_tol && last_step < params.step_tol) {
        converged = true;
        break;
      }
      if (iter == params.max_iter) break;

      const Linearization lin(u, alpha);
      const bool project = !kernel.empty() && u.sup_norm() < kKernelThreshold;
      Eigen::VectorXd rhs = -f;
      if (project) project_kernel(rhs);
      auto apply = [&](const Eigen::VectorXd& x) {
        Eigen::VectorXd y = lin.apply(x);
        if (project) project_kernel(y);
        return y;
      };
      auto prec = [&](const Eigen::VectorXd& x) {
        Eigen::VectorXd y = precond.cwiseProduct(x);
        if (project) project_kernel(y);
        return y;
      };
      Eigen::VectorXd delta = Eigen::VectorXd::Zero(f.size());
      gmres(apply, prec, rhs, delta, 1e-11, 1e-16);
      // Near a nontrivial root the rotation orbit directions are an exact kernel and GMRES
      // drifts along them on roundoff-level residuals.
      if (r_sup < 1e-6 && u.sup_norm() > 1e-3) {
        const Eigen::MatrixXd orbit = orbit_basis(u);
        delta -= orbit * (orbit.transpose() * delta);
      }

      if (!deflation.empty()) {
        const double denom = 1.0 - deflation.log_derivative(u.coeffs(), delta);
        if (std::abs(denom) > 1e-12) delta /= denom;
      }

      // Backtracking on the (deflated) residual 2-norm.
      const double merit0 = deflation.factor(u.coeffs()) * f.norm();
      double lambda = 1.0;
      SphereField trial = u;
      bool accepted = false;
      while (lambda >= kMinDamping) {
        const Eigen::VectorXd candidate = u.coeffs() + lambda * delta;
        if (grid_sup(grid, candidate) <= kMaxFieldMagnitude) {
          try {
            trial = normalize(SphereField(u.grid_ptr(), candidate));
            const double merit =
                deflation.factor(trial.coeffs()) * residual_coefficients(trial.coeffs(), alpha, grid).norm();
            if (merit < merit0 || merit0 == 0.0) {
              accepted = true;
              break;
            }
          } catch (const MagnitudeError&) {
            // overshoot; keep halving
          }
        }
        lambda *= 0.5;
      }
      if (!accepted) {
        // Below tolerance the merit is at roundoff level and cannot rank steps.
        const double fallback = r_sup < params.newton_tol ? 1.0 : kMinDamping;
        const Eigen::VectorXd candidate = u.coeffs() + fallback * delta;
        if (grid_sup(grid, candidate) > kMaxFieldMagnitude) break;
        trial = normalize(SphereField(u.grid_ptr(), candidate));
      }
      last_step = (trial - u).sup_norm();
      u = trial;
    }
  } catch (const MagnitudeError&) {
    converged = false;
  }
  return finish(u, params, iter, converged);
}

}  // namespace

double spectral_tail(const SphereField& u) {
  const int L = u.bandlimit();
  double tail = 0.0;
  for (int k = std::max(1, (3 * L) / 4); k <= L; ++k)
    tail = std::max(tail, u.coeffs().segment(harmonic_index(k, -k), 2 * k + 1).norm());
  return tail / std::max(1.0, u.sup_norm());
}

SolveOutcome solve_newton(const SphereField& u0, const MfeParameters& params) { return newton(u0, params, {}); }

SolveOutcome deflated_solve(const SphereField& u0, const MfeParameters& params, std::span<const SphereField> known) {
  SolveOutcome out = newton(u0, params, known);
  if (known.empty()) return out;
  if (!out.converged) {
    out.exhausted = true;
    return out;
  }
  for (const auto& k : known) {
    if ((out.solution - k).sup_norm() < 1e-3) {
      out.exhausted = true;
      break;
    }
  }
  return out;
}

SphereField random_field(GridPtr grid, std::uint64_t seed, int max_degree, double scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(grid->coefficient_count());
  const int K = std::min(max_degree, grid->bandlimit());
  for (int k = 1; k <= K; ++k)
    for (int m = -k; m <= k; ++m) c[harmonic_index(k, m)] = scale * normal(rng) / std::sqrt(2.0 * k + 1.0);
  return SphereField(std::move(grid), std::move(c));
}

std::vector<SolveOutcome> multi_start(GridPtr grid, const MfeParameters& params, std::span<const std::uint64_t> seeds,
                                      int max_degree, double scale) {
  std::vector<std::optional<SolveOutcome>> slots(seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      slots[i] = solve_newton(random_field(grid, seeds[i], max_degree, scale), params);
    }
  };
  const unsigned n_workers = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(), seeds.size()));
  std::vector<std::jthread> pool;
  for (unsigned w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  pool.clear();
  std::vector<SolveOutcome> out;
  out.reserve(seeds.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

// --- continuation ----------------------------------------------------------------------

std::string to_string(BranchEvent::Kind kind) {
  switch (kind) {
    case BranchEvent::Kind::SingularCrossing:
      return "singular_crossing";
    case BranchEvent::Kind::NearSingular:
      return "near_singular";
    case BranchEvent::Kind::Fold:
      return "fold";
  }
  return "unknown";
}

namespace {

struct Corrected {
  Eigen::VectorXd coeffs;
  double alpha = 0.0;
  int iterations = 0;
  bool ok = false;
};

Corrected arclength_corrector(const GridPtr& grid_ptr, const Eigen::VectorXd& c0, double a0,
                              const Eigen::VectorXd& tc, double ta, double ds, const MfeParameters& params) {
  const SphereGrid& grid = *grid_ptr;
  Corrected out{c0 + ds * tc, a0 + ds * ta};
  const Eigen::Index n = c0.size();
  for (int it = 0; it < 12; ++it) {
    const Eigen::VectorXd f = residual_coefficients(out.coeffs, out.alpha, grid);
    const double g = tc.dot(out.coeffs - c0) + ta * (out.alpha - a0) - ds;
    if (grid_sup(grid, f) < params.newton_tol && std::abs(g) < 1e-12) {
      out.ok = true;
      out.iterations = it;
      return out;
    }
    const SphereField u(grid_ptr, out.coeffs);
    const Linearization lin(u, out.alpha);
    const Eigen::VectorXd f_alpha = 0.5 * laplace_beltrami(out.coeffs);
    const Eigen::VectorXd dinv = inverse_diagonal(grid.bandlimit(), out.alpha);
    auto apply = [&](const Eigen::VectorXd& x) {
      Eigen::VectorXd y(n + 1);
      y.head(n) = lin.apply(x.head(n)) + f_alpha * x[n];
      y[n] = tc.dot(x.head(n)) + ta * x[n];
      return y;
    };
    auto prec = [&](const Eigen::VectorXd& x) {
      Eigen::VectorXd y(n + 1);
      y.head(n) = dinv.cwiseProduct(x.head(n));
      y[n] = x[n];
      return y;
    };
    Eigen::VectorXd rhs(n + 1);
    rhs.head(n) = -f;
    rhs[n] = -g;
    Eigen::VectorXd d = Eigen::VectorXd::Zero(n + 1);
    gmres(apply, prec, rhs, d, 1e-11, 1e-3 * params.newton_tol);
    out.coeffs += d.head(n);
    out.alpha += d[n];
    if (!std::isfinite(out.alpha) || !(grid_sup(grid, out.coeffs) < 50.0)) return out;
  }
  return out;
}

}  // namespace

SolutionBranch continue_branch(const SolveOutcome& seed, double alpha_target, const StepControl& control,
                               const MfeParameters& params, int branch_id) {
  if (!seed.converged) throw ValidationError("continuation seed is not converged");
  if (!(control.min > 0.0 && control.initial >= control.min && control.max >= control.initial)) {
    throw ValidationError("step control requires 0 < min <= initial <= max");
  }
  SolutionBranch branch;
  branch.branch_id = branch_id;
  const GridPtr grid = seed.solution.grid_ptr();
  const Eigen::Index n = seed.solution.coeffs().size();

  auto make_point = [&](const SphereField& u, double alpha) {
    MfeParameters p = params;
    p.alpha = alpha;
    return BranchPoint{finish(u, p, 0, true), low_mode_spectrum(u, alpha, control.monitor_degree).negative};
  };

  BranchPoint first = make_point(seed.solution, seed.alpha);
  first.outcome.iterations = seed.iterations;
  branch.points.push_back(first);

  const double direction = alpha_target > seed.alpha ? 1.0 : (alpha_target < seed.alpha ? -1.0 : 0.0);
  if (direction == 0.0) {
    branch.termination = "target reached";
    return branch;
  }

  Eigen::VectorXd c = seed.solution.coeffs();
  double a = seed.alpha;
  // Initial tangent from J tc = -F_alpha.
  Eigen::VectorXd tc = Eigen::VectorXd::Zero(n);
  {
    const Linearization lin(seed.solution, a);
    const Eigen::VectorXd f_alpha = 0.5 * laplace_beltrami(c);
    const Eigen::VectorXd dinv = inverse_diagonal(grid->bandlimit(), a);
    gmres([&](const Eigen::VectorXd& x) { return lin.apply(x); },
          [&](const Eigen::VectorXd& x) { return Eigen::VectorXd(dinv.cwiseProduct(x)); }, Eigen::VectorXd(-f_alpha),
          tc, 1e-11, 1e-18);
  }
  double ta = 1.0;
  {
    const double norm = std::sqrt(tc.squaredNorm() + 1.0);
    tc *= direction / norm;
    ta = direction / norm;
  }

  double ds = control.initial;
  auto previous_spectrum = low_mode_spectrum(seed.solution, a, control.monitor_degree);
  while (static_cast<int>(branch.points.size()) < control.max_points) {
    if (std::abs(a - alpha_target) < 1e-12) {
      branch.termination = "target reached";
      return branch;
    }
    bool landing = false;
    double step = ds;
    if (ta * direction > 0.0 && (a + step * ta - alpha_target) * direction >= 0.0) {
      step = (alpha_target - a) / ta;
      landing = true;
    }

    Eigen::VectorXd c_new;
    double a_new = 0.0;
    int corrector_iterations = 0;
    bool ok = false;
    if (landing) {
      MfeParameters p = params;
      p.alpha = alpha_target;
      const SphereField predicted(grid, c + step * tc);
      if (predicted.sup_norm() <= 50.0) {
        const SolveOutcome landed = solve_newton(predicted, p);
        ok = landed.converged;
        c_new = landed.solution.coeffs();
        a_new = alpha_target;
        corrector_iterations = landed.iterations;
      }
    } else {
      const Corrected corr = arclength_corrector(grid, c, a, tc, ta, step, params);
      ok = corr.ok;
      c_new = corr.coeffs;
      a_new = corr.alpha;
      corrector_iterations = corr.iterations;
    }
    if (!ok) {
      ds *= 0.5;
      if (ds < control.min) {
        branch.termination = "step below minimum";
        return branch;
      }
      continue;
    }

    const SphereField u_new = normalize(SphereField(grid, c_new));
    BranchPoint point = make_point(u_new, a_new);
    const auto spectrum = low_mode_spectrum(u_new, a_new, control.monitor_degree);

    Eigen::VectorXd tc_new = u_new.coeffs() - c;
    double ta_new = a_new - a;
    const double norm = std::sqrt(tc_new.squaredNorm() + ta_new * ta_new);
    tc_new /= norm;
    ta_new /= norm;

    if ((spectrum.negative - previous_spectrum.negative) % 2 != 0) {
      BranchEvent ev;
      ev.kind = BranchEvent::Kind::SingularCrossing;
      ev.alpha_lo = std::min(a, a_new);
      ev.alpha_hi = std::max(a, a_new);
      const double s0 = previous_spectrum.closest_signed;
      const double s1 = spectrum.closest_signed;
      ev.alpha_estimate = (s0 != s1) ? a + (a_new - a) * s0 / (s0 - s1) : 0.5 * (a + a_new);
      ev.smallest_singular_value = std::min(previous_spectrum.smallest, spectrum.smallest);
      branch.events.push_back(ev);
    } else if (spectrum.smallest < kKernelThreshold) {
      BranchEvent ev;
      ev.kind = BranchEvent::Kind::NearSingular;
      ev.alpha_lo = ev.alpha_hi = ev.alpha_estimate = a_new;
      ev.smallest_singular_value = spectrum.smallest;
      branch.events.push_back(ev);
    }
    if (ta_new * ta < 0.0) {
      BranchEvent ev;
      ev.kind = BranchEvent::Kind::Fold;
      ev.alpha_lo = std::min(a, a_new);
      ev.alpha_hi = std::max(a, a_new);
      ev.alpha_estimate = a_new;
      ev.smallest_singular_value = spectrum.smallest;
      branch.events.push_back(ev);
    }

    branch.points.push_back(std::move(point));
    previous_spectrum = spectrum;
    c = u_new.coeffs();
    a = a_new;
    tc = tc_new;
    ta = ta_new;
    if (landing) {
      branch.termination = "target reached";
      return branch;
    }
    if (corrector_iterations <= 3) ds = std::min(ds * control.growth, control.max);
  }
  branch.termination = "max points";
  return branch;
}

// --- axisymmetric oracle ---------------------------------------------------------------

namespace {

/// Classical Legendre polynomials P_0..P_{K-1} at x (row vector).
Eigen::RowVectorXd legendre_row(int K, double x) {
  Eigen::RowVectorXd p(K);
  p[0] = 1.0;
  if (K > 1) p[1] = x;
  for (int k = 1; k + 1 < K; ++k) p[k + 1] = ((2.0 * k + 1.0) * x * p[k] - k * p[k - 1]) / (k + 1.0);
  return p;
}

Eigen::RowVectorXd legendre_derivative_row(int K, double x) {
  const Eigen::RowVectorXd p = legendre_row(K, x);
  Eigen::RowVectorXd d = Eigen::RowVectorXd::Zero(K);
  for (int k = 1; k < K; ++k) d[k] = (k >= 2 ? d[k - 2] : 0.0) + (2.0 * k - 1.0) * p[k - 1];
  return d;
}

}  // namespace

double AxisymmetricProfile::operator()(double cos_t) const {
  return legendre_row(static_cast<int>(legendre.size()), cos_t).dot(legendre);
}

double AxisymmetricProfile::derivative_theta(double cos_t, double sin_t) const {
  return -sin_t * legendre_derivative_row(static_cast<int>(legendre.size()), cos_t).dot(legendre);
}

SphereField AxisymmetricProfile::lift(GridPtr grid, const Vec3& axis) const {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(grid->coefficient_count());
  const int top = std::min<int>(grid->bandlimit(), static_cast<int>(legendre.size()) - 1);
  for (int k = 0; k <= top; ++k) c[harmonic_index(k, 0)] = legendre[k] / std::sqrt(2.0 * k + 1.0);
  SphereField zonal(grid, std::move(c));
  const Vec3 a = axis.normalized();
  if ((a - Vec3::UnitZ()).norm() < 1e-15) return zonal;
  return rotate_field(zonal, rotation_to_pole(a).transpose());
}

double axisymmetric_residual(const AxisymmetricProfile& profile, int samples) {
  const int K = static_cast<int>(profile.legendre.size());
  Eigen::VectorXd lap(K);
  for (int k = 0; k < K; ++k) lap[k] = -k * (k + 1.0) * profile.legendre[k];
  double worst = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double t = std::numbers::pi * i / (samples - 1);
    const Eigen::RowVectorXd p = legendre_row(K, std::cos(t));
    const double u = p.dot(profile.legendre);
    const double r = 0.5 * profile.alpha * p.dot(lap) + std::expm1(u);
    worst = std::max(worst, std::abs(r));
  }
  return worst;
}

AxisymmetricProfile axisymmetric_solve(double alpha, const Eigen::VectorXd& initial, int modes, double tol,
                                       int max_iter) {
  if (modes < 64) throw ValidationError("axisymmetric_solve needs at least 64 Legendre modes");
  if (!(alpha > 0.0)) throw ValidationError("alpha must be positive");
  const int K = modes;
  const int Q = (3 * K) / 2 + 2;
  const QuadratureRule rule = gauss_legendre(Q);
  Eigen::MatrixXd p(Q, K);
  for (int q = 0; q < Q; ++q) p.row(q) = legendre_row(K, rule.nodes[q]);
  Eigen::VectorXd half_norm(K), stiffness(K);
  for (int k = 0; k < K; ++k) {
    half_norm[k] = (2.0 * k + 1.0) / 2.0;
    stiffness[k] = -0.5 * alpha * k * (k + 1.0);
  }
  // projection: a_k = (2k+1)/2 sum_q w_q f(x_q) P_k(x_q)
  const Eigen::MatrixXd projection = half_norm.asDiagonal() * p.transpose() * rule.weights.asDiagonal();

  auto normalized = [&](Eigen::VectorXd a) {
    const Eigen::VectorXd u = p * a;
    const double shift = u.maxCoeff();
    a[0] -= shift + std::log(0.5 * rule.weights.dot((u.array() - shift).exp().matrix()));
    return a;
  };
  auto galerkin_residual = [&](const Eigen::VectorXd& a) {
    const Eigen::VectorXd u = p * a;
    return Eigen::VectorXd(stiffness.cwiseProduct(a) + projection * u.unaryExpr([](double v) { return std::expm1(v); }));
  };

  AxisymmetricProfile out;
  out.alpha = alpha;
  Eigen::VectorXd a = Eigen::VectorXd::Zero(K);
  a.head(std::min<Eigen::Index>(K, initial.size())) = initial.head(std::min<Eigen::Index>(K, initial.size()));
  a = normalized(a);

  double last_step = std::numeric_limits<double>::infinity();
  for (out.iterations = 0; out.iterations <= max_iter; ++out.iterations) {
    out.legendre = a;
    out.residual_norm = axisymmetric_residual(out);
    if (out.residual_norm < tol && last_step < 1e-12) {
      out.converged = true;
      break;
    }
    if (out.iterations == max_iter) break;
    const Eigen::VectorXd f = galerkin_residual(a);
    const Eigen::VectorXd u = p * a;
    Eigen::MatrixXd jac = projection * u.array().exp().matrix().asDiagonal() * p;
    jac.diagonal() += stiffness;
    const Eigen::VectorXd delta = jac.fullPivLu().solve(-f);
    double lambda = 1.0;
    Eigen::VectorXd trial = a;
    const double merit0 = f.norm();
    while (lambda >= kMinDamping) {
      trial = a + lambda * delta;
      if ((p * trial).cwiseAbs().maxCoeff() <= kMaxFieldMagnitude) {
        trial = normalized(trial);
        if (galerkin_residual(trial).norm() < merit0 || merit0 == 0.0) break;
      }
      lambda *= 0.5;
    }
    if (lambda < kMinDamping) {
      trial = a + kMinDamping * delta;
      if ((p * trial).cwiseAbs().maxCoeff() > kMaxFieldMagnitude) break;
      trial = normalized(trial);
    }
    last_step = (p * (trial - a)).cwiseAbs().maxCoeff();
    a = trial;
  }
  out.legendre = a;
  return out;
}

// --- bifurcation scan ------------------------------------------------------------------

BifurcationScan bifurcation_scan(double alpha_lo, double alpha_hi, int n, GridPtr grid) {
  if (!(alpha_lo > 0.0 && alpha_lo < alpha_hi && alpha_hi <= 1.1)) {
    throw ValidationError("bifurcation_scan requires 0 < alpha_lo < alpha_hi <= 1.1");
  }
  if (n < 2) throw ValidationError("bifurcation_scan needs at least two samples");
  // Degrees above K have 1 - alpha k(k+1)/2 <= -1 on the whole interval.
  int K = 1;
  while (alpha_lo * (K + 1.0) * (K + 2.0) / 2.0 <= 2.0) ++K;
  K = std::min(std::max(K + 1, 4), grid->bandlimit());

  const Linearization mass_only(SphereField::zero(grid), 0.0);
  const Eigen::MatrixXd mass = mass_only.galerkin_matrix(K);
  Eigen::VectorXd stiffness(harmonic_count(K));
  for (int k = 0; k <= K; ++k) stiffness.segment(harmonic_index(k, -k), 2 * k + 1).setConstant(-0.5 * k * (k + 1.0));

  auto eigenvalues = [&](double alpha) {
    Eigen::MatrixXd g = mass;
    g.diagonal() += alpha * stiffness;
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(g, Eigen::EigenvaluesOnly).eigenvalues();
  };
  auto negatives = [](const Eigen::VectorXd& e) { return static_cast<int>((e.array() < 0.0).count()); };

  BifurcationScan scan;
  std::vector<int> inertia;
  for (int i = 0; i < n; ++i) {
    const double alpha = alpha_lo + (alpha_hi - alpha_lo) * i / (n - 1);
    const Eigen::VectorXd e = eigenvalues(alpha);
    scan.alphas.push_back(alpha);
    scan.smallest_singular_values.push_back(e.cwiseAbs().minCoeff());
    inertia.push_back(negatives(e));
  }
  for (int i = 0; i + 1 < n; ++i) {
    if (inertia[i] == inertia[i + 1]) continue;
    double lo = scan.alphas[i], hi = scan.alphas[i + 1];
    const int n_lo = inertia[i];
    while (hi - lo > 1e-14) {
      const double mid = 0.5 * (lo + hi);
      if (negatives(eigenvalues(mid)) == n_lo) lo = mid;
      else hi = mid;
    }
    // Evaluate at whichever bracket end is closer to singular.
    const Eigen::VectorXd e_lo = eigenvalues(lo), e_hi = eigenvalues(hi);
    const bool use_lo = e_lo.cwiseAbs().minCoeff() <= e_hi.cwiseAbs().minCoeff();
    const Eigen::VectorXd& e = use_lo ? e_lo : e_hi;
    SingularPoint sp;
    sp.alpha = use_lo ? lo : hi;
    sp.smallest_singular_value = e.cwiseAbs().minCoeff();
    sp.kernel_dimension = static_cast<int>((e.array().abs() < kKernelThreshold).count());
    // Sample points that land on a root produce two adjacent brackets for one zero.
    if (!scan.zeros.empty() && std::abs(scan.zeros.back().alpha - sp.alpha) < 1e-9) {
      if (sp.smallest_singular_value < scan.zeros.back().smallest_singular_value) scan.zeros.back() = sp;
      continue;
    }
    scan.zeros.push_back(sp);
  }
  return scan;
}

}  // namespace mfe
