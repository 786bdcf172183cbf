#include <doctest.h>

#include <cmath>
#include <utility>
#include <vector>

#include "helpers.hpp"
#include "mfe/errors.hpp"
#include "mfe/solver.hpp"
#include "mfe/symmetry.hpp"

using namespace mfe;

namespace {

GridPtr grid() { return shared_grid(); }

MfeParameters at(double alpha) {
  MfeParameters p;
  p.alpha = alpha;
  return p;
}

// P_2 start on the nontrivial branch: below 1/3 the branch has a2 < 0, above it a2 > 0.
AxisymmetricProfile branch_profile(double alpha, double a2 = -0.5) {
  Eigen::VectorXd init = Eigen::VectorXd::Zero(3);
  init[2] = a2;
  return axisymmetric_solve(alpha, init);
}

void check_outcome_invariants(const SolveOutcome& o, const MfeParameters& p) {
  REQUIRE(o.converged);
  CHECK(o.residual_norm < p.newton_tol);
  CHECK(residual(o.solution, o.alpha).sup_norm() < p.newton_tol);
  CHECK(std::abs(exp_integral(o.solution) - 1.0) < 1e-12);
  CHECK(o.center_of_mass.allFinite());
}

}  // namespace

TEST_CASE("constant starts contract to zero") {
  for (double alpha : {0.5, 0.9}) {
    const SolveOutcome o = solve_newton(SphereField::constant(grid(), 0.3), at(alpha));
    check_outcome_invariants(o, at(alpha));
    CHECK(o.solution.sup_norm() < 1e-12);
  }
}

TEST_CASE("alpha 0.9 from 0.5 x3") {
  const SphereField u0 = SphereField::from_function(grid(), [](const Vec3& x) { return 0.5 * x[2]; });
  const SolveOutcome o = solve_newton(u0, at(0.9));
  check_outcome_invariants(o, at(0.9));
  CHECK(o.residual_norm < 1e-10);
  CHECK(o.resolved);
  // the only solution reached from this start is the trivial one
  CHECK(o.solution.sup_norm() < 1e-10);
}

TEST_CASE("alpha 1/3: perturbations orthogonal to the degree-2 kernel return to zero") {
  const double alpha = 1.0 / 3.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Eigen::VectorXd c = random_field(grid(), seed).coeffs();
    for (int m = -2; m <= 2; ++m) c[harmonic_index(2, m)] = 0.0;
    SphereField u0(grid(), c);
    u0 = u0 * (0.1 / u0.sup_norm());
    const SolveOutcome o = solve_newton(u0, at(alpha));
    check_outcome_invariants(o, at(alpha));
    CHECK(o.kernel_dimension == 5);
    // At this double root the residual is quadratic in the distance to zero, so the
    // distance bottoms out near sqrt(machine epsilon).
    CHECK(o.solution.sup_norm() < 1e-7);
  }
}

TEST_CASE("deflation with nothing known is plain Newton") {
  const SphereField u0 = random_field(grid(), 3, 4, 0.1);
  const SolveOutcome a = solve_newton(u0, at(0.6));
  const SolveOutcome b = deflated_solve(u0, at(0.6), {});
  CHECK(a.converged == b.converged);
  CHECK(a.iterations == b.iterations);
  CHECK(testing::sup_diff(a.solution, b.solution) < 1e-14);
}

TEST_CASE("deflating zero at alpha 0.32 finds the axisymmetric branch") {
  const std::vector<SphereField> known{SphereField::zero(grid())};
  const SolveOutcome o = deflated_solve(random_field(grid(), 1, 4, 0.03), at(0.32), known);
  check_outcome_invariants(o, at(0.32));
  CHECK_FALSE(o.exhausted);
  CHECK(o.resolved);
  CHECK(o.solution.sup_norm() == doctest::Approx(0.2807).epsilon(1e-3));
  CHECK(detect_axis(o.solution).deviation < 1e-5);
  // same solution as the 1-D oracle up to rotation
  const AxisymmetricProfile p = branch_profile(0.32);
  const Vec3 axis = detect_axis(o.solution).axis;
  double best = 1e300;
  for (const Vec3& a : {axis, Vec3(-axis)}) best = std::min(best, testing::sup_diff(p.lift(grid(), a), o.solution));
  CHECK(best < 1e-8);
}

TEST_CASE("deflating zero at alpha 0.9 either finds a new solution or reports exhaustion") {
  const std::vector<SphereField> known{SphereField::zero(grid())};
  const SolveOutcome o = deflated_solve(random_field(grid(), 0), at(0.9), known);
  const bool new_solution = o.converged && !o.exhausted && o.solution.sup_norm() > 1e-3;
  CHECK((new_solution || o.exhausted));
  if (new_solution) {
    // anything found here must be checked for resolution before it counts
    INFO("spectral tail " << o.spectral_tail);
    CHECK(o.spectral_tail >= 0.0);
  }
}

TEST_CASE("continuation along the trivial branch flags alpha = 1 and 1/3") {
  const SolveOutcome seed = solve_newton(SphereField::zero(grid()), at(0.5));
  REQUIRE(seed.converged);
  const SolutionBranch up = continue_branch(seed, 1.1, StepControl{}, at(0.5));
  CHECK(up.termination == "target reached");
  for (const BranchPoint& pt : up.points) CHECK(pt.outcome.solution.sup_norm() < 1e-8);
  REQUIRE(up.events.size() == 1);
  CHECK(std::abs(up.events[0].alpha_estimate - 1.0) < 1e-3);

  const SolutionBranch down = continue_branch(seed, 0.3, StepControl{}, at(0.5));
  REQUIRE(down.events.size() == 1);
  CHECK(std::abs(down.events[0].alpha_estimate - 1.0 / 3.0) < 1e-3);
  CHECK(std::abs(down.points.back().outcome.alpha - 0.3) < 1e-12);
}

TEST_CASE("nontrivial branch continued downward stays axially symmetric") {
  const SolveOutcome seed = solve_newton(branch_profile(0.32).lift(grid()), at(0.32));
  REQUIRE(seed.converged);
  StepControl control;
  control.max = 0.02;
  const SolutionBranch b = continue_branch(seed, 0.27, control, at(0.32));
  CHECK(b.termination == "target reached");
  REQUIRE(b.points.size() >= 3);
  for (const BranchPoint& pt : b.points) {
    CHECK(pt.outcome.converged);
    CHECK(detect_axis(pt.outcome.solution).deviation < 1e-5);
  }
  CHECK(b.points.back().outcome.solution.sup_norm() > seed.solution.sup_norm());
}

TEST_CASE("axisymmetric oracle") {
  const AxisymmetricProfile zero = axisymmetric_solve(0.5, Eigen::VectorXd::Zero(1));
  CHECK(zero.converged);
  CHECK(zero.legendre.cwiseAbs().maxCoeff() < 1e-14);

  const AxisymmetricProfile p = branch_profile(0.32);
  REQUIRE(p.converged);
  CHECK(axisymmetric_residual(p) < 1e-10);
  CHECK(std::abs(p.legendre[2]) > 0.1);
  const SphereField lifted = p.lift(grid());
  CHECK(residual(lifted, 0.32).sup_norm() < 1e-10);
  const SolveOutcome polished = solve_newton(lifted, at(0.32));
  REQUIRE(polished.converged);
  CHECK(testing::sup_diff(polished.solution, lifted) < 1e-8);

  // a positive P_2 start sits on the other side of the transcritical point and falls back to zero
  Eigen::VectorXd plus = Eigen::VectorXd::Zero(3);
  plus[2] = 0.5;
  const AxisymmetricProfile back = axisymmetric_solve(0.32, plus);
  CHECK(back.converged);
  CHECK(back.legendre.cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("lifted 1-D solutions are 2-D fixed points for several alphas") {
  const std::pair<double, double> cases[] = {{0.3, -0.7}, {0.35, 0.35}, {0.4, 1.3}};
  for (const auto& [alpha, a2] : cases) {
    CAPTURE(alpha);
    const AxisymmetricProfile p = branch_profile(alpha, a2);
    REQUIRE(p.converged);
    REQUIRE(std::abs(p.legendre[2]) > 0.1);
    const Vec3 axis = Vec3(0.3, -0.5, 0.8).normalized();
    const SphereField lifted = p.lift(grid(), axis);
    const SolveOutcome o = solve_newton(lifted, at(alpha));
    check_outcome_invariants(o, at(alpha));
    CHECK(testing::sup_diff(o.solution, lifted) < 1e-8);
    const AxisDetection d = detect_axis(o.solution);
    CHECK(std::abs(std::abs(d.axis.dot(axis)) - 1.0) < 1e-10);
  }
}

TEST_CASE("bifurcation scan of the trivial branch") {
  const BifurcationScan scan = bifurcation_scan(0.15, 1.05, 901, grid());
  CHECK(scan.alphas.size() == 901);
  REQUIRE(scan.zeros.size() == 3);
  const double expected[] = {1.0 / 6.0, 1.0 / 3.0, 1.0};
  const int dims[] = {7, 5, 3};
  for (int i = 0; i < 3; ++i) {
    CHECK(std::abs(scan.zeros[i].alpha - expected[i]) < 1e-6);
    CHECK(scan.zeros[i].smallest_singular_value < 1e-8);
    CHECK(scan.zeros[i].kernel_dimension == dims[i]);
  }
  CHECK(bifurcation_scan(0.4, 0.9, 501, grid()).zeros.empty());
  CHECK(solve_newton(SphereField::zero(grid()), at(1.0 / 3.0)).kernel_dimension == 5);
  CHECK(solve_newton(SphereField::zero(grid()), at(0.5)).kernel_dimension == 0);
}

TEST_CASE("random starts are reproducible and multi_start preserves seed order") {
  const SphereField a = random_field(grid(), 42);
  const SphereField b = random_field(grid(), 42);
  CHECK(a.coeffs() == b.coeffs());
  CHECK(std::abs(a.coeffs()[0]) == 0.0);
  CHECK(a.coeffs().tail(a.coeffs().size() - harmonic_count(8)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.coeffs() - random_field(grid(), 43).coeffs()).norm() > 0.1);

  const std::vector<std::uint64_t> seeds{5, 2, 9};
  const auto outcomes = multi_start(grid(), at(0.6), seeds);
  REQUIRE(outcomes.size() == 3);
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const SolveOutcome single = solve_newton(random_field(grid(), seeds[i]), at(0.6));
    CHECK(outcomes[i].iterations == single.iterations);
    CHECK(outcomes[i].solution.coeffs() == single.solution.coeffs());
  }
}

TEST_CASE("spectral tail separates resolved and unresolved fields") {
  CHECK(spectral_tail(branch_profile(0.32).lift(grid())) < kResolvedTail);
  const SphereField rough = SphereField::harmonic(grid(), 45, 3, 0.01) + SphereField::harmonic(grid(), 1, 0, 1.0);
  CHECK(spectral_tail(rough) > kResolvedTail);
}

TEST_CASE("solver error paths") {
  CHECK_THROWS_AS(solve_newton(SphereField::constant(grid(), 60.0), at(0.5)), ValidationError);
  CHECK_THROWS_AS(bifurcation_scan(0.5, 0.4, 10, grid()), ValidationError);
  CHECK_THROWS_AS(bifurcation_scan(0.1, 0.4, 1, grid()), ValidationError);
  CHECK_THROWS_AS(axisymmetric_solve(0.3, Eigen::VectorXd::Zero(3), 32), ValidationError);
  SolveOutcome bad = solve_newton(SphereField::zero(grid()), at(0.5));
  bad.converged = false;
  CHECK_THROWS_AS(continue_branch(bad, 0.6, StepControl{}, at(0.5)), ValidationError);
  StepControl wrong;
  wrong.min = 1.0;
  CHECK_THROWS_AS(continue_branch(solve_newton(SphereField::zero(grid()), at(0.5)), 0.6, wrong, at(0.5)), ValidationError);
}
