#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "mfe/errors.hpp"
#include "mfe/mfe_core.hpp"
#include "mfe/solver.hpp"

using namespace mfe;
using testing::simpson;

namespace {

GridPtr grid() { return shared_grid(); }

SphereField low_random(std::uint64_t seed, int degree, double scale) {
  auto g = grid();
  Eigen::VectorXd c = Eigen::VectorXd::Zero(g->coefficient_count());
  c.head(harmonic_count(degree)) = testing::random_coeffs(degree, seed) * scale;
  return SphereField(g, c);
}

SphereField x3_field(double s) {
  return SphereField::from_function(grid(), [s](const Vec3& x) { return s * x[2]; });
}

}  // namespace

TEST_CASE("residual examples") {
  auto g = grid();
  CHECK(residual(SphereField::zero(g), 0.4).sup_norm() < 1e-15);
  for (double c : {-1.5, 0.3, 2.0}) {
    const SphereField r = residual(SphereField::constant(g, c), 0.7);
    CHECK((r.values().array() - std::expm1(c)).abs().maxCoeff() < 1e-12);
  }
  // degree-2 harmonics are in the kernel at alpha = 1/3, so the residual is second order
  const double eps = 1e-6;
  const SphereField r = residual(SphereField::harmonic(g, 2, 0, eps), 1.0 / 3.0);
  CHECK(r.sup_norm() <= 10 * eps * eps);
}

TEST_CASE("normalize") {
  auto g = grid();
  CHECK(normalize(SphereField::constant(g, 5.0)).sup_norm() < 1e-13);
  const SphereField u = normalize(low_random(3, 6, 0.4));
  CHECK(std::abs(exp_integral(u) - 1.0) < 1e-13);
  CHECK(testing::sup_diff(normalize(u), u) < 1e-12);

  // Y_1^0 = sqrt3 x3; oracle shift log((1/2) int e^{sqrt3 t} dt)
  const SphereField y = SphereField::harmonic(g, 1, 0);
  const double shift = std::log(0.5 * simpson([](double t) { return std::exp(std::sqrt(3.0) * t); }, -1, 1));
  CHECK(testing::sup_diff(normalize(y), y - shift) < 1e-12);
}

TEST_CASE("energy functional") {
  auto g = grid();
  CHECK(std::abs(j_alpha(SphereField::zero(g), 0.5)) < 1e-12);
  CHECK(std::abs(j_alpha(SphereField::constant(g, 1.7), 0.5)) < 1e-13);

  // u = 0.1 x3 at alpha = 1 against a dense 1-D quadrature: |grad u|^2 = c^2 (1 - t^2)
  const double c = 0.1, alpha = 1.0;
  const double dirichlet = 0.5 * simpson([&](double t) { return c * c * (1 - t * t); }, -1, 1);
  const double mean = 0.5 * simpson([&](double t) { return c * t; }, -1, 1);
  const double z = 0.5 * simpson([&](double t) { return std::exp(c * t); }, -1, 1);
  const double oracle = alpha / 4 * dirichlet + mean - std::log(z);
  CHECK(std::abs(j_alpha(x3_field(c), alpha) - oracle) < 1e-9);
}

TEST_CASE("energy is invariant under constants") {
  const SphereField u = low_random(12, 8, 0.3);
  for (double c : {-10.0, -3.3, 0.5, 10.0}) {
    CHECK(std::abs(j_alpha(u + c, 0.6) - j_alpha(u, 0.6)) < 1e-10);
  }
}

TEST_CASE("energy gradient agrees with central differences") {
  auto g = grid();
  CHECK(j_alpha_gradient(SphereField::zero(g), 0.5).sup_norm() < 1e-12);
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const SphereField u = low_random(seed, 8, 0.3);
    const SphereField v = low_random(100 + seed, 8, 0.3);
    const double alpha = 0.45;
    const double h = 1e-5;
    const double fd = (j_alpha(u + h * v, alpha) - j_alpha(u - h * v, alpha)) / (2 * h);
    const double exact = inner_product(j_alpha_gradient(u, alpha), v);
    CHECK(std::abs(fd - exact) < 1e-6 * std::max(1.0, std::abs(exact)));
  }
}

TEST_CASE("center of mass") {
  auto g = grid();
  CHECK(center_of_mass(SphereField::zero(g)).norm() < 1e-15);
  // even field u(x) = u(-x)
  const SphereField even = SphereField::from_function(g, [](const Vec3& x) { return x[0] * x[1] + 0.4 * x[2] * x[2] - x[0] * x[0]; });
  CHECK(center_of_mass(even).norm() < 1e-12);
  const Vec3 m = center_of_mass(x3_field(1.0));
  const double oracle = 0.5 * simpson([](double t) { return std::exp(t) * t; }, -1, 1);
  CHECK(std::abs(m[0]) < 1e-14);
  CHECK(std::abs(m[1]) < 1e-14);
  CHECK(m[2] > 0);
  CHECK(std::abs(m[2] - oracle) < 1e-12);
}

TEST_CASE("linearization at zero is diagonal in harmonics") {
  auto g = grid();
  const SphereField zero = SphereField::zero(g);
  for (double alpha : {0.3, 0.5, 1.0}) {
    for (int k = 0; k <= 4; ++k) {
      for (int m = -k; m <= k; ++m) {
        const SphereField phi = SphereField::harmonic(g, k, m);
        const SphereField out = linearized_apply(zero, alpha, phi);
        CHECK(testing::sup_diff(out, phi * (1 - alpha * k * (k + 1) / 2.0)) < 1e-11);
      }
    }
  }
  CHECK(linearized_apply(low_random(2, 6, 0.3), 0.5, zero).sup_norm() < 1e-15);
}

TEST_CASE("kernel at zero appears exactly at alpha = 2/(k(k+1))") {
  auto g = grid();
  const SphereField zero = SphereField::zero(g);
  for (int k = 1; k <= 3; ++k) {
    const double alpha = 2.0 / (k * (k + 1));
    for (int j = 0; j <= 5; ++j) {
      const double norm = linearized_apply(zero, alpha, SphereField::harmonic(g, j, 0)).sup_norm();
      if (j == k) {
        CHECK(norm < 1e-12);
      } else {
        CHECK(norm > 1e-2);
      }
    }
  }
  // Galerkin matrix at zero: eigenvalues 1 - alpha k(k+1)/2 with multiplicity 2k+1
  const Linearization lin(zero, 1.0 / 3.0);
  const Eigen::MatrixXd gm = lin.galerkin_matrix(4);
  for (int k = 0; k <= 4; ++k)
    for (int m = -k; m <= k; ++m)
      CHECK(std::abs(gm(harmonic_index(k, m), harmonic_index(k, m)) - (1 - k * (k + 1) / 6.0)) < 1e-12);
  CHECK((gm - Eigen::MatrixXd(gm.diagonal().asDiagonal())).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("linearization matches central differences of the residual") {
  for (std::uint64_t seed = 4; seed <= 6; ++seed) {
    const SphereField u = low_random(seed, 8, 0.3);
    const SphereField phi = low_random(50 + seed, 8, 0.3);
    const double alpha = 0.6, h = 1e-5;
    const SphereField fd = (residual(u + h * phi, alpha) - residual(u - h * phi, alpha)) * (1 / (2 * h));
    CHECK(testing::sup_diff(fd, linearized_apply(u, alpha, phi)) < 1e-6);
  }
}

TEST_CASE("gradient vanishes on a computed solution") {
  auto g = grid();
  Eigen::VectorXd init = Eigen::VectorXd::Zero(3);
  init[2] = -0.5;
  const AxisymmetricProfile p = axisymmetric_solve(0.32, init);
  REQUIRE(p.converged);
  MfeParameters params;
  params.alpha = 0.32;
  const SolveOutcome o = solve_newton(p.lift(g), params);
  REQUIRE(o.converged);
  CHECK(std::abs(exp_integral(o.solution) - 1.0) < 1e-12);
  CHECK(j_alpha_gradient(o.solution, 0.32).sup_norm() < 1e-8);
  CHECK(testing::sup_diff(j_alpha_gradient(o.solution, 0.32), -residual(o.solution, 0.32)) < 1e-12);
}

TEST_CASE("error paths") {
  auto g = grid();
  CHECK_THROWS_AS(check_magnitude(SphereField::constant(g, 800.0)), MagnitudeError);
  CHECK_THROWS_AS(residual(SphereField::constant(g, 1000.0), 0.5), MagnitudeError);
  MfeParameters p;
  p.alpha = 0.0;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p.alpha = 0.5;
  p.newton_tol = -1;
  CHECK_THROWS_AS(p.validate(), ValidationError);
}
