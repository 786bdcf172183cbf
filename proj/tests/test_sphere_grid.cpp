#include <doctest.h>

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <cstring>

#include "helpers.hpp"
#include "mfe/errors.hpp"
#include "mfe/rotation.hpp"
#include "mfe/sphere_field.hpp"

using namespace mfe;
using testing::simpson;

namespace {
const double kPi = std::numbers::pi;
GridPtr grid() { return shared_grid(); }
}  // namespace

TEST_CASE("quadrature of simple fields") {
  auto g = grid();
  CHECK(quadrature(SphereField::constant(g, 1.0)) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(quadrature(SphereField::from_function(g, [](const Vec3& x) { return x[2]; }))) < 1e-15);
  // dense 1-D oracle: (1/2) int_{-1}^{1} t^2 dt
  const double oracle = 0.5 * simpson([](double t) { return t * t; }, -1.0, 1.0);
  const double q = quadrature(SphereField::from_function(g, [](const Vec3& x) { return x[2] * x[2]; }));
  CHECK(std::abs(q - oracle) < 1e-12);
  CHECK(std::abs(q - 1.0 / 3.0) < 1e-14);
}

TEST_CASE("quadrature is exact for polynomials in x3 up to degree 2 n_theta - 1") {
  auto g = grid();
  const int top = 2 * g->n_theta() - 1;
  Eigen::VectorXd values(g->size());
  for (int d = 0; d <= top; ++d) {
    for (Eigen::Index i = 0; i < g->size(); ++i) values[i] = std::pow(g->node(i)[2], d);
    const double exact = d % 2 ? 0.0 : 1.0 / (d + 1);
    CHECK(std::abs(g->integrate(values) - exact) < 1e-12);
  }
}

TEST_CASE("analysis of basis functions") {
  auto g = grid();
  const SphereField y20 = SphereField::harmonic(g, 2, 0);
  const Eigen::VectorXd c = g->analyze(y20.values());
  CHECK(std::abs(c[harmonic_index(2, 0)] - 1.0) < 1e-13);
  CHECK((c - Eigen::VectorXd::Unit(c.size(), harmonic_index(2, 0))).cwiseAbs().maxCoeff() < 1e-13);

  const Eigen::VectorXd one = g->analyze(Eigen::VectorXd::Ones(g->size()));
  CHECK(std::abs(one[0] - 1.0) < 1e-13);
  CHECK(one.tail(one.size() - 1).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("harmonic convention pinned against closed forms") {
  auto g = grid();
  std::mt19937_64 rng(7);
  const SphereField y10 = SphereField::harmonic(g, 1, 0);
  const SphereField y11 = SphereField::harmonic(g, 1, 1);
  const SphereField y1m = SphereField::harmonic(g, 1, -1);
  const SphereField y21 = SphereField::harmonic(g, 2, 1);
  for (int i = 0; i < 20; ++i) {
    const Vec3 x = testing::random_unit(rng);
    CHECK(std::abs(y10(x) - std::sqrt(3.0) * x[2]) < 1e-13);
    CHECK(std::abs(y11(x) - std::sqrt(3.0) * x[0]) < 1e-13);
    CHECK(std::abs(y1m(x) - std::sqrt(3.0) * x[1]) < 1e-13);
    CHECK(std::abs(y21(x) - std::sqrt(15.0) * x[0] * x[2]) < 1e-13);
  }
}

TEST_CASE("transform roundtrip on seeded random band-limited fields") {
  auto g = grid();
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Eigen::VectorXd c = testing::random_coeffs(g->bandlimit(), seed);
    const Eigen::VectorXd v = g->synthesize(c);
    CHECK((g->analyze(v) - c).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((g->synthesize(g->analyze(v)) - v).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("Laplace-Beltrami eigenrelation for every harmonic") {
  auto g = grid();
  CHECK(laplace_beltrami(SphereField::constant(g, 3.0)).sup_norm() < 1e-14);
  double worst = 0.0;
  for (int k = 0; k <= g->bandlimit(); ++k) {
    for (int m = -k; m <= k; ++m) {
      const SphereField y = SphereField::harmonic(g, k, m);
      const SphereField d = laplace_beltrami(y) + y * (k * (k + 1.0));
      worst = std::max(worst, d.sup_norm());
    }
  }
  CHECK(worst < 1e-10);
  // pointwise, against the closed form
  const SphereField y10 = SphereField::harmonic(g, 1, 0);
  CHECK(testing::sup_diff(laplace_beltrami(y10), y10 * -2.0) < 1e-10);
  const SphereField y21 = SphereField::harmonic(g, 2, 1);
  CHECK(testing::sup_diff(laplace_beltrami(y21), y21 * -6.0) < 1e-10);
}

TEST_CASE("surface gradient") {
  auto g = grid();
  CHECK(SphereField::constant(g, 2.0).gradient(Vec3(0.6, 0.0, 0.8)).norm() < 1e-13);

  const SphereField x3 = SphereField::from_function(g, [](const Vec3& x) { return x[2]; });
  CHECK((x3.gradient(Vec3::UnitX()) - Vec3::UnitZ()).norm() < 1e-12);
  CHECK(SphereField::harmonic(g, 1, 0).gradient(Vec3::UnitZ()).norm() < 1e-12);

  // central differences along great circles through the point, step 1e-5
  Eigen::VectorXd c = Eigen::VectorXd::Zero(g->coefficient_count());
  c.head(harmonic_count(12)) = testing::random_coeffs(12, 3);
  const SphereField u(g, c);
  std::mt19937_64 rng(11);
  const double h = 1e-5;
  for (int i = 0; i < 10; ++i) {
    const Vec3 x = testing::random_unit(rng);
    const Vec3 grad = u.gradient(x);
    CHECK(std::abs(grad.dot(x)) < 1e-12);
    Vec3 t1 = x.unitOrthogonal();
    Vec3 t2 = x.cross(t1);
    for (const Vec3& t : {t1, t2}) {
      const Vec3 xp = std::cos(h) * x + std::sin(h) * t;
      const Vec3 xm = std::cos(h) * x - std::sin(h) * t;
      const double fd = (u(xp) - u(xm)) / (2 * h);
      CHECK(std::abs(fd - grad.dot(t)) < 1e-6 * std::max(1.0, grad.norm()));
    }
  }
}

TEST_CASE("rotations") {
  auto g = grid();
  Eigen::VectorXd c = Eigen::VectorXd::Zero(g->coefficient_count());
  c.head(harmonic_count(20)) = testing::random_coeffs(20, 5);
  const SphereField f(g, c);

  CHECK(testing::sup_diff(rotate_field(f, Mat3::Identity()), f) < 1e-13);

  // Y_1^0 rotated by 90 degrees about e1 is x -> sqrt3 (R^T x)_3 = -sqrt3 x2
  const Mat3 r = testing::rotation(Vec3::UnitX(), kPi / 2);
  const SphereField rotated = rotate_field(SphereField::harmonic(g, 1, 0), r);
  const SphereField direct = SphereField::from_function(g, [&](const Vec3& x) { return std::sqrt(3.0) * (r.transpose() * x)[2]; });
  CHECK(testing::sup_diff(rotated, direct) < 1e-12);
  CHECK(testing::sup_diff(rotated, SphereField::harmonic(g, 1, -1, -1.0)) < 1e-12);

  std::mt19937_64 rng(21);
  for (int i = 0; i < 3; ++i) {
    const Mat3 q = testing::rotation(testing::random_unit(rng), 2.0 + i);
    CHECK(testing::sup_diff(rotate_field(rotate_field(f, q), q.transpose()), f) < 1e-9);
    // equivariance with the Laplacian
    CHECK(testing::sup_diff(laplace_beltrami(rotate_field(f, q)), rotate_field(laplace_beltrami(f), q)) < 1e-9);
    // pointwise definition
    const Vec3 x = testing::random_unit(rng);
    CHECK(std::abs(rotate_field(f, q)(x) - f(q.transpose() * x)) < 1e-10);
  }

  const Vec3 y = Vec3(0.2, -0.7, 0.4).normalized();
  CHECK((rotation_to_pole(y) * y - Vec3::UnitZ()).norm() < 1e-14);
}

TEST_CASE("rotation rejects improper or non-orthogonal matrices") {
  auto f = SphereField::harmonic(grid(), 1, 0);
  Mat3 reflection = Mat3::Identity();
  reflection(2, 2) = -1;
  CHECK_THROWS_AS(rotate_field(f, reflection), ValidationError);
  CHECK_THROWS_AS(rotate_field(f, Mat3::Identity() * 1.01), ValidationError);
}

TEST_CASE("divergence theorem on hemispheres") {
  auto g = grid();
  Eigen::VectorXd c = Eigen::VectorXd::Zero(g->coefficient_count());
  c.head(harmonic_count(16)) = testing::random_coeffs(16, 8);
  const SphereField f(g, c);
  const SphereField lap = laplace_beltrami(f);
  std::mt19937_64 rng(4);
  for (int i = 0; i < 10; ++i) {
    const Vec3 y = testing::random_unit(rng);
    // outward normal of {x . y >= 0} on its boundary is -y
    const double inside = hemisphere_integral(lap, y);
    const double flux = -great_circle_flux(f, y);
    CHECK(std::abs(inside - flux) < 1e-6);
  }
  CHECK(hemisphere_integral(SphereField::constant(g, 1.0), Vec3::UnitZ()) == doctest::Approx(2 * kPi).epsilon(1e-13));
}

TEST_CASE("grid construction errors") {
  CHECK_THROWS_AS(SphereGrid(48, 64, 96), ResolutionError);
  CHECK_THROWS_AS(SphereGrid(48, 40, 128), ResolutionError);
  CHECK_THROWS(bandlimit_of(10));
  CHECK(bandlimit_of(49) == 6);
}

TEST_CASE("field serialization roundtrip is bit exact and detects corruption") {
  auto g = grid();
  const SphereField f(g, testing::random_coeffs(g->bandlimit(), 9));
  std::stringstream buffer;
  write_field(buffer, f);
  const std::string bytes = buffer.str();
  CHECK(bytes.size() == 32 + 8 * static_cast<std::size_t>(g->coefficient_count()) + 8);
  std::stringstream in(bytes);
  const SphereField back = read_field(in);
  CHECK(back.bandlimit() == f.bandlimit());
  CHECK(std::memcmp(back.coeffs().data(), f.coeffs().data(), sizeof(double) * f.coeffs().size()) == 0);

  std::string bad = bytes;
  bad[100] ^= 0x01;
  std::stringstream corrupted(bad);
  CHECK_THROWS_AS(read_field(corrupted), FormatError);
  std::stringstream truncated(bytes.substr(0, 50));
  CHECK_THROWS_AS(read_field(truncated), FormatError);
  std::stringstream garbage("not a field at all, just some text padding it out");
  CHECK_THROWS_AS(read_field(garbage), FormatError);
}
