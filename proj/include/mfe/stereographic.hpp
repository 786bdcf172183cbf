#pragma once

// Stereographic transformation chain for solutions on the sphere and a numerical verifier
// for the sphere covering inequality.
//
// Projection from the north pole N = (0,0,1):
//   Pi(x) = (x1, x2) / (1 - x3),   Pi^-1(y) = (2 y1, 2 y2, |y|^2 - 1) / (1 + |y|^2).
// The round metric pulls back to 4 / (1+|y|^2)^2 |dy|^2, so dS = 4 dy / (1+|y|^2)^2 and
// dy = dS / (1 - x3)^2.
//
// For a field u and coupling alpha the planar function is
//   w(y) = u(Pi^-1 y) - 2 ln(1+|y|^2) + ln(8/alpha),
// which solves  Lap w + e^w = 8(1/alpha - 1)/(1+|y|^2)^2  when u solves the equation on the
// sphere, and e^w dy = (2/alpha) e^u dS.

#include <Eigen/Core>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "mfe/errors.hpp"
#include "mfe/sphere_field.hpp"

namespace mfe {

using Vec2 = Eigen::Vector2d;

template <typename Scalar>
Eigen::Matrix<Scalar, 2, 1> project(const Eigen::Matrix<Scalar, 3, 1>& x) {
  using std::abs;
  const Scalar rho2 = x[0] * x[0] + x[1] * x[1];
  if (rho2 == Scalar(0) && x[2] > Scalar(0)) throw PoleError("cannot project the north pole");
  // 1 - x3 without cancellation near the pole.
  const Scalar denom = x[2] > Scalar(0) ? rho2 / (Scalar(1) + x[2]) : Scalar(1) - x[2];
  return Eigen::Matrix<Scalar, 2, 1>(x[0] / denom, x[1] / denom);
}

template <typename Scalar>
Eigen::Matrix<Scalar, 3, 1> inverse_project(const Eigen::Matrix<Scalar, 2, 1>& y) {
  const Scalar r2 = y.squaredNorm();
  const Scalar d = Scalar(1) + r2;
  return Eigen::Matrix<Scalar, 3, 1>(Scalar(2) * y[0] / d, Scalar(2) * y[1] / d, (r2 - Scalar(1)) / d);
}

/// w on the plane, evaluated by pullback of a spherical field.
class PlanarField {
 public:
  PlanarField(SphereField u, double alpha);

  double alpha() const noexcept { return alpha_; }
  const SphereField& sphere_field() const noexcept { return u_; }

  double operator()(const Vec2& y) const;
  /// Planar Laplacian of w: (4/(1+|y|^2)^2) Lap_S u - 8/(1+|y|^2)^2.
  double laplacian(const Vec2& y) const;
  /// Right-hand side 8(1/alpha - 1)/(1+|y|^2)^2.
  double rhs(const Vec2& y) const;

 private:
  SphereField u_;
  Eigen::VectorXd lap_coeffs_;
  double alpha_;
};

/// Throws ValidationError unless alpha > 0.
PlanarField chain_to_w(const SphereField& u, double alpha);

/// Polar lattice on |y| <= radius (origin included).
std::vector<Vec2> disk_samples(double radius, int rings = 40, int spokes = 64);

/// max |Lap w + e^w - rhs| over the samples.
double planar_residual_check(const PlanarField& w, const std::vector<Vec2>& samples);

/// int e^w dy by pullback to the field's dealiased sphere grid.
double total_mass(const PlanarField& w);

/// Bounded planar domain: a disk, or a polygon star-shaped about its vertex centroid.
class PlanarDomain {
 public:
  static PlanarDomain disk(const Vec2& center, double radius);
  static PlanarDomain polygon(std::vector<Vec2> vertices);

  bool is_disk() const noexcept { return is_disk_; }
  bool contains(const Vec2& y) const;

  /// Closed form: pi r^2 or the shoelace formula.
  double planar_area() const;
  /// Area obtained from the spherical side. Disks map to spherical caps, integrated by a
  /// Gauss-Legendre cap rule with the weight dy/dS = 1/(1-x3)^2. Polygons have no cap
  /// image, so their second evaluation is the polar quadrature of `integrate`.
  double pullback_area() const;

  /// int_omega f dy. Disks use the cap rule above; polygons a polar rule about the centroid.
  double integrate(const std::function<double(const Vec2&)>& f) const;

  std::vector<Vec2> boundary_samples(int n) const;
  /// Deterministic quasi-random interior points (Halton bases 2 and 3).
  std::vector<Vec2> interior_samples(int n) const;

 private:
  PlanarDomain() = default;
  double boundary_radius(double angle) const;

  bool is_disk_ = true;
  Vec2 center_ = Vec2::Zero();
  double radius_ = 1.0;
  std::vector<Vec2> vertices_;
};

using ConformalFactor = std::function<double(const Vec2&)>;

struct SciOptions {
  int interior_samples = 10000;
  int boundary_samples = 1000;
  double boundary_tolerance = 1e-8;
  double ordering_tolerance = 1e-8;
};

struct SciResult {
  enum class Verdict { Holds, Fails, Inapplicable };
  Verdict verdict = Verdict::Inapplicable;
  double mass = 0.0;
  /// max |v1 - v2| on the boundary samples.
  double boundary_gap = 0.0;
  /// min over interior samples of (upper - lower); negative means the pair is not ordered.
  double ordering_margin = 0.0;
  /// min over interior samples of f_i = Lap v_i + e^{2 v_i} (finite differences).
  double min_f = 0.0;
  /// Why the pair was rejected, empty when applicable. Preconditions are spot-checked on
  /// samples, not proven.
  std::string reason;
};

std::string to_string(SciResult::Verdict v);

/// Mass int_omega (e^{2 v1} + e^{2 v2}) dy and the verdict mass >= 4 pi - 1e-6.
SciResult sci_check(const ConformalFactor& v1, const ConformalFactor& v2, const PlanarDomain& omega,
                    const SciOptions& options = {});

/// Standard cap factor e^{2v} = 4 lambda^2 / (1 + lambda^2 |y|^2)^2 (curvature 1).
ConformalFactor cap_factor(double lambda);
/// Constant-curvature factor e^{2v} = 4 mu^2 / (K (1 + mu^2 |y|^2)^2), K in (0, 1].
ConformalFactor curvature_factor(double mu, double curvature);

/// Curvature-K factor that agrees with cap_factor(lambda) on |y| = 1: the larger root of
/// mu / (1 + mu^2) = sqrt(K) lambda / (1 + lambda^2). Throws ValidationError if none exists.
double matching_curvature_scale(double lambda, double curvature);

struct ReflectedPairs {
  /// Reflection defect <= 1e-8: no nodal regions.
  bool symmetric = false;
  bool inconclusive = false;
  /// One entry per reflected pair (Omega, reflection of Omega) with Phi_y > 0 on Omega:
  /// (2/alpha) int_Omega (e^u + e^{u o refl}) dS, the planar mass int (e^{w(y)} + e^{w(y~)}) dy.
  std::vector<double> masses;
  /// Spherical area of Omega for each pair.
  std::vector<double> areas;
  double total = 0.0;
  /// 8 pi / alpha.
  double total_bound = 0.0;
};

ReflectedPairs reflected_pair_mass(const SphereField& u, double alpha, const Vec3& y, int refine = 4);

}  // namespace mfe
