#include "mfe/stereographic.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "mfe/rotation.hpp"
#include "mfe/symmetry.hpp"

namespace mfe {

namespace {

constexpr double kPi = std::numbers::pi;

Vec3 lift(const Vec2& y) { return inverse_project<double>(y); }

double conformal(const Vec2& y) {
  const double d = 1.0 + y.squaredNorm();
  return 4.0 / (d * d);
}

double halton(int index, int base) {
  double f = 1.0, r = 0.0;
  for (int i = index; i > 0; i /= base) {
    f /= base;
    r += f * (i % base);
  }
  return r;
}

// Cap rule resolution. Integrands pulled back to the sphere are smooth on the cap.
constexpr int kCapRadial = 96;
constexpr int kCapAngular = 192;
constexpr int kPolarRadial = 64;
constexpr int kPolarAngular = 48;

}  // namespace

// --- chain -----------------------------------------------------------------------------

PlanarField::PlanarField(SphereField u, double alpha)
    : u_(std::move(u)), lap_coeffs_(laplace_beltrami(u_.coeffs())), alpha_(alpha) {
  if (!(alpha > 0.0)) throw ValidationError("alpha must be positive");
}

double PlanarField::operator()(const Vec2& y) const {
  return u_(lift(y)) - 2.0 * std::log1p(y.squaredNorm()) + std::log(8.0 / alpha_);
}

double PlanarField::laplacian(const Vec2& y) const {
  const double c = conformal(y);
  return c * evaluate(lap_coeffs_, lift(y)) - 2.0 * c;
}

double PlanarField::rhs(const Vec2& y) const { return 2.0 * (1.0 / alpha_ - 1.0) * conformal(y); }

PlanarField chain_to_w(const SphereField& u, double alpha) { return PlanarField(u, alpha); }

std::vector<Vec2> disk_samples(double radius, int rings, int spokes) {
  if (!(radius > 0.0) || rings < 1 || spokes < 1) throw ValidationError("bad disk sample parameters");
  std::vector<Vec2> out{Vec2::Zero()};
  for (int i = 1; i <= rings; ++i) {
    const double r = radius * i / rings;
    for (int j = 0; j < spokes; ++j) {
      const double t = 2.0 * kPi * (j + 0.5 * (i % 2)) / spokes;
      out.emplace_back(r * std::cos(t), r * std::sin(t));
    }
  }
  return out;
}

double planar_residual_check(const PlanarField& w, const std::vector<Vec2>& samples) {
  double worst = 0.0;
  for (const Vec2& y : samples) {
    worst = std::max(worst, std::abs(w.laplacian(y) + std::exp(w(y)) - w.rhs(y)));
  }
  return worst;
}

double total_mass(const PlanarField& w) {
  const SphereGrid& fine = w.sphere_field().grid().dealiased();
  const Eigen::VectorXd u = fine.synthesize(w.sphere_field().coeffs());
  const double shift = std::log(8.0 / w.alpha());
  double mass = 0.0;
  for (Eigen::Index i = 0; i < fine.size(); ++i) {
    // Gauss nodes avoid the pole, so every node projects.
    const Vec3 x = fine.node(i);
    const double one_minus = x[2] > 0.0 ? (x[0] * x[0] + x[1] * x[1]) / (1.0 + x[2]) : 1.0 - x[2];
    const double r2 = (1.0 + x[2]) / one_minus;
    const double ew = std::exp(u[i] - 2.0 * std::log1p(r2) + shift);
    mass += fine.weights()[i] * ew / (one_minus * one_minus);
  }
  return mass;
}

// --- domains ---------------------------------------------------------------------------

PlanarDomain PlanarDomain::disk(const Vec2& center, double radius) {
  if (!(radius > 0.0) || !center.allFinite()) throw ValidationError("disk needs a finite center and positive radius");
  PlanarDomain d;
  d.is_disk_ = true;
  d.center_ = center;
  d.radius_ = radius;
  return d;
}

PlanarDomain PlanarDomain::polygon(std::vector<Vec2> vertices) {
  if (vertices.size() < 3) throw ValidationError("polygon needs at least three vertices");
  PlanarDomain d;
  d.is_disk_ = false;
  Vec2 c = Vec2::Zero();
  for (const Vec2& v : vertices) c += v;
  c /= static_cast<double>(vertices.size());
  // Counterclockwise orientation.
  double twice = 0.0;
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    const Vec2& a = vertices[i];
    const Vec2& b = vertices[(i + 1) % vertices.size()];
    twice += a.x() * b.y() - a.y() * b.x();
  }
  if (twice < 0.0) std::reverse(vertices.begin(), vertices.end());
  // Star-shaped about the centroid: every edge sees it on its left.
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    const Vec2 a = vertices[i] - c;
    const Vec2 b = vertices[(i + 1) % vertices.size()] - c;
    if (!(a.x() * b.y() - a.y() * b.x() > 0.0)) {
      throw ValidationError("polygon is not star-shaped about its vertex centroid");
    }
  }
  d.center_ = c;
  d.vertices_ = std::move(vertices);
  return d;
}

double PlanarDomain::boundary_radius(double angle) const {
  if (is_disk_) return radius_;
  const Vec2 dir(std::cos(angle), std::sin(angle));
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    const Vec2 a = vertices_[i] - center_;
    const Vec2 b = vertices_[(i + 1) % vertices_.size()] - center_;
    // Solve s dir = a + t (b - a), 0 <= t <= 1, s > 0.
    const Vec2 e = b - a;
    const double det = dir.x() * (-e.y()) + dir.y() * e.x();
    if (std::abs(det) < 1e-300) continue;
    const double s = (a.x() * (-e.y()) + a.y() * e.x()) / det;
    const double t = (dir.x() * a.y() - dir.y() * a.x()) / det;
    if (s > 0.0 && t >= -1e-12 && t <= 1.0 + 1e-12) return s;
  }
  throw ValidationError("ray does not meet the polygon boundary");
}

bool PlanarDomain::contains(const Vec2& y) const {
  const Vec2 d = y - center_;
  if (is_disk_) return d.norm() < radius_;
  const double r = d.norm();
  if (r == 0.0) return true;
  return r < boundary_radius(std::atan2(d.y(), d.x()));
}

double PlanarDomain::planar_area() const {
  if (is_disk_) return kPi * radius_ * radius_;
  double twice = 0.0;
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    const Vec2& a = vertices_[i];
    const Vec2& b = vertices_[(i + 1) % vertices_.size()];
    twice += a.x() * b.y() - a.y() * b.x();
  }
  return 0.5 * twice;
}

double PlanarDomain::pullback_area() const {
  return integrate([](const Vec2&) { return 1.0; });
}

double PlanarDomain::integrate(const std::function<double(const Vec2&)>& f) const {
  double total = 0.0;
  if (is_disk_) {
    // The boundary circle lifts to the plane a . x = h; the disk lifts to the side that
    // holds the lifted center.
    const Vec3 p1 = lift(center_ + Vec2(radius_, 0.0));
    const Vec3 p2 = lift(center_ + Vec2(-radius_, 0.0));
    const Vec3 p3 = lift(center_ + Vec2(0.0, radius_));
    Vec3 a = (p2 - p1).cross(p3 - p1).normalized();
    double h = a.dot(p1);
    if (a.dot(lift(center_)) < h) {
      a = -a;
      h = -h;
    }
    const Mat3 back = rotation_to_pole(a).transpose();
    const QuadratureRule rule = gauss_legendre(kCapRadial, h, 1.0);
    for (int i = 0; i < kCapRadial; ++i) {
      const double t = rule.nodes[i];
      const double s = std::sqrt(std::max(0.0, 1.0 - t * t));
      double ring = 0.0;
      for (int j = 0; j < kCapAngular; ++j) {
        const double p = 2.0 * kPi * j / kCapAngular;
        const Vec3 x = back * Vec3(s * std::cos(p), s * std::sin(p), t);
        const double one_minus = x[2] > 0.0 ? (x[0] * x[0] + x[1] * x[1]) / (1.0 + x[2]) : 1.0 - x[2];
        ring += f(project<double>(x)) / (one_minus * one_minus);
      }
      total += rule.weights[i] * ring * (2.0 * kPi / kCapAngular);
    }
    return total;
  }
  // Polar rule about the centroid, one angular panel per edge so each panel is smooth.
  const QuadratureRule radial = gauss_legendre(kPolarRadial, 0.0, 1.0);
  for (std::size_t e = 0; e < vertices_.size(); ++e) {
    const Vec2 a = vertices_[e] - center_;
    const Vec2 b = vertices_[(e + 1) % vertices_.size()] - center_;
    const double t0 = std::atan2(a.y(), a.x());
    double t1 = std::atan2(b.y(), b.x());
    while (t1 <= t0) t1 += 2.0 * kPi;
    const QuadratureRule angular = gauss_legendre(kPolarAngular, t0, t1);
    const Vec2 edge = b - a;
    const double cross = a.x() * b.y() - a.y() * b.x();
    for (int j = 0; j < kPolarAngular; ++j) {
      const Vec2 dir(std::cos(angular.nodes[j]), std::sin(angular.nodes[j]));
      // Distance to the edge line along dir.
      const double rho = cross / (dir.x() * edge.y() - dir.y() * edge.x());
      double line = 0.0;
      for (int i = 0; i < kPolarRadial; ++i) {
        const double r = rho * radial.nodes[i];
        line += radial.weights[i] * r * f(center_ + r * dir);
      }
      total += angular.weights[j] * line * rho;
    }
  }
  return total;
}

std::vector<Vec2> PlanarDomain::boundary_samples(int n) const {
  if (n < 1) throw ValidationError("need at least one boundary sample");
  std::vector<Vec2> out;
  out.reserve(n);
  if (is_disk_) {
    for (int i = 0; i < n; ++i) {
      const double t = 2.0 * kPi * i / n;
      out.push_back(center_ + radius_ * Vec2(std::cos(t), std::sin(t)));
    }
    return out;
  }
  double perimeter = 0.0;
  for (std::size_t i = 0; i < vertices_.size(); ++i) perimeter += (vertices_[(i + 1) % vertices_.size()] - vertices_[i]).norm();
  std::size_t edge = 0;
  double walked = 0.0;
  for (int i = 0; i < n; ++i) {
    const double s = perimeter * i / n;
    while (edge + 1 < vertices_.size() &&
           walked + (vertices_[(edge + 1) % vertices_.size()] - vertices_[edge]).norm() < s) {
      walked += (vertices_[(edge + 1) % vertices_.size()] - vertices_[edge]).norm();
      ++edge;
    }
    const Vec2& a = vertices_[edge];
    const Vec2& b = vertices_[(edge + 1) % vertices_.size()];
    const double len = (b - a).norm();
    out.push_back(a + (b - a) * std::clamp((s - walked) / len, 0.0, 1.0));
  }
  return out;
}

std::vector<Vec2> PlanarDomain::interior_samples(int n) const {
  if (n < 1) throw ValidationError("need at least one interior sample");
  std::vector<Vec2> out;
  out.reserve(n);
  if (is_disk_) {
    for (int i = 1; i <= n; ++i) {
      const double r = radius_ * std::sqrt(halton(i, 2));
      const double t = 2.0 * kPi * halton(i, 3);
      out.push_back(center_ + r * Vec2(std::cos(t), std::sin(t)));
    }
    return out;
  }
  Vec2 lo = vertices_.front(), hi = vertices_.front();
  for (const Vec2& v : vertices_) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  for (int i = 1; static_cast<int>(out.size()) < n; ++i) {
    const Vec2 y(lo.x() + (hi.x() - lo.x()) * halton(i, 2), lo.y() + (hi.y() - lo.y()) * halton(i, 3));
    if (contains(y)) out.push_back(y);
  }
  return out;
}

// --- covering inequality ---------------------------------------------------------------

std::string to_string(SciResult::Verdict v) {
  switch (v) {
    case SciResult::Verdict::Holds: return "holds";
    case SciResult::Verdict::Fails: return "fails";
    case SciResult::Verdict::Inapplicable: return "inapplicable";
  }
  return "unknown";
}

namespace {

// Five-point Laplacian with one Richardson step, O(h^4).
double fd_laplacian(const ConformalFactor& v, const Vec2& y, double h) {
  auto five = [&](double s) {
    return (v(y + Vec2(s, 0)) + v(y - Vec2(s, 0)) + v(y + Vec2(0, s)) + v(y - Vec2(0, s)) - 4.0 * v(y)) / (s * s);
  };
  return (4.0 * five(0.5 * h) - five(h)) / 3.0;
}

}  // namespace

SciResult sci_check(const ConformalFactor& v1, const ConformalFactor& v2, const PlanarDomain& omega,
                    const SciOptions& options) {
  SciResult out;
  for (const Vec2& y : omega.boundary_samples(options.boundary_samples)) {
    out.boundary_gap = std::max(out.boundary_gap, std::abs(v1(y) - v2(y)));
  }

  const auto interior = omega.interior_samples(options.interior_samples);
  double margin12 = std::numeric_limits<double>::infinity();
  double margin21 = std::numeric_limits<double>::infinity();
  double separation = 0.0;
  out.min_f = std::numeric_limits<double>::infinity();
  bool f_ok = true;
  // f at each sample for v1 and v2, with the scale used for the tolerance
  std::vector<std::array<double, 3>> fs;
  fs.reserve(interior.size());
  constexpr double h = 1e-3;
  for (const Vec2& y : interior) {
    const double a = v1(y), b = v2(y);
    margin12 = std::min(margin12, b - a);
    margin21 = std::min(margin21, a - b);
    separation = std::max(separation, std::abs(b - a));
    std::array<double, 3> row{0.0, 0.0, 1.0};
    int i = 0;
    for (const auto* v : {&v1, &v2}) {
      const double e2v = std::exp(2.0 * (*v)(y));
      const double f = fd_laplacian(*v, y, h) + e2v;
      out.min_f = std::min(out.min_f, f);
      if (f < -1e-6 * (1.0 + e2v)) f_ok = false;
      row[i++] = f;
      row[2] += e2v;
    }
    fs.push_back(row);
  }
  out.ordering_margin = std::max(margin12, margin21);
  // the upper factor must carry the larger f
  const bool two_on_top = margin12 >= margin21;
  bool f_ordered = true;
  for (const auto& row : fs) {
    const double upper = two_on_top ? row[1] : row[0], lower = two_on_top ? row[0] : row[1];
    if (upper < lower - 1e-6 * row[2]) f_ordered = false;
  }

  if (out.boundary_gap > options.boundary_tolerance) {
    out.reason = "v1 != v2 on the boundary";
  } else if (out.ordering_margin < -options.ordering_tolerance) {
    out.reason = "v1 and v2 are not ordered";
  } else if (separation <= options.ordering_tolerance) {
    out.reason = "v1 and v2 coincide";
  } else if (!f_ok) {
    out.reason = "Lap v + e^{2v} is negative somewhere";
  } else if (!f_ordered) {
    out.reason = "the upper factor has the smaller f";
  }

  out.mass = omega.integrate([&](const Vec2& y) { return std::exp(2.0 * v1(y)) + std::exp(2.0 * v2(y)); });
  if (!out.reason.empty()) {
    out.verdict = SciResult::Verdict::Inapplicable;
  } else {
    out.verdict = out.mass >= 4.0 * kPi - 1e-6 ? SciResult::Verdict::Holds : SciResult::Verdict::Fails;
  }
  return out;
}

ConformalFactor cap_factor(double lambda) {
  if (!(lambda > 0.0)) throw ValidationError("cap scale must be positive");
  return [lambda](const Vec2& y) {
    return std::log(2.0 * lambda) - std::log1p(lambda * lambda * y.squaredNorm());
  };
}

ConformalFactor curvature_factor(double mu, double curvature) {
  if (!(mu > 0.0) || !(curvature > 0.0)) throw ValidationError("scale and curvature must be positive");
  return [mu, curvature](const Vec2& y) {
    return std::log(2.0 * mu) - 0.5 * std::log(curvature) - std::log1p(mu * mu * y.squaredNorm());
  };
}

double matching_curvature_scale(double lambda, double curvature) {
  if (!(lambda > 0.0) || !(curvature > 0.0)) throw ValidationError("scale and curvature must be positive");
  const double c = std::sqrt(curvature) * lambda / (1.0 + lambda * lambda);
  if (c > 0.5) throw ValidationError("no curvature factor matches the cap on the unit circle");
  // c mu^2 - mu + c = 0, larger root written without cancellation via the smaller one.
  const double disc = std::sqrt(std::max(0.0, 1.0 - 4.0 * c * c));
  const double small = 2.0 * c / (1.0 + disc);
  return 1.0 / small;
}

// --- reflected pairs -------------------------------------------------------------------

ReflectedPairs reflected_pair_mass(const SphereField& u, double alpha, const Vec3& y, int refine) {
  if (!(alpha > 0.0)) throw ValidationError("alpha must be positive");
  ReflectedPairs out;
  out.total_bound = 8.0 * kPi / alpha;
  if (reflection_defect(u, y) <= 1e-8) {
    out.symmetric = true;
    return out;
  }
  const NodalDecomposition nodal = nodal_regions(u, y, kZeroEpsilon, refine);
  out.inconclusive = nodal.inconclusive;
  const ReflectionFrame frame = reflection_frame(u, y);
  const GridPtr eval = nodal_grid(u, refine);
  const Eigen::VectorXd a = eval->synthesize(frame.rotated);
  const Eigen::VectorXd b = eval->synthesize(frame.reflected);
  for (const NodalRegion& region : nodal.regions) {
    if (region.sign <= 0) continue;
    double mass = 0.0;
    for (int i : region.members) mass += eval->weights()[i] * (std::exp(a[i]) + std::exp(b[i]));
    out.masses.push_back(2.0 / alpha * mass);
    out.areas.push_back(region.area);
    out.total += out.masses.back();
  }
  return out;
}

}  // namespace mfe
