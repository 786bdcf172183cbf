#include "mfe/symmetry.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <complex>
#include <deque>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>

#include "mfe/errors.hpp"
#include "mfe/mfe_core.hpp"
#include "mfe/parallel.hpp"
#include "mfe/rotation.hpp"

namespace mfe {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require_unit(const Vec3& y) {
  if (!(std::abs(y.norm() - 1.0) < 1e-12)) throw ValidationError("axis must be a unit vector");
}

/// g(t) = a0 + sum_m a_m cos(m t) + b_m sin(m t)
struct TrigSeries {
  Eigen::VectorXd a;
  Eigen::VectorXd b;

  std::pair<double, double> value_and_derivative(double t) const {
    const std::complex<double> z = std::polar(1.0, t);
    std::complex<double> zm = 1.0;
    double v = a[0], d = 0.0;
    for (Eigen::Index m = 1; m < a.size(); ++m) {
      zm *= z;
      v += a[m] * zm.real() + b[m] * zm.imag();
      d += m * (b[m] * zm.real() - a[m] * zm.imag());
    }
    return {v, d};
  }
};

/// Profile series of -d/dtheta on the equator of a field given in the rotated frame.
TrigSeries equator_gradient_series(const Eigen::VectorXd& rotated, const SphereGrid& grid) {
  const int L = grid.bandlimit();
  const LegendreTable& eq = grid.equator_table();
  TrigSeries s{Eigen::VectorXd::Zero(L + 1), Eigen::VectorXd::Zero(L + 1)};
  for (int m = 0; m <= L; ++m) {
    const Eigen::MatrixXd& d = eq.dtheta(m);
    double cos_part = 0.0, sin_part = 0.0;
    for (int k = m; k <= L; ++k) {
      cos_part += rotated[harmonic_index(k, m)] * d(0, k - m);
      if (m > 0) sin_part += rotated[harmonic_index(k, -m)] * d(0, k - m);
    }
    const double scale = m == 0 ? 1.0 : std::numbers::sqrt2;
    s.a[m] = -scale * cos_part;
    s.b[m] = -scale * sin_part;
  }
  return s;
}

Eigen::VectorXd parity_flip(const Eigen::VectorXd& c) {
  const int L = bandlimit_of(c.size());
  Eigen::VectorXd out = c;
  for (int k = 0; k <= L; ++k)
    for (int m = -k; m <= k; ++m)
      if ((k + std::abs(m)) % 2 != 0) out[harmonic_index(k, m)] = -out[harmonic_index(k, m)];
  return out;
}

/// Safeguarded Newton-bisection for a sign change of g on [lo, hi].
double refine_root(const std::function<double(double)>& g, const std::function<double(double)>& dg, double lo,
                   double hi) {
  double flo = g(lo);
  double t = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double f = g(t);
    if (f == 0.0) return t;
    if ((f > 0.0) == (flo > 0.0)) {
      lo = t;
      flo = f;
    } else {
      hi = t;
    }
    if (hi - lo < 1e-15 || std::abs(f) < 1e-15) break;
    const double d = dg(t);
    double next = d != 0.0 ? t - f / d : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    t = next;
  }
  return t;
}

/// Newton on g' near t for a local extremum of g.
double refine_extremum(const std::function<double(double)>& dg, double t, double spacing) {
  const double h = 1e-6;
  const double lo = t - spacing, hi = t + spacing;
  for (int it = 0; it < 60; ++it) {
    const double d = dg(t);
    const double dd = (dg(t + h) - dg(t - h)) / (2.0 * h);
    if (dd == 0.0) break;
    const double step = d / dd;
    t = std::clamp(t - step, lo, hi);
    if (std::abs(step) < 1e-15) break;
  }
  return t;
}

double wrap_angle(double t) {
  t = std::fmod(t, kTwoPi);
  return t < 0.0 ? t + kTwoPi : t;
}

}  // namespace

std::string to_string(AxisClass c) {
  switch (c) {
    case AxisClass::S2:
      return "S2";
    case AxisClass::S1:
      return "S1";
    case AxisClass::HViolation:
      return "H_violation";
    case AxisClass::Degenerate:
      return "degenerate";
    case AxisClass::MultiZero:
      return "multi_zero";
  }
  return "unknown";
}

std::string to_string(CircleZero::Kind k) {
  switch (k) {
    case CircleZero::Kind::PlusToMinus:
      return "+-";
    case CircleZero::Kind::MinusToPlus:
      return "-+";
    case CircleZero::Kind::Tangential:
      return "tangential";
  }
  return "unknown";
}

std::string to_string(ThreeZeroResult::Status s) {
  switch (s) {
    case ThreeZeroResult::Status::NotApplicable:
      return "not_applicable";
    case ThreeZeroResult::Status::Consistent:
      return "consistent";
    case ThreeZeroResult::Status::Violation:
      return "violation";
  }
  return "unknown";
}

Vec3 GreatCircleProfile::point(double t) const { return std::cos(t) * e1 + std::sin(t) * e2; }

int GreatCircleProfile::sign_changes() const {
  return static_cast<int>(std::count_if(zeros.begin(), zeros.end(),
                                        [](const CircleZero& z) { return z.kind != CircleZero::Kind::Tangential; }));
}

int GreatCircleProfile::transversal_zeros() const {
  return static_cast<int>(std::count_if(zeros.begin(), zeros.end(), [](const CircleZero& z) { return z.transversal; }));
}

GreatCircleProfile make_profile(const Vec3& axis, const std::function<double(double)>& g,
                                const std::function<double(double)>& dg, int n, int detect_n) {
  if (n < kMinProfileSamples) throw ValidationError("great-circle profiles need at least 128 samples");
  require_unit(axis);
  GreatCircleProfile p;
  p.axis = axis;
  const Mat3 back = rotation_to_pole(axis).transpose();
  p.e1 = back.col(0);
  p.e2 = back.col(1);
  p.angles.resize(n);
  p.samples.resize(n);
  for (int i = 0; i < n; ++i) {
    p.angles[i] = kTwoPi * i / n;
    p.samples[i] = g(p.angles[i]);
  }

  const int N = std::max(n, detect_n);
  std::vector<double> t(N), v(N);
  double peak = 0.0;
  for (int i = 0; i < N; ++i) {
    t[i] = kTwoPi * i / N;
    v[i] = N == n ? p.samples[i] : g(t[i]);
    peak = std::max(peak, std::abs(v[i]));
  }
  if (peak < kZeroEpsilon) {
    p.axis_class = AxisClass::Degenerate;
    return p;
  }

  auto add_zero = [&](double angle, CircleZero::Kind kind) {
    angle = wrap_angle(angle);
    for (const auto& z : p.zeros) {
      const double d = std::abs(z.angle - angle);
      if (std::min(d, kTwoPi - d) < 1e-9) return;
    }
    CircleZero z;
    z.angle = angle;
    z.point = p.point(angle);
    z.value = g(angle);
    z.slope = dg(angle);
    z.kind = kind;
    z.transversal = kind != CircleZero::Kind::Tangential && std::abs(z.slope) > kTransversalSlope;
    p.zeros.push_back(z);
  };

  // Samples within roundoff of zero carry no sign; sign changes are read across them.
  const double spacing = kTwoPi / N;
  const double noise = 64.0 * std::numeric_limits<double>::epsilon() * peak;
  std::vector<int> sign(N);
  for (int i = 0; i < N; ++i) sign[i] = v[i] > noise ? 1 : (v[i] < -noise ? -1 : 0);
  int first = 0;
  while (sign[first] == 0) ++first;
  int i = first;
  do {
    int j = (i + 1) % N, gap = 0;
    while (sign[j] == 0) {
      j = (j + 1) % N;
      ++gap;
    }
    if (sign[i] != sign[j]) {
      const double root = refine_root(g, dg, t[i], t[i] + spacing * (gap + 1));
      add_zero(root, sign[i] > 0 ? CircleZero::Kind::PlusToMinus : CircleZero::Kind::MinusToPlus);
    } else if (gap > 0) {
      // touches zero without crossing
      int k = (i + 1) % N;
      for (int m = 1; m <= gap; ++m) {
        const int c = (i + m) % N;
        if (std::abs(v[c]) < std::abs(v[k])) k = c;
      }
      const double te = refine_extremum(dg, t[k], spacing);
      add_zero(std::abs(g(te)) < std::abs(v[k]) ? te : t[k], CircleZero::Kind::Tangential);
    }
    i = j;
  } while (i != first);
  // Tangential zeros between samples: local minima of |g| without a neighbouring sign change.
  for (int i = 0; i < N; ++i) {
    const int prev = (i + N - 1) % N, next = (i + 1) % N;
    if (sign[i] == 0 || sign[prev] != sign[i] || sign[next] != sign[i]) continue;
    if (!(std::abs(v[i]) <= std::abs(v[prev]) && std::abs(v[i]) <= std::abs(v[next]))) continue;
    const double te = refine_extremum(dg, t[i], spacing);
    const double ge = g(te);
    if (std::abs(ge) < kZeroEpsilon) add_zero(te, CircleZero::Kind::Tangential);
  }
  std::sort(p.zeros.begin(), p.zeros.end(), [](const CircleZero& a, const CircleZero& b) { return a.angle < b.angle; });

  const int count = static_cast<int>(p.zeros.size());
  if (count == 0) {
    p.axis_class = AxisClass::HViolation;
  } else if (count == 1) {
    p.axis_class = AxisClass::S1;
  } else if (count == 2 && p.zeros[0].transversal && p.zeros[1].transversal) {
    p.axis_class = AxisClass::S2;
  } else {
    p.axis_class = AxisClass::MultiZero;
  }
  return p;
}

namespace {

GreatCircleProfile profile_from_rotated(const Eigen::VectorXd& rotated, const SphereGrid& grid, const Vec3& y, int n) {
  const TrigSeries series = equator_gradient_series(rotated, grid);
  return make_profile(
      y, [&](double t) { return series.value_and_derivative(t).first; },
      [&](double t) { return series.value_and_derivative(t).second; }, n, 8 * (grid.bandlimit() + 1));
}

}  // namespace

GreatCircleProfile circle_profile(const SphereField& u, const Vec3& y, int n) {
  if (n < kMinProfileSamples) throw ValidationError("great-circle profiles need at least 128 samples");
  require_unit(y);
  const Eigen::VectorXd rotated = rotate_coefficients(u.coeffs(), rotation_to_pole(y));
  return profile_from_rotated(rotated, u.grid(), y, n);
}

std::vector<Vec3> fibonacci_axes(int n) {
  if (n <= 0) throw ValidationError("axis count must be positive");
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  std::vector<Vec3> axes(n);
  for (int i = 0; i < n; ++i) {
    const double z = (i + 0.5) / n;
    const double r = std::sqrt(1.0 - z * z);
    const double phi = golden * i;
    axes[i] = Vec3(r * std::cos(phi), r * std::sin(phi), z);
  }
  return axes;
}

namespace {

HypothesisVerdict hypothesis_from_classes(const std::vector<Vec3>& axes, std::vector<AxisClass> classes) {
  HypothesisVerdict v;
  for (std::size_t i = 0; i < axes.size(); ++i) {
    switch (classes[i]) {
      case AxisClass::S2:
        ++v.count_s2;
        break;
      case AxisClass::S1:
        ++v.count_s1;
        break;
      case AxisClass::HViolation:
        ++v.count_violation;
        v.violating_axes.push_back(axes[i]);
        break;
      case AxisClass::Degenerate:
        ++v.count_degenerate;
        break;
      case AxisClass::MultiZero:
        ++v.count_multi;
        break;
    }
  }
  v.holds = v.count_violation == 0;
  v.classes = std::move(classes);
  return v;
}

}  // namespace

HypothesisVerdict check_hypothesis_H(const SphereField& u, const std::vector<Vec3>& axes, int n) {
  if (axes.size() < 500) throw ValidationError("hypothesis (H) check needs at least 500 axes");
  std::vector<AxisClass> classes(axes.size());
  parallel_for(axes.size(), [&](std::size_t i) { classes[i] = circle_profile(u, axes[i], n).axis_class; });
  return hypothesis_from_classes(axes, std::move(classes));
}

ThreeZeroResult three_zero_test(const SphereField& u, const Vec3& y, double alpha, int n) {
  ThreeZeroResult r;
  const GreatCircleProfile p = circle_profile(u, y, n);
  r.zeros = p.transversal_zeros();
  const bool triggered = r.zeros >= 3 || p.axis_class == AxisClass::Degenerate;
  if (!triggered) return r;
  if (!(alpha > 0.0) || residual(u, alpha).sup_norm() > 1e-6) return r;
  r.defect = reflection_defect(u, y);
  r.status = r.defect < 1e-5 ? ThreeZeroResult::Status::Consistent : ThreeZeroResult::Status::Violation;
  return r;
}

FieldValue vector_field_F(const GreatCircleProfile& profile) {
  FieldValue f;
  const Vec3& y = profile.axis;
  if (profile.axis_class == AxisClass::S2) {
    const CircleZero* p1 = nullptr;
    const CircleZero* p2 = nullptr;
    for (const auto& z : profile.zeros) {
      if (z.kind == CircleZero::Kind::PlusToMinus) p1 = &z;
      if (z.kind == CircleZero::Kind::MinusToPlus) p2 = &z;
    }
    if (!p1 || !p2) return f;
    Vec3 chord = p2->point - p1->point;
    chord -= chord.dot(y) * y;
    if (chord.norm() < 1e-12) {
      f.status = FieldValue::Status::AntipodalDegenerate;
      return f;
    }
    f.status = FieldValue::Status::Defined;
    f.value = chord.normalized();
    return f;
  }
  if (profile.axis_class == AxisClass::S1) {
    const Vec3 ccw = y.cross(profile.zeros.front().point).normalized();
    const bool nonnegative = profile.samples.minCoeff() > -kZeroEpsilon;
    f.status = FieldValue::Status::Defined;
    f.value = nonnegative ? ccw : Vec3(-ccw);
    return f;
  }
  return f;
}

FieldValue vector_field_F(const SphereField& u, const Vec3& y, int n) { return vector_field_F(circle_profile(u, y, n)); }

// --- degree ----------------------------------------------------------------------------

Triangulation icosphere(int subdivisions) {
  if (subdivisions < 0) throw ValidationError("subdivision level must be nonnegative");
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  Triangulation mesh;
  for (const Vec3& v : {Vec3(-1, t, 0), Vec3(1, t, 0), Vec3(-1, -t, 0), Vec3(1, -t, 0), Vec3(0, -1, t), Vec3(0, 1, t),
                        Vec3(0, -1, -t), Vec3(0, 1, -t), Vec3(t, 0, -1), Vec3(t, 0, 1), Vec3(-t, 0, -1), Vec3(-t, 0, 1)})
    mesh.vertices.push_back(v.normalized());
  mesh.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      mesh.vertices.push_back((mesh.vertices[a] + mesh.vertices[b]).normalized());
      const int idx = static_cast<int>(mesh.vertices.size()) - 1;
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<int, 3>> faces;
    faces.reserve(mesh.faces.size() * 4);
    for (const auto& f : mesh.faces) {
      const int a = mid(f[0], f[1]), b = mid(f[1], f[2]), c = mid(f[2], f[0]);
      faces.push_back({f[0], a, c});
      faces.push_back({f[1], b, a});
      faces.push_back({f[2], c, b});
      faces.push_back({a, b, c});
    }
    mesh.faces = std::move(faces);
  }
  return mesh;
}

DegreeResult field_degree(const std::function<std::optional<Vec3>(const Vec3&)>& field, const Triangulation& mesh) {
  std::vector<std::optional<Vec3>> values(mesh.vertices.size());
  parallel_for(values.size(), [&](std::size_t i) { values[i] = field(mesh.vertices[i]); });
  DegreeResult r;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (!values[i]) r.absence_set.push_back(mesh.vertices[i]);
  if (!r.absence_set.empty()) return r;
  r.defined = true;
  r.face_winding.resize(mesh.faces.size());
  double total = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& face = mesh.faces[f];
    const Vec3 c = (mesh.vertices[face[0]] + mesh.vertices[face[1]] + mesh.vertices[face[2]]).normalized();
    // Outward-oriented tangent frame at the centroid.
    const Mat3 back = rotation_to_pole(c).transpose();
    const Vec3 ex = back.col(0), ey = back.col(1);
    // Faces are oriented counterclockwise seen from outside.
    const Vec3 n = (mesh.vertices[face[1]] - mesh.vertices[face[0]]).cross(mesh.vertices[face[2]] - mesh.vertices[face[0]]);
    const double orientation = n.dot(c) >= 0.0 ? 1.0 : -1.0;
    double sum = 0.0;
    for (int k = 0; k < 3; ++k) {
      const Vec3 a = *values[face[k]];
      const Vec3 b = *values[face[(k + 1) % 3]];
      const double aa = std::atan2(a.dot(ey), a.dot(ex));
      const double bb = std::atan2(b.dot(ey), b.dot(ex));
      double d = bb - aa;
      while (d > std::numbers::pi) d -= kTwoPi;
      while (d <= -std::numbers::pi) d += kTwoPi;
      sum += d;
    }
    const int w = static_cast<int>(std::lround(orientation * sum / kTwoPi));
    r.face_winding[f] = w;
    if (w != 0) r.singular_faces.push_back(static_cast<int>(f));
    total += w;
  }
  r.degree = static_cast<int>(std::lround(total));
  r.matches_euler_characteristic = r.degree == 2;
  return r;
}

DegreeResult field_degree(const SphereField& u, int subdivisions, int n) {
  const Triangulation mesh = icosphere(subdivisions);
  return field_degree(
      [&](const Vec3& y) -> std::optional<Vec3> {
        const FieldValue f = vector_field_F(u, y, n);
        if (f.status != FieldValue::Status::Defined) return std::nullopt;
        return f.value;
      },
      mesh);
}

// --- reflection and nodal sets ---------------------------------------------------------

ReflectionFrame reflection_frame(const SphereField& u, const Vec3& y) {
  require_unit(y);
  ReflectionFrame f;
  f.rotation = rotation_to_pole(y);
  f.rotated = rotate_coefficients(u.coeffs(), f.rotation);
  f.reflected = parity_flip(f.rotated);
  f.phi = f.rotated - f.reflected;
  return f;
}

double reflection_defect(const SphereField& u, const Vec3& y) {
  const ReflectionFrame f = reflection_frame(u, y);
  return refined_sup_norm(f.phi, u.grid());
}

GridPtr nodal_grid(const SphereField& u, int refine) {
  if (refine < 1) throw ValidationError("refinement factor must be at least 1");
  static std::mutex mutex;
  static std::map<std::tuple<int, int, int>, GridPtr> cache;
  const auto key = std::make_tuple(u.bandlimit(), u.grid().n_theta() * refine, u.grid().n_phi() * refine);
  std::lock_guard lock(mutex);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto grid = std::make_shared<const SphereGrid>(std::get<0>(key), std::get<1>(key), std::get<2>(key), false);
  cache.emplace(key, grid);
  return grid;
}

namespace {

/// Neighbours on a Gauss-Legendre grid: along rings, between rings, and across the poles.
template <typename Visit>
void for_each_neighbour(int j, int p, int nt, int np, Visit&& visit) {
  visit(j, (p + 1) % np);
  visit(j, (p + np - 1) % np);
  if (j > 0) visit(j - 1, p);
  if (j + 1 < nt) visit(j + 1, p);
  if (j == 0 || j + 1 == nt) visit(j, (p + np / 2) % np);
}

}  // namespace

NodalDecomposition nodal_regions(const SphereField& u, const Vec3& y, double tau, int refine) {
  const ReflectionFrame frame = reflection_frame(u, y);
  if (!(refined_sup_norm(frame.phi, u.grid()) > 1e-8)) {
    throw ValidationError("reflection defect too small for a nodal decomposition");
  }
  const GridPtr eval = nodal_grid(u, refine);
  const Eigen::VectorXd phi = eval->synthesize(frame.phi);
  const int nt = eval->n_theta(), np = eval->n_phi();

  NodalDecomposition out;
  out.axis = y;
  std::vector<int> label(phi.size(), -1);
  auto sign_of = [&](Eigen::Index i) { return phi[i] > tau ? 1 : (phi[i] < -tau ? -1 : 0); };
  for (Eigen::Index start = 0; start < phi.size(); ++start) {
    const int s = sign_of(start);
    if (s == 0 || label[start] >= 0) continue;
    NodalRegion region;
    region.sign = s;
    const int id = static_cast<int>(out.regions.size());
    std::deque<int> queue{static_cast<int>(start)};
    label[start] = id;
    while (!queue.empty()) {
      const int i = queue.front();
      queue.pop_front();
      region.members.push_back(i);
      region.area += eval->weights()[i];
      for_each_neighbour(i / np, i % np, nt, np, [&](int jj, int pp) {
        const int k = jj * np + pp;
        if (label[k] < 0 && sign_of(k) == s) {
          label[k] = id;
          queue.push_back(k);
        }
      });
    }
    region.nodes = static_cast<int>(region.members.size());
    if (region.nodes < 8) out.inconclusive = true;
    out.regions.push_back(std::move(region));
  }
  out.sup_norm = u.sup_norm();
  out.area_bound = 8.0 * std::numbers::pi / (2.0 * std::exp(out.sup_norm));
  out.min_area = out.regions.empty() ? 0.0 : std::numeric_limits<double>::infinity();
  for (const auto& r : out.regions) out.min_area = std::min(out.min_area, r.area);
  out.area_bound_holds = out.min_area >= out.area_bound - 1e-3;
  return out;
}

// --- axis detection --------------------------------------------------------------------

namespace {

/// Compass search on the sphere in the tangent plane of the current axis.
void pattern_search(const std::function<double(const Vec3&)>& objective, Vec3& axis, double& value) {
  double step = 1e-2;
  while (step > 1e-12) {
    bool improved = false;
    const Mat3 back = rotation_to_pole(axis).transpose();
    for (const Vec3& dir : {Vec3(back.col(0)), Vec3(-back.col(0)), Vec3(back.col(1)), Vec3(-back.col(1))}) {
      const Vec3 trial = (axis + step * dir).normalized();
      const double d = objective(trial);
      if (d < value) {
        value = d;
        axis = trial;
        improved = true;
        break;
      }
    }
    if (!improved) step *= 0.5;
  }
}

}  // namespace

double axis_deviation(const SphereField& u, const Vec3& axis) {
  Eigen::VectorXd rotated = rotate_coefficients(u.coeffs(), rotation_to_pole(axis.normalized()));
  const int L = u.bandlimit();
  for (int k = 0; k <= L; ++k) rotated[harmonic_index(k, 0)] = 0.0;
  return u.grid().synthesize(rotated).cwiseAbs().maxCoeff();
}

AxisDetection detect_axis(const SphereField& u) {
  const SphereGrid& grid = u.grid();
  const Eigen::VectorXd& c = u.coeffs();
  if (c.tail(c.size() - 1).cwiseAbs().maxCoeff() < 1e-14) throw ValidationError("detect_axis requires a nonconstant field");

  std::vector<Vec3> candidates;
  const Vec3 dipole(c[harmonic_index(1, 1)], c[harmonic_index(1, -1)], c[harmonic_index(1, 0)]);
  if (dipole.norm() > 1e-14) candidates.push_back(dipole.normalized());

  Mat3 quad = Mat3::Zero(), grad_tensor = Mat3::Zero();
  const auto grad = grid.synthesize_gradient(c);
  const Eigen::MatrixX3d& x = grid.nodes();
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const double w = grid.weights()[i];
    const Vec3 xi = x.row(i).transpose();
    const Vec3 gi(grad[0][i], grad[1][i], grad[2][i]);
    quad += w * u.values()[i] * (xi * xi.transpose());
    grad_tensor += w * (gi * gi.transpose());
  }
  for (const Mat3& m : {quad, grad_tensor}) {
    const Eigen::SelfAdjointEigenSolver<Mat3> eig(m);
    for (int k = 0; k < 3; ++k) candidates.push_back(eig.eigenvectors().col(k).normalized());
  }

  AxisDetection best;
  best.deviation = std::numeric_limits<double>::infinity();
  for (const Vec3& a : candidates) {
    const double d = axis_deviation(u, a);
    if (d < best.deviation) {
      best.deviation = d;
      best.axis = a;
    }
  }

  pattern_search([&](const Vec3& a) { return axis_deviation(u, a); }, best.axis, best.deviation);
  // Report the axis in the upper hemisphere (axes are unoriented).
  if (best.axis.z() < 0.0 || (best.axis.z() == 0.0 && best.axis.x() < 0.0)) best.axis = -best.axis;
  best.found = best.deviation <= 0.1;
  return best;
}

// --- critical points -------------------------------------------------------------------

namespace {

struct Refined {
  Vec3 point;
  double gradient = 0.0;
  /// Smallest singular value of the chart Jacobian of the gradient (Hessian).
  double hessian_min = 0.0;
};

Refined refine_critical(const Eigen::VectorXd& coeffs, Vec3 x) {
  const double h = 1e-6;
  for (int it = 0; it < 50; ++it) {
    const Vec3 g = surface_gradient(coeffs, x);
    if (g.norm() < 1e-13) break;
    const Mat3 back = rotation_to_pole(x).transpose();
    const Vec3 ea = back.col(0), eb = back.col(1);
    auto chart = [&](double s, double t) { return Vec3((x + s * ea + t * eb).normalized()); };
    auto residual = [&](double s, double t) {
      const Vec3 gp = surface_gradient(coeffs, chart(s, t));
      return Eigen::Vector2d(gp.dot(ea), gp.dot(eb));
    };
    Eigen::Matrix2d jac;
    jac.col(0) = (residual(h, 0) - residual(-h, 0)) / (2 * h);
    jac.col(1) = (residual(0, h) - residual(0, -h)) / (2 * h);
    const Eigen::Vector2d f(g.dot(ea), g.dot(eb));
    const Eigen::Vector2d step = jac.jacobiSvd(Eigen::ComputeFullU | Eigen::ComputeFullV).solve(-f);
    if (!step.allFinite()) break;
    const double len = step.norm();
    const Eigen::Vector2d clipped = len > 0.1 ? Eigen::Vector2d(step * (0.1 / len)) : step;
    x = chart(clipped[0], clipped[1]);
    if (len < 1e-15) break;
  }
  const Mat3 back = rotation_to_pole(x).transpose();
  const Vec3 ea = back.col(0), eb = back.col(1);
  auto tangential = [&](double s, double t) {
    const Vec3 gp = surface_gradient(coeffs, Vec3((x + s * ea + t * eb).normalized()));
    return Eigen::Vector2d(gp.dot(ea), gp.dot(eb));
  };
  Eigen::Matrix2d hess;
  hess.col(0) = (tangential(h, 0) - tangential(-h, 0)) / (2 * h);
  hess.col(1) = (tangential(0, h) - tangential(0, -h)) / (2 * h);
  return {x, surface_gradient(coeffs, x).norm(), hess.jacobiSvd().singularValues().minCoeff()};
}

}  // namespace

CriticalPairResult antipodal_critical_pair(const SphereField& u) {
  const SphereGrid& grid = u.grid();
  const Eigen::VectorXd& c = u.coeffs();
  CriticalPairResult out;
  const auto grad = grid.synthesize_gradient(c);
  const Eigen::VectorXd g2 = grad[0].cwiseAbs2() + grad[1].cwiseAbs2() + grad[2].cwiseAbs2();
  if (g2.maxCoeff() < 1e-16) {
    out.degenerate = true;
    return out;
  }
  const int nt = grid.n_theta(), np = grid.n_phi();
  std::vector<int> minima;
  for (int i = 0; i < static_cast<int>(g2.size()); ++i) {
    bool is_min = true;
    for_each_neighbour(i / np, i % np, nt, np, [&](int jj, int pp) {
      if (g2[jj * np + pp] < g2[i]) is_min = false;
    });
    if (is_min) minima.push_back(i);
  }
  std::sort(minima.begin(), minima.end(), [&](int a, int b) { return g2[a] < g2[b]; });
  if (minima.size() > 64) minima.resize(64);

  std::vector<Refined> critical;
  for (int i : minima) {
    const Refined r = refine_critical(c, grid.node(i));
    if (r.gradient >= 1e-8) continue;
    bool duplicate = false;
    for (const auto& q : critical) duplicate = duplicate || (q.point - r.point).norm() < 1e-6;
    if (!duplicate) critical.push_back(r);
  }
  for (const auto& r : critical) {
    bool seen = false;
    for (const auto& pair : out.pairs)
      seen = seen || (pair.point - r.point).norm() < 1e-6 || (pair.point + r.point).norm() < 1e-6;
    if (seen) continue;
    const Refined opposite = refine_critical(c, -r.point);
    if (opposite.gradient >= 1e-8 || (opposite.point + r.point).norm() > 1e-6) continue;
    CriticalPair pair;
    pair.point = r.point;
    pair.gradient_plus = r.gradient;
    pair.gradient_minus = opposite.gradient;
    pair.value_plus = evaluate(c, r.point);
    pair.value_minus = evaluate(c, opposite.point);
    pair.isolated = std::min(r.hessian_min, opposite.hessian_min) > 1e-6;
    out.pairs.push_back(pair);
  }
  std::stable_partition(out.pairs.begin(), out.pairs.end(), [](const CriticalPair& p) { return p.isolated; });
  return out;
}

// --- report ----------------------------------------------------------------------------

SymmetryReport symmetry_report(const SphereField& u, const SymmetryOptions& options) {
  SymmetryReport report;
  const std::vector<Vec3> axes = fibonacci_axes(options.axes);
  report.axes.resize(axes.size());
  const SphereGrid& grid = u.grid();
  parallel_for(axes.size(), [&](std::size_t i) {
    const ReflectionFrame frame = reflection_frame(u, axes[i]);
    const GreatCircleProfile profile = profile_from_rotated(frame.rotated, grid, axes[i], options.samples);
    AxisRecord& rec = report.axes[i];
    rec.axis = axes[i];
    rec.axis_class = profile.axis_class;
    rec.zeros = profile.zeros;
    rec.field = vector_field_F(profile);
    rec.defect = refined_sup_norm(frame.phi, grid);
  });
  std::vector<AxisClass> classes;
  for (const auto& rec : report.axes) classes.push_back(rec.axis_class);
  report.hypothesis = hypothesis_from_classes(axes, std::move(classes));

  report.best_reflection_defect = std::numeric_limits<double>::infinity();
  for (const auto& rec : report.axes) {
    if (rec.defect < report.best_reflection_defect) {
      report.best_reflection_defect = rec.defect;
      report.best_reflection_axis = rec.axis;
    }
  }
  if (report.best_reflection_defect > 0.0) {
    pattern_search([&](const Vec3& a) { return reflection_defect(u, a); }, report.best_reflection_axis,
                   report.best_reflection_defect);
  }
  const Eigen::VectorXd& c = u.coeffs();
  report.constant = c.size() <= 1 || c.tail(c.size() - 1).cwiseAbs().maxCoeff() < 1e-14;
  if (!report.constant) report.rotation_axis = detect_axis(u);

  int examined = 0;
  for (std::size_t i = 0; i < report.axes.size() && examined < options.nodal_axes; ++i) {
    if (report.axes[i].defect <= 1e-8) continue;
    report.nodal_counts.emplace_back(static_cast<int>(i), nodal_regions(u, axes[i], 1e-9, 2).count());
    ++examined;
  }
  return report;
}

}  // namespace mfe
