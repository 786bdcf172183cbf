#include "mfe/sphere_grid.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <string>
#include <tuple>

#include "mfe/errors.hpp"

namespace mfe {

namespace {

constexpr double kPi = std::numbers::pi;

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

int bandlimit_of(Eigen::Index coefficient_count) {
  const auto root = static_cast<int>(std::lround(std::sqrt(static_cast<double>(coefficient_count))));
  if (root < 1 || Eigen::Index(root) * root != coefficient_count) {
    throw ValidationError("coefficient count " + std::to_string(coefficient_count) +
                          " is not (L+1)^2");
  }
  return root - 1;
}

QuadratureRule gauss_legendre(int n, double a, double b) {
  if (n < 1) throw ValidationError("gauss_legendre: need at least one node");
  Eigen::VectorXd x(n), w(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    // Recompute the derivative at the converged node for the weight.
    double p0 = 1.0, p1 = z;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    if (n == 1) {
      p0 = 1.0;
      p1 = z;
    }
    dp = n * (z * p1 - p0) / (z * z - 1.0);
    const double weight = 2.0 / ((1.0 - z * z) * dp * dp);
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = weight;
    w[n - 1 - i] = weight;
  }
  if (n % 2 == 1) x[n / 2] = 0.0;
  const double half = 0.5 * (b - a);
  QuadratureRule rule;
  rule.nodes = (x.array() * half + 0.5 * (a + b)).matrix();
  rule.weights = w * half;
  return rule;
}

LegendrePoint evaluate_legendre(int bandlimit, double cos_t, double sin_t) {
  const int L = bandlimit;
  const std::size_t count = static_cast<std::size_t>((L + 1) * (L + 2) / 2);
  LegendrePoint p;
  p.value.assign(count, 0.0);
  p.dtheta.assign(count, 0.0);
  p.over_sin.assign(count, 0.0);

  double previous_diagonal = 1.0;
  for (int m = 0; m <= L; ++m) {
    double lam = 1.0;
    double mu = 0.0;
    if (m > 0) {
      const double c = std::sqrt((2.0 * m + 1.0) / (2.0 * m));
      mu = c * previous_diagonal;
      lam = c * sin_t * previous_diagonal;
    }
    previous_diagonal = lam;
    p.value[legendre_index(m, m)] = lam;
    p.over_sin[legendre_index(m, m)] = mu;
    if (m < L) {
      const double c = std::sqrt(2.0 * m + 3.0);
      p.value[legendre_index(m + 1, m)] = c * cos_t * lam;
      p.over_sin[legendre_index(m + 1, m)] = c * cos_t * mu;
    }
    for (int k = m + 2; k <= L; ++k) {
      const double kk = static_cast<double>(k) * k;
      const double mm = static_cast<double>(m) * m;
      const double a = std::sqrt((4.0 * kk - 1.0) / (kk - mm));
      const double b = std::sqrt(((k - 1.0) * (k - 1.0) - mm) / (4.0 * (k - 1.0) * (k - 1.0) - 1.0));
      p.value[legendre_index(k, m)] =
          a * (cos_t * p.value[legendre_index(k - 1, m)] - b * p.value[legendre_index(k - 2, m)]);
      p.over_sin[legendre_index(k, m)] =
          a * (cos_t * p.over_sin[legendre_index(k - 1, m)] - b * p.over_sin[legendre_index(k - 2, m)]);
    }
  }

  for (int k = 1; k <= L; ++k) {
    p.dtheta[legendre_index(k, 0)] = -std::sqrt(k * (k + 1.0)) * p.value[legendre_index(k, 1)];
  }
  for (int m = 1; m <= L; ++m) {
    for (int k = m; k <= L; ++k) {
      double d = k * cos_t * p.over_sin[legendre_index(k, m)];
      if (k > m) {
        const double c = std::sqrt((2.0 * k + 1.0) * (static_cast<double>(k) * k - m * m) / (2.0 * k - 1.0));
        d -= c * p.over_sin[legendre_index(k - 1, m)];
      }
      p.dtheta[legendre_index(k, m)] = d;
    }
  }
  return p;
}

LegendreTable::LegendreTable(int bandlimit, const Eigen::VectorXd& colatitudes)
    : bandlimit_(bandlimit), size_(colatitudes.size()) {
  const int L = bandlimit;
  value_.resize(L + 1);
  dtheta_.resize(L + 1);
  over_sin_.resize(L + 1);
  for (int m = 0; m <= L; ++m) {
    value_[m].resize(size_, L - m + 1);
    dtheta_[m].resize(size_, L - m + 1);
    over_sin_[m].resize(size_, L - m + 1);
  }
  for (Eigen::Index j = 0; j < size_; ++j) {
    const double t = colatitudes[j];
    const LegendrePoint p = evaluate_legendre(L, std::cos(t), std::sin(t));
    for (int m = 0; m <= L; ++m) {
      for (int k = m; k <= L; ++k) {
        value_[m](j, k - m) = p.value[legendre_index(k, m)];
        dtheta_[m](j, k - m) = p.dtheta[legendre_index(k, m)];
        over_sin_[m](j, k - m) = p.over_sin[legendre_index(k, m)];
      }
    }
  }
}

Eigen::MatrixXd longitude_basis(int bandlimit, int n_phi, bool derivative) {
  const int L = bandlimit;
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n_phi, 2 * L + 1);
  const double root2 = std::numbers::sqrt2;
  for (int p = 0; p < n_phi; ++p) {
    const double phi = 2.0 * kPi * p / n_phi;
    t(p, L) = derivative ? 0.0 : 1.0;
    for (int m = 1; m <= L; ++m) {
      const double c = std::cos(m * phi);
      const double s = std::sin(m * phi);
      if (derivative) {
        t(p, L + m) = -m * root2 * s;
        t(p, L - m) = m * root2 * c;
      } else {
        t(p, L + m) = root2 * c;
        t(p, L - m) = root2 * s;
      }
    }
  }
  return t;
}

Eigen::MatrixXd synthesize_rings(const Eigen::VectorXd& coeffs, const LegendreTable& table,
                                 const Eigen::MatrixXd& longitudes, RingComponent component) {
  const int Lc = bandlimit_of(coeffs.size());
  const int Lt = static_cast<int>((longitudes.cols() - 1) / 2);
  if (Lc > table.bandlimit() || Lc > Lt) {
    throw ResolutionError("bandlimit " + std::to_string(Lc) + " exceeds grid bandlimit " +
                          std::to_string(std::min(table.bandlimit(), Lt)));
  }
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(table.size(), longitudes.cols());
  Eigen::VectorXd slice(Lc + 1);
  for (int m = -Lc; m <= Lc; ++m) {
    const int am = std::abs(m);
    if (component == RingComponent::DPhiOverSin && m == 0) continue;
    const int n = Lc - am + 1;
    for (int k = am; k <= Lc; ++k) slice[k - am] = coeffs[harmonic_index(k, m)];
    const Eigen::MatrixXd& block = component == RingComponent::Value    ? table.value(am)
                                   : component == RingComponent::DTheta ? table.dtheta(am)
                                                                        : table.over_sin(am);
    f.col(m + Lt).noalias() = block.leftCols(n) * slice.head(n);
  }
  return f * longitudes.transpose();
}

SphereGrid::SphereGrid(int bandlimit, int n_theta, int n_phi, bool with_dealiasing)
    : bandlimit_(bandlimit), n_theta_(n_theta), n_phi_(n_phi) {
  if (bandlimit < 0) throw ResolutionError("bandlimit must be nonnegative");
  if (n_phi < 2 * bandlimit + 1) {
    throw ResolutionError("n_phi = " + std::to_string(n_phi) + " cannot resolve bandlimit " +
                          std::to_string(bandlimit) + " (need n_phi >= 2L+1)");
  }
  if (n_theta < bandlimit + 1) {
    throw ResolutionError("n_theta = " + std::to_string(n_theta) + " cannot resolve bandlimit " +
                          std::to_string(bandlimit) + " (need n_theta >= L+1)");
  }

  // Colatitudes ordered from the north pole southwards.
  const QuadratureRule gl = gauss_legendre(n_theta);
  theta_.resize(n_theta);
  ring_weights_.resize(n_theta);
  for (int j = 0; j < n_theta; ++j) {
    const double x = gl.nodes[n_theta - 1 - j];
    theta_[j] = std::acos(x);
    ring_weights_[j] = gl.weights[n_theta - 1 - j];
  }
  phi_.resize(n_phi);
  for (int p = 0; p < n_phi; ++p) phi_[p] = 2.0 * kPi * p / n_phi;

  node_weights_.resize(size());
  nodes_.resize(size(), 3);
  for (int j = 0; j < n_theta; ++j) {
    const double st = std::sin(theta_[j]);
    const double ct = std::cos(theta_[j]);
    for (int p = 0; p < n_phi; ++p) {
      const Eigen::Index i = Eigen::Index(j) * n_phi + p;
      node_weights_[i] = ring_weights_[j] * 2.0 * kPi / n_phi;
      nodes_(i, 0) = st * std::cos(phi_[p]);
      nodes_(i, 1) = st * std::sin(phi_[p]);
      nodes_(i, 2) = ct;
    }
  }

  trig_ = longitude_basis(bandlimit, n_phi, false);
  dtrig_ = longitude_basis(bandlimit, n_phi, true);
  table_ = std::make_unique<LegendreTable>(bandlimit, theta_);

  const QuadratureRule half = gauss_legendre(n_theta, 0.0, 1.0);
  Eigen::VectorXd half_theta(n_theta);
  for (int j = 0; j < n_theta; ++j) half_theta[j] = std::acos(half.nodes[j]);
  hemisphere_table_ = std::make_unique<LegendreTable>(bandlimit, half_theta);
  hemisphere_weights_ = half.weights;
  equator_table_ = std::make_unique<LegendreTable>(bandlimit, Eigen::VectorXd::Constant(1, kPi / 2));

  if (with_dealiasing) {
    const int fine_theta = (3 * (bandlimit + 1) + 1) / 2;
    if (fine_theta > n_theta) {
      fine_ = std::make_unique<SphereGrid>(bandlimit, fine_theta, 2 * fine_theta, false);
    }
  }
}

Eigen::VectorXd SphereGrid::synthesize(const Eigen::VectorXd& coeffs) const {
  const RowMajorMatrix v = synthesize_rings(coeffs, *table_, trig_, RingComponent::Value);
  return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
}

Eigen::VectorXd SphereGrid::analyze(const Eigen::VectorXd& values) const {
  if (values.size() != size()) {
    throw ValidationError("analyze: expected " + std::to_string(size()) + " grid values, got " +
                          std::to_string(values.size()));
  }
  const int L = bandlimit_;
  Eigen::Map<const RowMajorMatrix> v(values.data(), n_theta_, n_phi_);
  Eigen::MatrixXd g = v * trig_;
  g.array().colwise() *= (0.5 * ring_weights_.array() / n_phi_);
  Eigen::VectorXd c(harmonic_count(L));
  for (int m = -L; m <= L; ++m) {
    const int am = std::abs(m);
    const Eigen::VectorXd slice = table_->value(am).transpose() * g.col(m + L);
    for (int k = am; k <= L; ++k) c[harmonic_index(k, m)] = slice[k - am];
  }
  return c;
}

std::array<Eigen::VectorXd, 3> SphereGrid::synthesize_gradient(const Eigen::VectorXd& coeffs) const {
  const RowMajorMatrix gt = synthesize_rings(coeffs, *table_, trig_, RingComponent::DTheta);
  const RowMajorMatrix gp = synthesize_rings(coeffs, *table_, dtrig_, RingComponent::DPhiOverSin);
  std::array<Eigen::VectorXd, 3> out;
  for (auto& o : out) o.resize(size());
  for (int j = 0; j < n_theta_; ++j) {
    const double ct = std::cos(theta_[j]);
    const double st = std::sin(theta_[j]);
    for (int p = 0; p < n_phi_; ++p) {
      const double cp = std::cos(phi_[p]);
      const double sp = std::sin(phi_[p]);
      const Eigen::Index i = Eigen::Index(j) * n_phi_ + p;
      const double a = gt(j, p);
      const double b = gp(j, p);
      out[0][i] = a * ct * cp - b * sp;
      out[1][i] = a * ct * sp + b * cp;
      out[2][i] = -a * st;
    }
  }
  return out;
}

double SphereGrid::integrate(const Eigen::VectorXd& values) const {
  return node_weights_.dot(values) / (4.0 * kPi);
}

GridPtr shared_grid(int bandlimit, int n_theta, int n_phi) {
  static std::mutex mutex;
  static std::map<std::tuple<int, int, int>, GridPtr> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[{bandlimit, n_theta, n_phi}];
  if (!slot) slot = std::make_shared<const SphereGrid>(bandlimit, n_theta, n_phi);
  return slot;
}

Eigen::VectorXd laplace_beltrami(const Eigen::VectorXd& coeffs) {
  const int L = bandlimit_of(coeffs.size());
  Eigen::VectorXd out(coeffs.size());
  for (int k = 0; k <= L; ++k) {
    const double eig = -static_cast<double>(k) * (k + 1);
    for (int m = -k; m <= k; ++m) out[harmonic_index(k, m)] = eig * coeffs[harmonic_index(k, m)];
  }
  return out;
}

std::pair<double, double> spherical_angles(const Vec3& x) {
  const double rho = std::hypot(x.x(), x.y());
  const double theta = std::atan2(rho, x.z());
  const double phi = rho == 0.0 ? 0.0 : std::atan2(x.y(), x.x());
  return {theta, phi};
}

std::pair<double, Vec3> evaluate_with_gradient(const Eigen::VectorXd& coeffs, const Vec3& x) {
  const int L = bandlimit_of(coeffs.size());
  const auto [theta, phi] = spherical_angles(x);
  const double ct = std::cos(theta);
  const double st = std::sin(theta);
  const LegendrePoint lp = evaluate_legendre(L, ct, st);
  const double root2 = std::numbers::sqrt2;

  double value = 0.0, d_theta = 0.0, d_phi = 0.0;
  for (int k = 0; k <= L; ++k) {
    const int i0 = legendre_index(k, 0);
    value += coeffs[harmonic_index(k, 0)] * lp.value[i0];
    d_theta += coeffs[harmonic_index(k, 0)] * lp.dtheta[i0];
  }
  for (int m = 1; m <= L; ++m) {
    const double cm = root2 * std::cos(m * phi);
    const double sm = root2 * std::sin(m * phi);
    for (int k = m; k <= L; ++k) {
      const int li = legendre_index(k, m);
      const double a = coeffs[harmonic_index(k, m)];
      const double b = coeffs[harmonic_index(k, -m)];
      value += (a * cm + b * sm) * lp.value[li];
      d_theta += (a * cm + b * sm) * lp.dtheta[li];
      d_phi += m * (b * cm - a * sm) * lp.over_sin[li];
    }
  }
  const double cp = std::cos(phi);
  const double sp = std::sin(phi);
  const Vec3 e_theta(ct * cp, ct * sp, -st);
  const Vec3 e_phi(-sp, cp, 0.0);
  return {value, d_theta * e_theta + d_phi * e_phi};
}

double evaluate(const Eigen::VectorXd& coeffs, const Vec3& x) {
  return evaluate_with_gradient(coeffs, x).first;
}

Vec3 surface_gradient(const Eigen::VectorXd& coeffs, const Vec3& x) {
  return evaluate_with_gradient(coeffs, x).second;
}

}  // namespace mfe
