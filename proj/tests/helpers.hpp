#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <functional>
#include <random>

#include "mfe/sphere_field.hpp"

namespace testing {

using mfe::Vec3;

// Composite Simpson on [a, b] with n (even) panels; the dense 1-D oracle used throughout.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 20000) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Vec3 v(n(rng), n(rng), n(rng));
  return v.normalized();
}

inline Eigen::VectorXd random_coeffs(int bandlimit, std::uint64_t seed, double decay = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Eigen::VectorXd c(mfe::harmonic_count(bandlimit));
  for (int k = 0; k <= bandlimit; ++k)
    for (int m = -k; m <= k; ++m) c[mfe::harmonic_index(k, m)] = n(rng) / std::pow(1.0 + k, decay);
  return c;
}

// Rodrigues rotation, independent of the library's axis_angle.
inline mfe::Mat3 rotation(const Vec3& axis, double angle) {
  const Vec3 a = axis.normalized();
  mfe::Mat3 k;
  k << 0, -a[2], a[1], a[2], 0, -a[0], -a[1], a[0], 0;
  return mfe::Mat3::Identity() + std::sin(angle) * k + (1 - std::cos(angle)) * k * k;
}

inline double sup_diff(const mfe::SphereField& a, const mfe::SphereField& b) {
  return (a.values() - b.values()).cwiseAbs().maxCoeff();
}

}  // namespace testing
