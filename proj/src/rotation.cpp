#include "mfe/rotation.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <string>

#include "mfe/errors.hpp"

namespace mfe {

namespace {

// Degree-1 block in the (x2, x3, x1) ordering of m = -1, 0, 1.
Eigen::Matrix3d degree_one_block(const Mat3& r) {
  constexpr int axis[3] = {1, 2, 0};
  Eigen::Matrix3d b;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) b(i, j) = r(axis[i], axis[j]);
  return b;
}

class Recursion {
 public:
  Recursion(const Eigen::Matrix3d& r1, const Eigen::MatrixXd& previous, int l)
      : r1_(r1), prev_(previous), l_(l) {}

  double entry(int m, int n) const {
    const int am = std::abs(m);
    const double d = m == 0 ? 1.0 : 0.0;
    const double denom = std::abs(n) == l_ ? 2.0 * l_ * (2.0 * l_ - 1.0) : double(l_ + n) * (l_ - n);
    const double u = std::sqrt(double(l_ + m) * (l_ - m) / denom);
    const double v = 0.5 * std::sqrt((1.0 + d) * (l_ + am - 1.0) * (l_ + am) / denom) * (1.0 - 2.0 * d);
    const double w = -0.5 * std::sqrt(std::max(0.0, (l_ - am - 1.0) * (l_ - am)) / denom) * (1.0 - d);
    double out = 0.0;
    if (u != 0.0) out += u * p(0, m, n);
    if (v != 0.0) out += v * vterm(m, n);
    if (w != 0.0) out += w * wterm(m, n);
    return out;
  }

 private:
  double r(int i, int j) const { return r1_(i + 1, j + 1); }
  double pr(int a, int b) const { return prev_(a + l_ - 1, b + l_ - 1); }

  double p(int i, int a, int b) const {
    if (b == l_) return r(i, 1) * pr(a, l_ - 1) - r(i, -1) * pr(a, -l_ + 1);
    if (b == -l_) return r(i, 1) * pr(a, -l_ + 1) + r(i, -1) * pr(a, l_ - 1);
    return r(i, 0) * pr(a, b);
  }

  double vterm(int m, int n) const {
    if (m == 0) return p(1, 1, n) + p(-1, -1, n);
    if (m > 0) {
      const double d = m == 1 ? 1.0 : 0.0;
      return p(1, m - 1, n) * std::sqrt(1.0 + d) - p(-1, -m + 1, n) * (1.0 - d);
    }
    const double d = m == -1 ? 1.0 : 0.0;
    return p(1, m + 1, n) * (1.0 - d) + p(-1, -m - 1, n) * std::sqrt(1.0 + d);
  }

  double wterm(int m, int n) const {
    if (m > 0) return p(1, m + 1, n) + p(-1, -m - 1, n);
    return p(1, m - 1, n) - p(-1, -m + 1, n);
  }

  const Eigen::Matrix3d& r1_;
  const Eigen::MatrixXd& prev_;
  int l_;
};

}  // namespace

void validate_rotation(const Mat3& rotation) {
  const double orth = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  const double det = rotation.determinant();
  if (!(orth < 1e-12) || !(std::abs(det - 1.0) < 1e-12)) {
    throw ValidationError("rotation matrix is not proper orthogonal (|R^T R - I| = " +
                          std::to_string(orth) + ", det = " + std::to_string(det) + ")");
  }
}

std::vector<Eigen::MatrixXd> harmonic_rotation_blocks(const Mat3& rotation, int bandlimit) {
  validate_rotation(rotation);
  std::vector<Eigen::MatrixXd> blocks;
  blocks.reserve(bandlimit + 1);
  blocks.emplace_back(Eigen::MatrixXd::Ones(1, 1));
  if (bandlimit == 0) return blocks;
  const Eigen::Matrix3d r1 = degree_one_block(rotation);
  blocks.emplace_back(r1);
  for (int l = 2; l <= bandlimit; ++l) {
    Eigen::MatrixXd block(2 * l + 1, 2 * l + 1);
    const Recursion rec(r1, blocks[l - 1], l);
    for (int m = -l; m <= l; ++m)
      for (int n = -l; n <= l; ++n) block(m + l, n + l) = rec.entry(m, n);
    blocks.push_back(std::move(block));
  }
  return blocks;
}

Eigen::VectorXd rotate_coefficients(const Eigen::VectorXd& coeffs, const Mat3& rotation) {
  const int L = bandlimit_of(coeffs.size());
  const auto blocks = harmonic_rotation_blocks(rotation, L);
  Eigen::VectorXd out(coeffs.size());
  for (int k = 0; k <= L; ++k) {
    const Eigen::Index start = harmonic_index(k, -k);
    out.segment(start, 2 * k + 1).noalias() = blocks[k] * coeffs.segment(start, 2 * k + 1);
  }
  return out;
}

Mat3 axis_angle(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

Mat3 rotation_to_pole(const Vec3& y) {
  const Vec3 n = y.normalized();
  const Vec3 pole = Vec3::UnitZ();
  const Vec3 cross = n.cross(pole);
  const double s = cross.norm();
  const double c = n.dot(pole);
  if (s < 1e-15) {
    if (c > 0.0) return Mat3::Identity();
    return axis_angle(Vec3::UnitX(), std::numbers::pi);
  }
  return axis_angle(cross / s, std::atan2(s, c));
}

}  // namespace mfe
