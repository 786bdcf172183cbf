#pragma once

// Discretization of the unit sphere: Gauss-Legendre colatitudes times equispaced
// longitudes, real spherical-harmonic transforms and spectral differential operators.
//
// Real harmonic convention (used everywhere in the library):
//
//   Y_k^0      = lambda_k^0(cos t)
//   Y_k^m      = sqrt(2) lambda_k^m(cos t) cos(m p)     m > 0
//   Y_k^{-m}   = sqrt(2) lambda_k^m(cos t) sin(m p)     m > 0
//
// with lambda_k^m = sqrt((2k+1)(k-m)!/(k+m)!) P_k^m and no Condon-Shortley phase,
// so that the basis is orthonormal under the normalized measure (total mass 1).
// In particular Y_1^{-1}, Y_1^0, Y_1^1 = sqrt(3) (x2, x3, x1).
//
// Coefficients are stored in a flat vector at index k*k + k + m.

#include <Eigen/Core>

#include <array>
#include <memory>
#include <vector>

namespace mfe {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

constexpr int harmonic_index(int k, int m) noexcept { return k * k + k + m; }
constexpr int harmonic_count(int bandlimit) noexcept { return (bandlimit + 1) * (bandlimit + 1); }

/// Bandlimit for a coefficient vector of the given length; throws if it is not a square.
int bandlimit_of(Eigen::Index coefficient_count);

struct QuadratureRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};

/// n-point Gauss-Legendre rule mapped to [a, b].
QuadratureRule gauss_legendre(int n, double a = -1.0, double b = 1.0);

/// Normalized associated Legendre functions and their colatitude derivatives at one point.
/// Arrays are indexed by k*(k+1)/2 + m for 0 <= m <= k <= L. over_sin holds lambda/sin(t)
/// for m >= 1 and is evaluated without dividing by sin(t), so it is finite at the poles.
struct LegendrePoint {
  std::vector<double> value;
  std::vector<double> dtheta;
  std::vector<double> over_sin;
};

constexpr int legendre_index(int k, int m) noexcept { return k * (k + 1) / 2 + m; }

LegendrePoint evaluate_legendre(int bandlimit, double cos_t, double sin_t);

/// Legendre blocks for a fixed set of colatitudes: for each order m a
/// (points x (L - m + 1)) matrix with columns k = m..L.
class LegendreTable {
 public:
  LegendreTable(int bandlimit, const Eigen::VectorXd& colatitudes);

  int bandlimit() const noexcept { return bandlimit_; }
  Eigen::Index size() const noexcept { return size_; }

  const Eigen::MatrixXd& value(int m) const { return value_[m]; }
  const Eigen::MatrixXd& dtheta(int m) const { return dtheta_[m]; }
  const Eigen::MatrixXd& over_sin(int m) const { return over_sin_[m]; }

 private:
  int bandlimit_;
  Eigen::Index size_;
  std::vector<Eigen::MatrixXd> value_;
  std::vector<Eigen::MatrixXd> dtheta_;
  std::vector<Eigen::MatrixXd> over_sin_;
};

/// Which derivative of the field a ring synthesis produces.
enum class RingComponent { Value, DTheta, DPhiOverSin };

/// Longitude basis matrix (n_phi x (2L+1)), column m+L holds the real harmonic
/// longitude factor (1, sqrt2 cos, sqrt2 sin) of order m or its phi-derivative.
Eigen::MatrixXd longitude_basis(int bandlimit, int n_phi, bool derivative = false);

/// Synthesize coefficients on the rings of `table`, n_phi equispaced longitudes starting at 0.
/// Returns a (rings x n_phi) matrix.
Eigen::MatrixXd synthesize_rings(const Eigen::VectorXd& coeffs, const LegendreTable& table,
                                 const Eigen::MatrixXd& longitudes, RingComponent component);

/// Gauss-Legendre x equispaced grid with its transforms. Immutable after construction.
class SphereGrid {
 public:
  static constexpr int kDefaultBandlimit = 48;
  static constexpr int kDefaultNTheta = 64;
  static constexpr int kDefaultNPhi = 128;

  /// Throws ResolutionError unless n_phi >= 2L+1 and n_theta >= L+1.
  /// With `with_dealiasing` an oversampled companion grid (3/2 rule) is built for
  /// pointwise nonlinear terms.
  explicit SphereGrid(int bandlimit = kDefaultBandlimit, int n_theta = kDefaultNTheta,
                      int n_phi = kDefaultNPhi, bool with_dealiasing = true);

  int bandlimit() const noexcept { return bandlimit_; }
  int n_theta() const noexcept { return n_theta_; }
  int n_phi() const noexcept { return n_phi_; }
  Eigen::Index size() const noexcept { return Eigen::Index(n_theta_) * n_phi_; }
  Eigen::Index coefficient_count() const noexcept { return harmonic_count(bandlimit_); }

  const Eigen::VectorXd& colatitudes() const noexcept { return theta_; }
  const Eigen::VectorXd& longitudes() const noexcept { return phi_; }
  /// Gauss weights in cos(t); sum to 2.
  const Eigen::VectorXd& ring_weights() const noexcept { return ring_weights_; }
  /// Per-node area weights (row-major, ring by ring); sum to 4 pi.
  const Eigen::VectorXd& weights() const noexcept { return node_weights_; }
  /// Unit vectors of the nodes, one per row.
  const Eigen::MatrixX3d& nodes() const noexcept { return nodes_; }
  Vec3 node(Eigen::Index i) const { return nodes_.row(i).transpose(); }

  const LegendreTable& legendre() const noexcept { return *table_; }
  const Eigen::MatrixXd& longitude_matrix() const noexcept { return trig_; }

  /// The 3/2-oversampled companion grid (itself when none was built).
  const SphereGrid& dealiased() const noexcept { return fine_ ? *fine_ : *this; }

  /// Gauss-Legendre rule on the upper hemisphere used for hemisphere integrals.
  const LegendreTable& hemisphere_table() const noexcept { return *hemisphere_table_; }
  const Eigen::VectorXd& hemisphere_weights() const noexcept { return hemisphere_weights_; }

  /// Legendre data at the equator (one ring).
  const LegendreTable& equator_table() const noexcept { return *equator_table_; }

  Eigen::VectorXd synthesize(const Eigen::VectorXd& coeffs) const;
  Eigen::VectorXd analyze(const Eigen::VectorXd& values) const;
  /// Cartesian components of the surface gradient at every node.
  std::array<Eigen::VectorXd, 3> synthesize_gradient(const Eigen::VectorXd& coeffs) const;

  /// Normalized integral sum_j w_j f_j / 4 pi.
  double integrate(const Eigen::VectorXd& values) const;

 private:
  int bandlimit_;
  int n_theta_;
  int n_phi_;
  Eigen::VectorXd theta_;
  Eigen::VectorXd phi_;
  Eigen::VectorXd ring_weights_;
  Eigen::VectorXd node_weights_;
  Eigen::MatrixX3d nodes_;
  Eigen::MatrixXd trig_;
  Eigen::MatrixXd dtrig_;
  std::unique_ptr<LegendreTable> table_;
  std::unique_ptr<LegendreTable> hemisphere_table_;
  Eigen::VectorXd hemisphere_weights_;
  std::unique_ptr<LegendreTable> equator_table_;
  std::unique_ptr<SphereGrid> fine_;
};

using GridPtr = std::shared_ptr<const SphereGrid>;

/// Shared grid instance for the given resolution (cached, thread-safe).
GridPtr shared_grid(int bandlimit = SphereGrid::kDefaultBandlimit,
                    int n_theta = SphereGrid::kDefaultNTheta, int n_phi = SphereGrid::kDefaultNPhi);

// --- spectral operators on coefficient vectors -----------------------------------------

/// Multiplies each (k, m) coefficient by -k(k+1).
Eigen::VectorXd laplace_beltrami(const Eigen::VectorXd& coeffs);

/// Spectral point evaluation.
double evaluate(const Eigen::VectorXd& coeffs, const Vec3& x);

/// Tangential gradient at a point on the sphere. Pole points use the analytic limits.
Vec3 surface_gradient(const Eigen::VectorXd& coeffs, const Vec3& x);

/// Value and Cartesian gradient in one pass.
std::pair<double, Vec3> evaluate_with_gradient(const Eigen::VectorXd& coeffs, const Vec3& x);

/// Spherical coordinates (colatitude, longitude) of a unit vector; longitude is 0 at the poles.
std::pair<double, double> spherical_angles(const Vec3& x);

}  // namespace mfe
