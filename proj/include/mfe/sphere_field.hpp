#pragma once

// Scalar field on the sphere held both as grid values and as harmonic coefficients.

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>

#include "mfe/sphere_grid.hpp"

namespace mfe {

/// Harmonic coefficients of a band-limited field.
struct HarmonicCoeffs {
  int bandlimit = 0;
  Eigen::VectorXd coeffs;

  double operator()(int k, int m) const { return coeffs[harmonic_index(k, m)]; }
  double& operator()(int k, int m) { return coeffs[harmonic_index(k, m)]; }
};

/// Immutable band-limited field. Values are always the synthesis of the coefficients,
/// so the two representations agree to rounding.
class SphereField {
 public:
  SphereField(GridPtr grid, Eigen::VectorXd coeffs);

  /// Projects arbitrary grid values onto the bandlimit.
  static SphereField from_values(GridPtr grid, const Eigen::VectorXd& values);
  static SphereField from_function(GridPtr grid, const std::function<double(const Vec3&)>& f);
  static SphereField constant(GridPtr grid, double c);
  static SphereField zero(GridPtr grid) { return constant(std::move(grid), 0.0); }
  /// Single real harmonic Y_k^m scaled by `amplitude`.
  static SphereField harmonic(GridPtr grid, int k, int m, double amplitude = 1.0);

  const SphereGrid& grid() const noexcept { return *grid_; }
  const GridPtr& grid_ptr() const noexcept { return grid_; }
  int bandlimit() const noexcept { return grid_->bandlimit(); }

  const Eigen::VectorXd& coeffs() const noexcept { return coeffs_; }
  const Eigen::VectorXd& values() const noexcept { return values_; }
  HarmonicCoeffs harmonic_coeffs() const { return {bandlimit(), coeffs_}; }
  /// max |values| over the grid nodes.
  double sup_norm() const noexcept { return sup_norm_; }

  double operator()(const Vec3& x) const { return evaluate(coeffs_, x); }
  Vec3 gradient(const Vec3& x) const { return surface_gradient(coeffs_, x); }

  /// Field values on the 3/2-oversampled grid.
  Eigen::VectorXd dealiased_values() const { return grid_->dealiased().synthesize(coeffs_); }

  SphereField operator+(const SphereField& other) const;
  SphereField operator-(const SphereField& other) const;
  SphereField operator+(double c) const;
  SphereField operator-(double c) const { return *this + (-c); }
  SphereField operator*(double s) const;
  SphereField operator-() const { return *this * -1.0; }

 private:
  GridPtr grid_;
  Eigen::VectorXd coeffs_;
  Eigen::VectorXd values_;
  double sup_norm_ = 0.0;
};

inline SphereField operator*(double s, const SphereField& f) { return f * s; }

/// Normalized integral over the sphere (total measure 1) on the field's grid.
double quadrature(const SphereField& field);

SphereField analyze_to_field(GridPtr grid, const Eigen::VectorXd& values);
Eigen::VectorXd synthesize(const SphereField& field);

SphereField laplace_beltrami(const SphereField& field);

/// Field x -> f(R^T x). Throws ValidationError for improper or non-orthogonal R.
SphereField rotate_field(const SphereField& field, const Mat3& rotation);

/// Integral of g(u) over the closed hemisphere {x . y >= 0} with unnormalized area
/// measure (total sphere 4 pi).
double hemisphere_integral(const SphereField& u, const Vec3& y,
                           const std::function<double(double)>& g = {});

/// Trapezoidal line integral of grad u . y over the great circle orthogonal to y,
/// with n equispaced samples (arc-length measure, circumference 2 pi).
double great_circle_flux(const SphereField& u, const Vec3& y, int n = 0);

/// Sup of |f| refined beyond the grid nodes by local ascent on the spectral representation.
double refined_sup_norm(const Eigen::VectorXd& coeffs, const SphereGrid& grid);

// --- serialization ---------------------------------------------------------------------
//
// Binary container, all integers little-endian, doubles as IEEE-754 binary64 little-endian:
//
//   offset  size  field
//   0       8     magic "MFEFIELD"
//   8       4     format version (uint32, currently 1)
//   12      4     bandlimit L (uint32)
//   16      4     n_theta (uint32)
//   20      4     n_phi (uint32)
//   24      8     coefficient count (uint64, equals (L+1)^2)
//   32      8*N   coefficients in harmonic_index order
//   32+8N   8     FNV-1a 64-bit checksum of all preceding bytes
//
// Reading reproduces the coefficient bits exactly.

inline constexpr std::uint32_t kFieldFormatVersion = 1;

void write_field(std::ostream& out, const SphereField& field);
SphereField read_field(std::istream& in);
void save_field(const std::string& path, const SphereField& field);
SphereField load_field(const std::string& path);

}  // namespace mfe
