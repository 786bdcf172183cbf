#pragma once

// Rotations of band-limited fields through real spherical-harmonic rotation matrices
// (Ivanic-Ruedenberg recursion on the degree-1 block).

#include <Eigen/Core>

#include <vector>

#include "mfe/sphere_grid.hpp"

namespace mfe {

/// Throws ValidationError unless R is orthogonal with determinant +1 within 1e-12.
void validate_rotation(const Mat3& rotation);

/// Per-degree blocks D^k, (2k+1) x (2k+1), indexed by m + k. Rotating coefficients
/// through these blocks gives the field x -> f(R^T x).
std::vector<Eigen::MatrixXd> harmonic_rotation_blocks(const Mat3& rotation, int bandlimit);

/// Coefficients of x -> f(R^T x).
Eigen::VectorXd rotate_coefficients(const Eigen::VectorXd& coeffs, const Mat3& rotation);

/// A proper rotation taking the unit vector y to the north pole e3.
Mat3 rotation_to_pole(const Vec3& y);

/// Rotation about a unit axis by `angle` (right-handed).
Mat3 axis_angle(const Vec3& axis, double angle);

}  // namespace mfe
