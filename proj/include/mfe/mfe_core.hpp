#pragma once

// Mean field equation (alpha/2) Lap u + e^u - 1 = 0 on the unit sphere: residual,
// energy functional, gradient, normalization, constraint moments and linearization.
//
// Nonlinear terms are evaluated pointwise on the grid's 3/2-oversampled companion and
// projected back to the bandlimit.

#include <Eigen/Core>

#include "mfe/sphere_field.hpp"

namespace mfe {

struct MfeParameters {
  double alpha = 0.5;
  /// Sup-norm residual tolerance for convergence.
  double newton_tol = 1e-10;
  int max_iter = 100;
  /// Newton also requires the last correction to be below this (sup-norm); guards
  /// against stopping early at singular roots where the residual is quadratic in the error.
  double step_tol = 1e-9;

  /// Throws ValidationError if alpha <= 0 or a tolerance is not positive.
  void validate() const;
};

/// Fields with |u| above this are rejected before exponentiation.
inline constexpr double kMaxFieldMagnitude = 700.0;

/// Throws MagnitudeError when ||u||_inf exceeds kMaxFieldMagnitude.
void check_magnitude(const SphereField& u);

/// Coefficients of P_L[(alpha/2) Lap u + e^u - 1] for a coefficient vector on `grid`.
Eigen::VectorXd residual_coefficients(const Eigen::VectorXd& coeffs, double alpha, const SphereGrid& grid);

SphereField residual(const SphereField& u, double alpha);

/// Normalized integral of e^u (dealiased quadrature).
double exp_integral(const SphereField& u);

/// u - log(int e^u); the result has int e^u = 1.
SphereField normalize(const SphereField& u);

/// (alpha/4) int |grad u|^2 + int u - log int e^u, with the Dirichlet term taken
/// spectrally as sum k(k+1) c_km^2.
double j_alpha(const SphereField& u, double alpha);

/// L^2(normalized measure) gradient of j_alpha:
///   g = -(alpha/2) Lap u + 1 - e^u / int e^u,
/// so that J(u + h v) = J(u) + h <g, v> + O(h^2). On a normalized solution g = -residual.
SphereField j_alpha_gradient(const SphereField& u, double alpha);

/// (int e^u x1, int e^u x2, int e^u x3); zero exactly on the constraint set M.
Vec3 center_of_mass(const SphereField& u);

/// L^2 inner product under the normalized measure.
double inner_product(const SphereField& a, const SphereField& b);

/// Linearization phi -> (alpha/2) Lap phi + e^u phi at a fixed u. Caches e^u on the
/// dealiased grid so repeated applications cost two transforms each.
class Linearization {
 public:
  Linearization(const SphereField& u, double alpha);

  double alpha() const noexcept { return alpha_; }
  Eigen::VectorXd apply(const Eigen::VectorXd& phi) const;

  /// Symmetric Galerkin matrix <Y_i, J Y_j> over all harmonics of degree <= max_degree.
  Eigen::MatrixXd galerkin_matrix(int max_degree) const;

 private:
  const SphereGrid* fine_;
  double alpha_;
  Eigen::VectorXd exp_u_;
};

SphereField linearized_apply(const SphereField& u, double alpha, const SphereField& phi);

}  // namespace mfe
