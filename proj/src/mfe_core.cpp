#include "mfe/mfe_core.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "mfe/errors.hpp"

namespace mfe {

void MfeParameters::validate() const {
  if (!(alpha > 0.0)) throw ValidationError("alpha must be positive");
  if (!(newton_tol > 0.0)) throw ValidationError("newton_tol must be positive");
  if (!(step_tol > 0.0)) throw ValidationError("step_tol must be positive");
  if (max_iter < 1) throw ValidationError("max_iter must be at least 1");
}

void check_magnitude(const SphereField& u) {
  if (!(u.sup_norm() <= kMaxFieldMagnitude)) {
    throw MagnitudeError("field sup-norm " + std::to_string(u.sup_norm()) + " exceeds " +
                         std::to_string(kMaxFieldMagnitude));
  }
}

namespace {

void check_fine_values(const Eigen::VectorXd& values) {
  const double sup = values.cwiseAbs().maxCoeff();
  if (!(sup <= kMaxFieldMagnitude)) {
    throw MagnitudeError("field sup-norm " + std::to_string(sup) + " exceeds " + std::to_string(kMaxFieldMagnitude));
  }
}

}  // namespace

Eigen::VectorXd residual_coefficients(const Eigen::VectorXd& coeffs, double alpha, const SphereGrid& grid) {
  const SphereGrid& fine = grid.dealiased();
  const Eigen::VectorXd u = fine.synthesize(coeffs);
  check_fine_values(u);
  const Eigen::VectorXd nonlinear = u.unaryExpr([](double v) { return std::expm1(v); });
  return 0.5 * alpha * laplace_beltrami(coeffs) + fine.analyze(nonlinear);
}

SphereField residual(const SphereField& u, double alpha) {
  check_magnitude(u);
  return SphereField(u.grid_ptr(), residual_coefficients(u.coeffs(), alpha, u.grid()));
}

double exp_integral(const SphereField& u) {
  check_magnitude(u);
  const SphereGrid& fine = u.grid().dealiased();
  const Eigen::VectorXd v = fine.synthesize(u.coeffs());
  check_fine_values(v);
  return fine.integrate(v.array().exp().matrix());
}

SphereField normalize(const SphereField& u) {
  const SphereGrid& fine = u.grid().dealiased();
  const Eigen::VectorXd v = fine.synthesize(u.coeffs());
  check_fine_values(v);
  // Shift by the max first so the exponentials stay in range.
  const double shift = v.maxCoeff();
  const double log_integral = shift + std::log(fine.integrate((v.array() - shift).exp().matrix()));
  return u - log_integral;
}

double j_alpha(const SphereField& u, double alpha) {
  const Eigen::VectorXd& c = u.coeffs();
  const int L = u.bandlimit();
  double dirichlet = 0.0;
  for (int k = 1; k <= L; ++k) {
    const double kk = static_cast<double>(k) * (k + 1);
    dirichlet += kk * c.segment(harmonic_index(k, -k), 2 * k + 1).squaredNorm();
  }
  return 0.25 * alpha * dirichlet + c[0] - std::log(exp_integral(u));
}

SphereField j_alpha_gradient(const SphereField& u, double alpha) {
  check_magnitude(u);
  const SphereGrid& fine = u.grid().dealiased();
  const Eigen::VectorXd v = fine.synthesize(u.coeffs());
  const Eigen::VectorXd e = v.array().exp().matrix();
  const double mass = fine.integrate(e);
  Eigen::VectorXd g = -0.5 * alpha * laplace_beltrami(u.coeffs()) - fine.analyze(e) / mass;
  g[0] += 1.0;
  return SphereField(u.grid_ptr(), std::move(g));
}

Vec3 center_of_mass(const SphereField& u) {
  check_magnitude(u);
  const SphereGrid& fine = u.grid().dealiased();
  const Eigen::VectorXd e = fine.synthesize(u.coeffs()).array().exp().matrix();
  Vec3 out;
  for (int i = 0; i < 3; ++i) out[i] = fine.integrate(e.cwiseProduct(fine.nodes().col(i)));
  return out;
}

double inner_product(const SphereField& a, const SphereField& b) { return a.coeffs().dot(b.coeffs()); }

Linearization::Linearization(const SphereField& u, double alpha) : fine_(&u.grid().dealiased()), alpha_(alpha) {
  check_magnitude(u);
  const Eigen::VectorXd v = fine_->synthesize(u.coeffs());
  check_fine_values(v);
  exp_u_ = v.array().exp().matrix();
}

Eigen::VectorXd Linearization::apply(const Eigen::VectorXd& phi) const {
  const Eigen::VectorXd values = fine_->synthesize(phi);
  return 0.5 * alpha_ * laplace_beltrami(phi) + fine_->analyze(exp_u_.cwiseProduct(values));
}

Eigen::MatrixXd Linearization::galerkin_matrix(int max_degree) const {
  const SphereGrid& g = *fine_;
  const int K = std::min(max_degree, g.bandlimit());
  const int n = harmonic_count(K);
  const int L = g.bandlimit();
  const Eigen::MatrixXd& trig = g.longitude_matrix();
  Eigen::MatrixXd basis(g.size(), n);
  for (int j = 0; j < g.n_theta(); ++j) {
    for (int k = 0; k <= K; ++k) {
      for (int m = -k; m <= k; ++m) {
        const double lam = g.legendre().value(std::abs(m))(j, k - std::abs(m));
        basis.block(Eigen::Index(j) * g.n_phi(), harmonic_index(k, m), g.n_phi(), 1) = lam * trig.col(m + L);
      }
    }
  }
  const Eigen::VectorXd w = g.weights().cwiseProduct(exp_u_) / (4.0 * std::numbers::pi);
  Eigen::MatrixXd out = basis.transpose() * w.asDiagonal() * basis;
  for (int k = 0; k <= K; ++k)
    for (int m = -k; m <= k; ++m) out(harmonic_index(k, m), harmonic_index(k, m)) -= 0.5 * alpha_ * k * (k + 1.0);
  return 0.5 * (out + out.transpose());
}

SphereField linearized_apply(const SphereField& u, double alpha, const SphereField& phi) {
  const Linearization lin(u, alpha);
  return SphereField(u.grid_ptr(), lin.apply(phi.coeffs()));
}

}  // namespace mfe
