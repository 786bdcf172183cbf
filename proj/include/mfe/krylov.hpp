#pragma once

// Restarted GMRES with right preconditioning for matrix-free operators.

#include <Eigen/Core>

#include <cmath>
#include <vector>

namespace mfe {

struct GmresResult {
  int iterations = 0;
  double residual_norm = 0.0;
  bool converged = false;
};

/// Solves apply(x) = b. `precondition` approximates the inverse of the operator.
/// Starts from the incoming x.
template <typename Apply, typename Precondition>
GmresResult gmres(const Apply& apply, const Precondition& precondition, const Eigen::VectorXd& b,
                  Eigen::VectorXd& x, double rel_tol = 1e-12, double abs_tol = 1e-16, int restart = 60,
                  int max_iter = 600) {
  GmresResult result;
  const double b_norm = b.norm();
  const double target = std::max(rel_tol * b_norm, abs_tol);
  if (x.size() != b.size()) x = Eigen::VectorXd::Zero(b.size());

  Eigen::VectorXd r = b - apply(x);
  double beta = r.norm();
  result.residual_norm = beta;
  if (beta <= target) {
    result.converged = true;
    return result;
  }

  const Eigen::Index n = b.size();
  Eigen::MatrixXd v(n, restart + 1);
  Eigen::MatrixXd z(n, restart);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(restart + 1, restart);
  Eigen::VectorXd cs(restart), sn(restart), g(restart + 1);

  while (result.iterations < max_iter) {
    v.col(0) = r / beta;
    g.setZero();
    g[0] = beta;
    h.setZero();
    int j = 0;
    for (; j < restart && result.iterations < max_iter; ++j, ++result.iterations) {
      z.col(j) = precondition(v.col(j).eval());
      Eigen::VectorXd w = apply(z.col(j).eval());
      for (int i = 0; i <= j; ++i) {
        h(i, j) = v.col(i).dot(w);
        w -= h(i, j) * v.col(i);
      }
      h(j + 1, j) = w.norm();
      if (h(j + 1, j) > 0.0) v.col(j + 1) = w / h(j + 1, j);
      for (int i = 0; i < j; ++i) {
        const double t = cs[i] * h(i, j) + sn[i] * h(i + 1, j);
        h(i + 1, j) = -sn[i] * h(i, j) + cs[i] * h(i + 1, j);
        h(i, j) = t;
      }
      const double denom = std::hypot(h(j, j), h(j + 1, j));
      cs[j] = denom > 0.0 ? h(j, j) / denom : 1.0;
      sn[j] = denom > 0.0 ? h(j + 1, j) / denom : 0.0;
      h(j, j) = denom;
      h(j + 1, j) = 0.0;
      g[j + 1] = -sn[j] * g[j];
      g[j] = cs[j] * g[j];
      result.residual_norm = std::abs(g[j + 1]);
      if (result.residual_norm <= target || denom == 0.0) {
        ++j;
        ++result.iterations;
        break;
      }
    }
    // Back substitution on the j x j triangle.
    Eigen::VectorXd y = Eigen::VectorXd::Zero(j);
    for (int i = j - 1; i >= 0; --i) {
      double s = g[i];
      for (int k = i + 1; k < j; ++k) s -= h(i, k) * y[k];
      y[i] = h(i, i) != 0.0 ? s / h(i, i) : 0.0;
    }
    x += z.leftCols(j) * y;
    r = b - apply(x);
    beta = r.norm();
    result.residual_norm = beta;
    if (beta <= target) {
      result.converged = true;
      break;
    }
  }
  return result;
}

}  // namespace mfe
