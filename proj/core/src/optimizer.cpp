#include "xmeat/optimizer.hpp"

#include <cmath>

#include <Eigen/Dense>

namespace xmeat {

BfgsResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0, const BfgsOptions& options) {
  const Eigen::Index n = x0.size();
  BfgsResult res;
  res.x = std::move(x0);
  res.gradient.resize(n);
  res.value = f(res.x, res.gradient);

  Eigen::MatrixXd inv_hessian = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd grad_new(n);

  for (res.iterations = 0; res.iterations < options.max_iterations; ++res.iterations) {
    if (!std::isfinite(res.value)) break;
    if (res.gradient.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
      res.converged = true;
      return res;
    }

    Eigen::VectorXd direction = -inv_hessian * res.gradient;
    double slope = res.gradient.dot(direction);
    if (!(slope < 0.0)) {
      // Not a descent direction; fall back to steepest descent.
      inv_hessian.setIdentity();
      direction = -res.gradient;
      slope = res.gradient.dot(direction);
    }

    double step = 1.0;
    Eigen::VectorXd x_new;
    double value_new = 0.0;
    bool accepted = false;
    for (int trial = 0; trial < 60; ++trial) {
      x_new = res.x + step * direction;
      value_new = f(x_new, grad_new);
      if (std::isfinite(value_new) && value_new <= res.value + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    const Eigen::VectorXd s = x_new - res.x;
    const Eigen::VectorXd y = grad_new - res.gradient;
    const double change = res.value - value_new;
    res.x = x_new;
    res.gradient = grad_new;
    const double previous = res.value;
    res.value = value_new;

    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (res.iterations == 0) {
        // Scale the initial inverse Hessian to the observed curvature.
        inv_hessian *= sy / y.squaredNorm();
      }
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
      inv_hessian = (eye - rho * s * y.transpose()) * inv_hessian * (eye - rho * y * s.transpose()) +
                    rho * s * s.transpose();
    }

    if (std::abs(change) <= options.function_tolerance * std::max(1.0, std::abs(previous))) {
      res.converged = res.gradient.lpNorm<Eigen::Infinity>() < options.gradient_tolerance * 1e3;
      ++res.iterations;
      return res;
    }
  }
  res.converged = res.gradient.lpNorm<Eigen::Infinity>() < options.gradient_tolerance;
  return res;
}

}  // namespace xmeat
