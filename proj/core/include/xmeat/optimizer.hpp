#pragma once

#include <functional>

#include <Eigen/Core>

namespace xmeat {

// Objective returning f(x) and writing ∇f(x) into `grad`.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct BfgsOptions {
  int max_iterations = 500;
  // Converged when the infinity norm of the gradient drops below this.
  double gradient_tolerance = 1e-7;
  // Stop early when an accepted step changes f by less than this (relative).
  double function_tolerance = 1e-15;
};

struct BfgsResult {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd gradient;
  int iterations = 0;
  bool converged = false;
};

// Quasi-Newton minimisation with an inverse-Hessian BFGS update and a
// backtracking Armijo line search. Curvature updates that would break
// positive definiteness are skipped.
BfgsResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0, const BfgsOptions& options = {});

}  // namespace xmeat
