#pragma once

#include <random>

#include <Eigen/Dense>

#include "xmeat/mixed_model.hpp"

namespace xmeat::testing {

struct LmmTruth {
  Eigen::VectorXd beta;       // intercept, x1, x2
  Eigen::VectorXd tau2;       // random intercept, random x1 slope
  double sigma2 = 1.0;
};

inline LmmTruth zero_variance_truth() {
  LmmTruth t;
  t.beta = Eigen::Vector3d(0.5, 1.0, -0.7);
  t.tau2 = Eigen::Vector2d::Zero();
  return t;
}

inline LmmTruth default_truth() {
  LmmTruth t;
  t.beta = Eigen::Vector3d(0.5, 1.0, -0.7);
  t.tau2 = Eigen::Vector2d(0.1, 0.05);
  return t;
}

// y = Xβ + Z u_j + ε with X = [1, x1, x2], Z = [1, x1], u_j ~ N(0, diag τ²).
// With `project_noise`, ε is additionally projected off the span of each
// group's X block, so group-level fits carry no between-group dispersion.
inline LmmData simulate_lmm(std::uint64_t seed, const LmmTruth& truth, int groups = 10,
                            int per_group = 20, bool project_noise = false) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int n = groups * per_group;
  LmmData d;
  d.x.resize(n, 3);
  d.z.resize(n, 2);
  d.y.resize(n);
  d.group.resize(n);
  d.n_groups = groups;
  d.fixed_names = {"intercept", "x1", "x2"};
  d.random_names = {"intercept", "x1"};
  for (int j = 0; j < groups; ++j) {
    const double u0 = std::sqrt(truth.tau2[0]) * normal(rng);
    const double u1 = std::sqrt(truth.tau2[1]) * normal(rng);
    Eigen::MatrixXd xj(per_group, 3);
    Eigen::VectorXd eps(per_group);
    for (int i = 0; i < per_group; ++i) {
      const int r = j * per_group + i;
      const double x1 = normal(rng), x2 = normal(rng);
      d.x.row(r) << 1.0, x1, x2;
      d.z.row(r) << 1.0, x1;
      xj.row(i) << 1.0, x1, x2;
      eps[i] = std::sqrt(truth.sigma2) * normal(rng);
      d.group[r] = j;
    }
    if (project_noise) {
      const Eigen::VectorXd coef = xj.colPivHouseholderQr().solve(eps);
      eps -= xj * coef;
    }
    for (int i = 0; i < per_group; ++i) {
      const int r = j * per_group + i;
      d.y[r] = d.x.row(r).dot(truth.beta) + u0 + u1 * d.z(r, 1) + eps[i];
    }
  }
  return d;
}

// Central-difference gradient of the REML log-likelihood.
inline Eigen::VectorXd finite_difference_gradient(const RemlProblem& problem, const Eigen::VectorXd& theta) {
  Eigen::VectorXd g(theta.size());
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    const double h = 1e-5 * std::max(1.0, std::abs(theta[k]));
    Eigen::VectorXd up = theta, down = theta;
    up[k] += h;
    down[k] -= h;
    g[k] = (problem.log_likelihood(up) - problem.log_likelihood(down)) / (2 * h);
  }
  return g;
}

}  // namespace xmeat::testing
