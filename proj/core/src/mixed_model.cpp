#include "xmeat/mixed_model.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "xmeat/error.hpp"
#include "xmeat/stats.hpp"

namespace xmeat {

RemlProblem::RemlProblem(const LmmData& data, CovarianceStructure structure)
    : structure_(structure),
      n_(static_cast<int>(data.y.size())),
      p_(static_cast<int>(data.x.cols())),
      q_(static_cast<int>(data.z.cols())) {
  if (data.x.rows() != n_ || data.z.rows() != n_ || static_cast<int>(data.group.size()) != n_) {
    throw ValidationError("mixed model: inconsistent row counts");
  }
  groups_.resize(static_cast<size_t>(data.n_groups));
  for (auto& g : groups_) {
    g.zz = Eigen::MatrixXd::Zero(q_, q_);
    g.zx = Eigen::MatrixXd::Zero(q_, p_);
    g.zy = Eigen::VectorXd::Zero(q_);
  }
  for (int i = 0; i < n_; ++i) {
    const int j = data.group[static_cast<size_t>(i)];
    if (j < 0 || j >= data.n_groups) throw ValidationError("mixed model: group index out of range");
    auto& g = groups_[static_cast<size_t>(j)];
    const auto zi = data.z.row(i).transpose();
    g.zz.noalias() += zi * zi.transpose();
    g.zx.noalias() += zi * data.x.row(i);
    g.zy.noalias() += zi * data.y[i];
  }
  xx_ = data.x.transpose() * data.x;
  xy_ = data.x.transpose() * data.y;
  yy_ = data.y.squaredNorm();
}

size_t RemlProblem::parameter_count() const {
  const auto q = static_cast<size_t>(q_);
  return structure_ == CovarianceStructure::diagonal ? q : q * (q + 1) / 2;
}

Eigen::MatrixXd RemlProblem::factor(const Eigen::VectorXd& theta) const {
  Eigen::MatrixXd lambda = Eigen::MatrixXd::Zero(q_, q_);
  if (structure_ == CovarianceStructure::diagonal) {
    for (int k = 0; k < q_; ++k) lambda(k, k) = theta[k];
  } else {
    Eigen::Index k = 0;
    for (int c = 0; c < q_; ++c) {
      for (int r = c; r < q_; ++r) lambda(r, c) = theta[k++];
    }
  }
  return lambda;
}

Eigen::VectorXd RemlProblem::initial_parameters() const {
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(parameter_count()));
  if (structure_ == CovarianceStructure::diagonal) {
    theta.setOnes();
  } else {
    Eigen::Index k = 0;
    for (int c = 0; c < q_; ++c) {
      for (int r = c; r < q_; ++r) theta[k++] = r == c ? 1.0 : 0.0;
    }
  }
  return theta;
}

double RemlProblem::evaluate(const Eigen::VectorXd& theta, Eigen::VectorXd* grad,
                             Profile* profile) const {
  const Eigen::MatrixXd lambda = factor(theta);
  const Eigen::MatrixXd eye_q = Eigen::MatrixXd::Identity(q_, q_);

  // Per group, with M = I + Λᵀ ZᵀZ Λ and K = Λ M⁻¹ Λᵀ, the Woodbury
  // identity gives H⁻¹ = I − Z K Zᵀ and log|H| = log|M|.
  std::vector<Eigen::MatrixXd> k_mats(groups_.size());
  double log_det_h = 0.0;
  Eigen::MatrixXd xhx = xx_;
  Eigen::VectorXd xhy = xy_;
  double yhy = yy_;
  for (size_t j = 0; j < groups_.size(); ++j) {
    const auto& g = groups_[j];
    Eigen::LLT<Eigen::MatrixXd> chol(eye_q + lambda.transpose() * g.zz * lambda);
    const Eigen::MatrixXd l = chol.matrixL();
    log_det_h += 2.0 * l.diagonal().array().log().sum();
    k_mats[j] = lambda * chol.solve(lambda.transpose());
    const Eigen::MatrixXd& k = k_mats[j];
    xhx.noalias() -= g.zx.transpose() * k * g.zx;
    xhy.noalias() -= g.zx.transpose() * (k * g.zy);
    yhy -= g.zy.dot(k * g.zy);
  }

  Eigen::LLT<Eigen::MatrixXd> xhx_chol(xhx);
  if (xhx_chol.info() != Eigen::Success) {
    throw ValidationError("mixed model: fixed-effect design is not full rank");
  }
  const Eigen::MatrixXd c = xhx_chol.solve(Eigen::MatrixXd::Identity(p_, p_));
  const Eigen::VectorXd beta = c * xhy;
  const double rss = yhy - beta.dot(xhy);
  const double dof = static_cast<double>(n_ - p_);
  const double log_det_xhx = 2.0 * Eigen::MatrixXd(xhx_chol.matrixL()).diagonal().array().log().sum();
  const double loglik =
      -0.5 * (dof * (1.0 + std::log(2.0 * std::numbers::pi * rss / dof)) + log_det_h + log_det_xhx);

  if (profile) {
    profile->beta = beta;
    profile->beta_cov_unscaled = c;
    profile->sigma2 = rss / dof;
    profile->log_likelihood = loglik;
  }

  if (grad) {
    // dℓ/dΛ_rc = −(W Λ)_rc with W = Σ_j (ZᵀH⁻¹Z − ZᵀH⁻¹X C XᵀH⁻¹Z)
    //                              − (n − p)/rss · Σ_j (ZᵀH⁻¹r)(ZᵀH⁻¹r)ᵀ.
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(q_, q_);
    const double scale = dof / rss;
    for (size_t j = 0; j < groups_.size(); ++j) {
      const auto& g = groups_[j];
      const Eigen::MatrixXd& k = k_mats[j];
      const Eigen::MatrixXd zk = g.zz * k;
      const Eigen::MatrixXd zhz = g.zz - zk * g.zz;
      const Eigen::MatrixXd zhx = g.zx - zk * g.zx;
      const Eigen::VectorXd zhr = (g.zy - zk * g.zy) - zhx * beta;
      w.noalias() += zhz - zhx * c * zhx.transpose() - scale * zhr * zhr.transpose();
    }
    const Eigen::MatrixXd wl = w * lambda;
    grad->resize(static_cast<Eigen::Index>(parameter_count()));
    if (structure_ == CovarianceStructure::diagonal) {
      for (int k = 0; k < q_; ++k) (*grad)[k] = -wl(k, k);
    } else {
      Eigen::Index idx = 0;
      for (int col = 0; col < q_; ++col) {
        for (int row = col; row < q_; ++row) (*grad)[idx++] = -wl(row, col);
      }
    }
  }
  return loglik;
}

double RemlProblem::log_likelihood(const Eigen::VectorXd& theta, Eigen::VectorXd* grad) const {
  return evaluate(theta, grad, nullptr);
}

RemlProblem::Profile RemlProblem::profile(const Eigen::VectorXd& theta) const {
  Profile p;
  evaluate(theta, nullptr, &p);
  return p;
}

const FixedEffect& MixedModelFit::coefficient(const std::string& name) const {
  for (const auto& f : fixed) {
    if (f.name == name) return f;
  }
  throw ValidationError("no fixed effect named '" + name + "'");
}

Eigen::VectorXd ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  return x.colPivHouseholderQr().solve(y);
}

MixedModelFit fit_lmm(const LmmData& data, const LmmOptions& options) {
  if (data.n_groups < 2) throw ValidationError("mixed model needs at least 2 groups");
  if (data.x.rows() <= data.x.cols()) {
    throw ValidationError("mixed model: no residual degrees of freedom");
  }
  {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(data.x);
    if (qr.rank() < data.x.cols()) {
      throw ValidationError("mixed model: fixed-effect design is not full rank (rank " +
                            std::to_string(qr.rank()) + " of " + std::to_string(data.x.cols()) +
                            ")");
    }
  }

  const RemlProblem problem(data, options.covariance);
  // Minimise the negative log-likelihood.
  Objective objective = [&problem](const Eigen::VectorXd& theta, Eigen::VectorXd& grad) {
    const double ll = problem.log_likelihood(theta, &grad);
    grad = -grad;
    return -ll;
  };
  BfgsResult opt = minimize_bfgs(objective, problem.initial_parameters(), options.optimizer);

  MixedModelFit fit;
  Eigen::VectorXd theta = opt.x;
  const int q = problem.n_random();

  // Sign of a column of Λ is not identified; report the canonical factor.
  {
    Eigen::MatrixXd lambda = problem.factor(theta);
    for (int col = 0; col < q; ++col) {
      if (lambda(col, col) < 0.0) lambda.col(col) = -lambda.col(col);
    }
    Eigen::Index idx = 0;
    if (options.covariance == CovarianceStructure::diagonal) {
      for (int k = 0; k < q; ++k) theta[k] = lambda(k, k);
    } else {
      for (int col = 0; col < q; ++col) {
        for (int row = col; row < q; ++row) theta[idx++] = lambda(row, col);
      }
    }
  }

  // Boundary handling: drop a random term when zeroing it does not lower
  // the likelihood by more than the tolerance.
  double best = problem.log_likelihood(theta);
  for (int term = 0; term < q; ++term) {
    Eigen::VectorXd trial = theta;
    Eigen::MatrixXd lambda = problem.factor(trial);
    if (lambda.row(term).isZero(0.0)) continue;
    lambda.row(term).setZero();
    Eigen::Index idx = 0;
    if (options.covariance == CovarianceStructure::diagonal) {
      for (int k = 0; k < q; ++k) trial[k] = lambda(k, k);
    } else {
      for (int col = 0; col < q; ++col) {
        for (int row = col; row < q; ++row) trial[idx++] = lambda(row, col);
      }
    }
    const double ll = problem.log_likelihood(trial);
    if (ll >= best - options.boundary_tolerance) {
      theta = trial;
      best = std::max(best, ll);
      const std::string name =
          term < static_cast<int>(data.random_names.size()) ? data.random_names[static_cast<size_t>(term)]
                                                            : "term " + std::to_string(term);
      fit.warnings.push_back("singular variance estimate for '" + name + "' clamped to 0");
    }
  }

  Eigen::VectorXd grad;
  problem.log_likelihood(theta, &grad);
  const auto prof = problem.profile(theta);
  const Eigen::MatrixXd lambda = problem.factor(theta);

  fit.theta = theta;
  fit.reml_loglik = prof.log_likelihood;
  fit.residual_variance = prof.sigma2;
  fit.random_covariance = prof.sigma2 * lambda * lambda.transpose();
  fit.random_names = data.random_names;
  fit.iterations = opt.iterations;
  fit.gradient_norm = grad.lpNorm<Eigen::Infinity>();
  fit.converged = opt.converged || fit.gradient_norm < options.optimizer.gradient_tolerance;
  if (!fit.converged) fit.warnings.push_back("optimizer did not converge; reporting best iterate");

  const Eigen::MatrixXd cov = prof.sigma2 * prof.beta_cov_unscaled;
  for (int k = 0; k < problem.n_fixed(); ++k) {
    FixedEffect fe;
    fe.name = k < static_cast<int>(data.fixed_names.size()) ? data.fixed_names[static_cast<size_t>(k)]
                                                            : "x" + std::to_string(k);
    fe.estimate = prof.beta[k];
    fe.se = std::sqrt(std::max(cov(k, k), 0.0));
    fe.z = fe.se > 0.0 ? fe.estimate / fe.se : 0.0;
    fe.p_value = normal_two_sided_p(fe.z);
    fit.fixed.push_back(fe);
  }
  return fit;
}

}  // namespace xmeat
