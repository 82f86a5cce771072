#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "xmeat/optimizer.hpp"

namespace xmeat {

enum class CovarianceStructure { diagonal, unstructured };

// Linear mixed model y = Xβ + Z_j u_j + ε with independent groups j,
// u_j ~ N(0, G), ε ~ N(0, σ² I). G = σ² Λ Λᵀ with Λ lower triangular
// (diagonal under CovarianceStructure::diagonal).
struct LmmData {
  Eigen::VectorXd y;
  Eigen::MatrixXd x;  // fixed-effect design, n × p
  Eigen::MatrixXd z;  // random-effect design, n × q
  std::vector<int> group;  // group index per row, 0-based
  int n_groups = 0;
  std::vector<std::string> fixed_names;
  std::vector<std::string> random_names;
};

// REML criterion profiled over β and σ². Evaluation is O(groups · q³) after
// a one-off pass accumulating per-group cross products.
class RemlProblem {
 public:
  RemlProblem(const LmmData& data, CovarianceStructure structure);

  size_t parameter_count() const;
  // Relative covariance factor Λ for a parameter vector.
  Eigen::MatrixXd factor(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd initial_parameters() const;

  // REML log-likelihood at θ, with its gradient when `grad` is non-null.
  double log_likelihood(const Eigen::VectorXd& theta, Eigen::VectorXd* grad = nullptr) const;

  struct Profile {
    Eigen::VectorXd beta;
    Eigen::MatrixXd beta_cov_unscaled;  // (Xᵀ H⁻¹ X)⁻¹
    double sigma2 = 0.0;
    double log_likelihood = 0.0;
  };
  Profile profile(const Eigen::VectorXd& theta) const;

  int n_obs() const { return n_; }
  int n_fixed() const { return p_; }
  int n_random() const { return q_; }

 private:
  struct GroupStats {
    Eigen::MatrixXd zz;  // q × q
    Eigen::MatrixXd zx;  // q × p
    Eigen::VectorXd zy;  // q
  };

  double evaluate(const Eigen::VectorXd& theta, Eigen::VectorXd* grad, Profile* profile) const;

  CovarianceStructure structure_;
  int n_ = 0, p_ = 0, q_ = 0;
  std::vector<GroupStats> groups_;
  Eigen::MatrixXd xx_;
  Eigen::VectorXd xy_;
  double yy_ = 0.0;
};

struct FixedEffect {
  std::string name;
  double estimate = 0.0;
  double se = 0.0;
  double z = 0.0;
  double p_value = 1.0;  // two-sided, standard normal reference
};

struct MixedModelFit {
  std::vector<FixedEffect> fixed;
  std::vector<std::string> random_names;
  Eigen::MatrixXd random_covariance;  // G, q × q
  double residual_variance = 0.0;
  double reml_loglik = 0.0;
  Eigen::VectorXd theta;
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<std::string> warnings;

  const FixedEffect& coefficient(const std::string& name) const;
};

struct LmmOptions {
  CovarianceStructure covariance = CovarianceStructure::diagonal;
  BfgsOptions optimizer;
  // Variance parameters whose removal costs less than this much
  // log-likelihood are clamped to zero.
  double boundary_tolerance = 1e-7;
};

// Throws ValidationError when there are fewer than 2 groups, the fixed design
// is rank deficient, or there are no residual degrees of freedom.
MixedModelFit fit_lmm(const LmmData& data, const LmmOptions& options = {});

// Ordinary least squares coefficients (reference for degenerate fits).
Eigen::VectorXd ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

}  // namespace xmeat
