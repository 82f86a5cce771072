#pragma once

#include <span>
#include <vector>

namespace xmeat {

enum class VarianceKind { population, sample };

double mean(std::span<const double> v);
// Two-pass variance; population divides by n, sample by n - 1.
double variance(std::span<const double> v, VarianceKind kind = VarianceKind::population);
double std_dev(std::span<const double> v, VarianceKind kind = VarianceKind::population);

// z-scores using the population standard deviation. Throws DegenerateError
// ("zero variance predictor") for constant input or fewer than 2 values.
std::vector<double> standardize(std::span<const double> values);

struct PearsonResult {
  double r = 0.0;
  double p_value = 1.0;  // two-sided, t with n - 2 degrees of freedom
  size_t n = 0;
};

// Throws ValidationError for n < 3 or mismatched lengths and DegenerateError
// when either variable is constant.
PearsonResult pearson(std::span<const double> x, std::span<const double> y);

// Two-sided p-value for a z statistic under the standard normal.
double normal_two_sided_p(double z);
// Two-sided p-value for a t statistic with `df` degrees of freedom.
double student_t_two_sided_p(double t, double df);

}  // namespace xmeat
