#include "xmeat/stats.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/students_t.hpp>

#include "xmeat/error.hpp"

namespace xmeat {

double mean(std::span<const double> v) {
  if (v.empty()) throw ValidationError("mean of empty sequence");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double variance(std::span<const double> v, VarianceKind kind) {
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  const double n = static_cast<double>(v.size());
  if (kind == VarianceKind::sample) {
    if (v.size() < 2) throw ValidationError("sample variance needs at least 2 values");
    return ss / (n - 1.0);
  }
  return ss / n;
}

double std_dev(std::span<const double> v, VarianceKind kind) { return std::sqrt(variance(v, kind)); }

std::vector<double> standardize(std::span<const double> values) {
  if (values.size() < 2) throw DegenerateError("zero variance predictor (fewer than 2 values)");
  const double m = mean(values);
  const double sd = std_dev(values);
  // Relative test: the mean of identical values need not reproduce them
  // exactly, which leaves a rounding-level spread.
  if (!(sd > 1e-12 * std::abs(m))) throw DegenerateError("zero variance predictor");
  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values) out.push_back((v - m) / sd);
  return out;
}

double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

double student_t_two_sided_p(double t, double df) {
  if (!std::isfinite(t)) return 0.0;
  boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

PearsonResult pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("pearson: length mismatch");
  if (x.size() < 3) throw ValidationError("pearson: need at least 3 pairs");
  const double mx = mean(x), my = mean(y);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  const double rel = 1e-24 * static_cast<double>(x.size());
  if (!(sxx > rel * mx * mx) || !(syy > rel * my * my)) {
    throw DegenerateError("pearson: constant variable");
  }

  PearsonResult res;
  res.n = x.size();
  res.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double df = static_cast<double>(res.n) - 2.0;
  if (std::abs(res.r) >= 1.0) {
    res.p_value = 0.0;
  } else {
    const double t = res.r * std::sqrt(df / (1.0 - res.r * res.r));
    res.p_value = student_t_two_sided_p(t, df);
  }
  return res;
}

}  // namespace xmeat
