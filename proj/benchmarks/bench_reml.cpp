#include <random>

#include <benchmark/benchmark.h>

#include "xmeat/mixed_model.hpp"

using namespace xmeat;

namespace {

// Regression-shaped data: p fixed effects, q of them also random by group.
LmmData simulate(int n, int groups, int p, int q, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  LmmData d;
  d.x.resize(n, p);
  d.y.resize(n);
  d.group.resize(n);
  d.n_groups = groups;
  std::vector<Eigen::VectorXd> u(groups, Eigen::VectorXd(q));
  for (auto& v : u)
    for (auto& c : v) c = 0.3 * normal(rng);
  for (int i = 0; i < n; ++i) {
    d.group[i] = i % groups;
    d.x(i, 0) = 1.0;
    for (int k = 1; k < p; ++k) d.x(i, k) = normal(rng);
    d.y[i] = d.x.row(i).sum() + d.x.row(i).head(q).dot(u[d.group[i]]) + normal(rng);
  }
  d.z = d.x.leftCols(q);
  for (int k = 0; k < p; ++k) d.fixed_names.push_back("b" + std::to_string(k));
  for (int k = 0; k < q; ++k) d.random_names.push_back("b" + std::to_string(k));
  return d;
}

void BM_FitDiagonal(benchmark::State& state) {
  const auto data = simulate(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)), 12, 3, 1);
  for (auto _ : state) benchmark::DoNotOptimize(fit_lmm(data));
}
BENCHMARK(BM_FitDiagonal)->Args({200, 10})->Args({3406, 20})->Args({3406, 26})->Unit(benchmark::kMillisecond);

void BM_FitUnstructured(benchmark::State& state) {
  const auto data = simulate(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)), 12, 3, 2);
  LmmOptions opts;
  opts.covariance = CovarianceStructure::unstructured;
  for (auto _ : state) benchmark::DoNotOptimize(fit_lmm(data, opts));
}
BENCHMARK(BM_FitUnstructured)->Args({3406, 20})->Unit(benchmark::kMillisecond);

void BM_RemlGradient(benchmark::State& state) {
  const auto data = simulate(3406, 20, 12, 3, 3);
  const RemlProblem problem(data, CovarianceStructure::unstructured);
  const Eigen::VectorXd theta = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(problem.parameter_count()), 0.4);
  Eigen::VectorXd grad;
  for (auto _ : state) benchmark::DoNotOptimize(problem.log_likelihood(theta, &grad));
}
BENCHMARK(BM_RemlGradient);

}  // namespace
