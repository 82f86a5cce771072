#include <random>

#include <benchmark/benchmark.h>

#include "xmeat/eat.hpp"

using namespace xmeat;

namespace {

StimulusMatrix random_matrix(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  StimulusMatrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = normal(rng);
  return m;
}

// Args: targets per side, attributes per side, embedding width.
void BM_EffectSize(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const int n = static_cast<int>(state.range(0)), m = static_cast<int>(state.range(1));
  const int dim = static_cast<int>(state.range(2));
  const auto x = random_matrix(rng, n, dim), y = random_matrix(rng, n, dim);
  const auto a = random_matrix(rng, m, dim), b = random_matrix(rng, m, dim);
  for (auto _ : state) benchmark::DoNotOptimize(effect_size(x, y, a, b));
  state.SetItemsProcessed(state.iterations() * 2 * n * 2 * m);
}
BENCHMARK(BM_EffectSize)->Args({8, 25, 512})->Args({25, 150, 512})->Args({25, 150, 1024});

void BM_PermutationExact(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const int n = static_cast<int>(state.range(0));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> sx(n), sy(n);
  for (auto& v : sx) v = normal(rng);
  for (auto& v : sy) v = normal(rng);
  for (auto _ : state) benchmark::DoNotOptimize(permutation_p_from_scores(sx, sy, PermutationMode::exact()));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(binomial(2 * n, n)));
}
BENCHMARK(BM_PermutationExact)->Arg(4)->Arg(8)->Arg(9);

void BM_PermutationMonteCarlo(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const int n = static_cast<int>(state.range(0));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> sx(n), sy(n);
  for (auto& v : sx) v = normal(rng);
  for (auto& v : sy) v = normal(rng);
  const auto mode = PermutationMode::monte_carlo(7, 50'000);
  for (auto _ : state) benchmark::DoNotOptimize(permutation_p_from_scores(sx, sy, mode));
  state.SetItemsProcessed(state.iterations() * 50'000);
}
BENCHMARK(BM_PermutationMonteCarlo)->Arg(8)->Arg(25);

}  // namespace
