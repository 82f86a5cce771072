#include <filesystem>
#include <random>

#include <benchmark/benchmark.h>

#include "xmeat/embedding_store.hpp"

using namespace xmeat;
namespace fs = std::filesystem;

namespace {

// Registry-sized bundle (about 700 stimuli) at common embedding widths.
void BM_BundleRoundTrip(benchmark::State& state) {
  const auto dim = static_cast<size_t>(state.range(0));
  std::mt19937_64 rng(1);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  EmbeddingBundle bundle("bench", dim);
  for (int i = 0; i < 700; ++i) {
    std::vector<float> v(dim);
    for (auto& c : v) c = normal(rng);
    bundle.add("s" + std::to_string(i), std::move(v));
  }
  const fs::path dir = fs::temp_directory_path() / ("xmeat_bench_" + std::to_string(dim));
  for (auto _ : state) {
    write_bundle(bundle, dir);
    benchmark::DoNotOptimize(read_bundle(dir));
  }
  fs::remove_all(dir);
  state.SetBytesProcessed(state.iterations() * 700 * static_cast<int64_t>(dim) * 4);
}
BENCHMARK(BM_BundleRoundTrip)->Arg(512)->Arg(1024)->Unit(benchmark::kMillisecond);

}  // namespace
