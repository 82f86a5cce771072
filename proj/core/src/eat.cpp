#include "xmeat/eat.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <limits>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>
#include <tuple>

#include "xmeat/error.hpp"

namespace xmeat {
namespace {

double mean_cosine(std::span<const double> w, const StimulusMatrix& set) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < set.rows(); ++i) {
    sum += cosine(w, std::span<const double>(set.row(i).data(), static_cast<size_t>(set.cols())));
  }
  return sum / static_cast<double>(set.rows());
}

void require_same_dims(const StimulusMatrix& m, Eigen::Index dim, const char* what) {
  if (m.rows() > 0 && m.cols() != dim) {
    throw ValidationError(std::string("dimension mismatch in ") + what);
  }
}

double sum(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); }

double squared_deviation(std::span<const double> v, double center) {
  double acc = 0.0;
  for (double s : v) acc += (s - center) * (s - center);
  return acc;
}

std::uint64_t fnv1a(std::string_view text, std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ValidationError("cosine: dimension mismatch");
  double dot = 0.0, uu = 0.0, vv = 0.0;
  for (size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) throw DegenerateError("degenerate embedding (zero norm)");
  return std::clamp(dot / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

double association(std::span<const double> w, const StimulusMatrix& a, const StimulusMatrix& b) {
  if (a.rows() == 0 || b.rows() == 0) throw ValidationError("empty attribute set");
  return mean_cosine(w, a) - mean_cosine(w, b);
}

Eigen::VectorXd associations(const StimulusMatrix& targets, const StimulusMatrix& a,
                             const StimulusMatrix& b) {
  require_same_dims(a, targets.cols(), "attribute set A");
  require_same_dims(b, targets.cols(), "attribute set B");
  Eigen::VectorXd s(targets.rows());
  for (Eigen::Index i = 0; i < targets.rows(); ++i) {
    s[i] = association(
        std::span<const double>(targets.row(i).data(), static_cast<size_t>(targets.cols())), a, b);
  }
  return s;
}

double effect_size_from_scores(std::span<const double> sx, std::span<const double> sy,
                               StdDevKind kind) {
  if (sx.size() != sy.size()) throw ValidationError("unbalanced targets: |X| != |Y|");
  if (sx.size() < 2) throw ValidationError("effect size needs at least 2 targets per side");
  const double n = static_cast<double>(sx.size());
  const double sum_x = sum(sx);
  const double sum_y = sum(sy);
  // Group sums are combined with a single commutative addition so that
  // swapping X and Y, or negating every score, reproduces d bit-for-bit.
  const double center = (sum_x + sum_y) / (2.0 * n);
  const double ss = squared_deviation(sx, center) + squared_deviation(sy, center);
  const double denom = kind == StdDevKind::population ? 2.0 * n : 2.0 * n - 1.0;
  const double sd = std::sqrt(ss / denom);

  double scale = 0.0;
  for (double s : sx) scale = std::max(scale, std::abs(s));
  for (double s : sy) scale = std::max(scale, std::abs(s));
  if (!(sd > 1e-14 * std::max(scale, 1e-300))) {
    throw DegenerateError("degenerate test (constant associations)");
  }
  return (sum_x / n - sum_y / n) / sd;
}

double effect_size(const StimulusMatrix& x, const StimulusMatrix& y, const StimulusMatrix& a,
                   const StimulusMatrix& b, StdDevKind kind) {
  if (x.rows() != y.rows()) throw ValidationError("unbalanced targets: |X| != |Y|");
  require_same_dims(y, x.cols(), "target set Y");
  const Eigen::VectorXd sx = associations(x, a, b);
  const Eigen::VectorXd sy = associations(y, a, b);
  return effect_size_from_scores(std::span(sx.data(), static_cast<size_t>(sx.size())),
                                 std::span(sy.data(), static_cast<size_t>(sy.size())), kind);
}

std::uint64_t binomial(unsigned n, unsigned k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (unsigned i = 1; i <= k; ++i) {
    // Exact at every step: r * (n - k + i) is divisible by i.
    r = r * (n - k + i) / i;
  }
  return r;
}

PermutationResult permutation_p_from_scores(std::span<const double> sx, std::span<const double> sy,
                                            const PermutationMode& mode) {
  if (sx.size() != sy.size()) throw ValidationError("unbalanced targets: |X| != |Y|");
  const size_t n = sx.size();
  if (n == 0) throw ValidationError("unbalanced targets: empty target sets");

  std::vector<double> pooled(sx.begin(), sx.end());
  pooled.insert(pooled.end(), sy.begin(), sy.end());
  double magnitude = 0.0;
  for (double s : pooled) magnitude += std::abs(s);

  // T = Σ_S s − Σ_{S'} s = 2 Σ_S s − Σ_all s, so comparing Σ_S s is
  // equivalent. The tolerance absorbs summation-order rounding for splits
  // whose statistic equals the observed one.
  const double observed = sum(sx);
  const double tolerance = 1e-12 * std::max(magnitude, 1.0);
  const double threshold = observed - tolerance;

  const std::uint64_t partitions = n <= 32 ? binomial(static_cast<unsigned>(2 * n),
                                                      static_cast<unsigned>(n))
                                           : std::numeric_limits<std::uint64_t>::max();
  bool use_exact = false;
  switch (mode.kind) {
    case PermutationMode::Kind::exact:
      if (partitions > kMaxExactPartitions) {
        throw ValidationError("exact permutation test infeasible: C(" + std::to_string(2 * n) +
                              "," + std::to_string(n) + ") exceeds " +
                              std::to_string(kMaxExactPartitions));
      }
      use_exact = true;
      break;
    case PermutationMode::Kind::automatic:
      use_exact = partitions <= kMaxExactPartitions;
      break;
    case PermutationMode::Kind::monte_carlo:
      use_exact = false;
      break;
  }

  PermutationResult result;
  if (use_exact) {
    // Gosper's hack over n-of-2n bitmasks.
    const unsigned bits = static_cast<unsigned>(2 * n);
    std::uint64_t count = 0, total = 0;
    std::uint64_t mask = (std::uint64_t{1} << n) - 1;
    const std::uint64_t limit = std::uint64_t{1} << bits;
    while (mask < limit) {
      double s = 0.0;
      for (std::uint64_t m = mask; m; m &= m - 1) s += pooled[static_cast<size_t>(std::countr_zero(m))];
      if (s >= threshold) ++count;
      ++total;
      const std::uint64_t c = mask & (~mask + 1);
      const std::uint64_t r = mask + c;
      mask = (((r ^ mask) >> 2) / c) | r;
    }
    result.count = count;
    result.total = total;
    result.exact = true;
    result.p = static_cast<double>(count) / static_cast<double>(total);
    return result;
  }

  if (mode.samples == 0) throw ValidationError("Monte Carlo permutation needs samples > 0");
  std::mt19937_64 rng(mode.seed);
  std::vector<size_t> idx(2 * n);
  std::uint64_t count = 0;
  for (std::uint64_t it = 0; it < mode.samples; ++it) {
    std::iota(idx.begin(), idx.end(), size_t{0});
    double s = 0.0;
    // Partial Fisher-Yates: the first n slots form a uniform random subset.
    for (size_t i = 0; i < n; ++i) {
      std::uniform_int_distribution<size_t> pick(i, 2 * n - 1);
      std::swap(idx[i], idx[pick(rng)]);
      s += pooled[idx[i]];
    }
    if (s >= threshold) ++count;
  }
  result.count = count;
  result.total = mode.samples;
  result.exact = false;
  result.seed = mode.seed;
  result.p = static_cast<double>(1 + count) / static_cast<double>(1 + mode.samples);
  return result;
}

PermutationResult permutation_p(const StimulusMatrix& x, const StimulusMatrix& y,
                                const StimulusMatrix& a, const StimulusMatrix& b,
                                const PermutationMode& mode) {
  if (x.rows() != y.rows()) throw ValidationError("unbalanced targets: |X| != |Y|");
  const Eigen::VectorXd sx = associations(x, a, b);
  const Eigen::VectorXd sy = associations(y, a, b);
  return permutation_p_from_scores(std::span(sx.data(), static_cast<size_t>(sx.size())),
                                   std::span(sy.data(), static_cast<size_t>(sy.size())), mode);
}

StimulusMatrix resolve(const EmbeddingBundle& bundle, const std::vector<std::string>& ids) {
  StimulusMatrix m(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(bundle.dim()));
  for (size_t i = 0; i < ids.size(); ++i) {
    auto v = bundle.vector(ids[i]);
    double norm_sq = 0.0;
    for (float f : v) norm_sq += static_cast<double>(f) * static_cast<double>(f);
    if (norm_sq == 0.0) throw DegenerateError("degenerate embedding for '" + ids[i] + "'");
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (size_t c = 0; c < v.size(); ++c) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = static_cast<double>(v[c]) * inv;
    }
  }
  return m;
}

EatResult run_test(const EatTestSpec& spec, const Registry& registry, const EmbeddingBundle& bundle,
                   const EatOptions& options) {
  std::vector<std::string> missing;
  for (const auto& id : referenced_ids(registry, spec)) {
    if (!bundle.contains(id)) missing.push_back(id);
  }
  if (!missing.empty()) {
    throw ValidationError("missing stimuli for " + spec.test_id + " in " + bundle.model_id() +
                          ": " + std::to_string(missing.size()) + " ids, first '" +
                          missing.front() + "'");
  }

  const StimulusMatrix x = resolve(bundle, registry.set(spec.x).item_ids);
  const StimulusMatrix y = resolve(bundle, registry.set(spec.y).item_ids);
  const StimulusMatrix a = resolve(bundle, registry.set(spec.a).item_ids);
  const StimulusMatrix b = resolve(bundle, registry.set(spec.b).item_ids);

  const Eigen::VectorXd sx = associations(x, a, b);
  const Eigen::VectorXd sy = associations(y, a, b);
  const std::span<const double> span_x(sx.data(), static_cast<size_t>(sx.size()));
  const std::span<const double> span_y(sy.data(), static_cast<size_t>(sy.size()));

  PermutationMode mode = options.permutation;
  mode.seed = fnv1a(spec.test_id, fnv1a(bundle.model_id(), fnv1a(std::to_string(mode.seed))));
  mode.seed ^= static_cast<std::uint64_t>(spec.attr_variant);

  EatResult r;
  r.model_id = bundle.model_id();
  r.test_id = spec.test_id;
  r.category = spec.category;
  r.modality_combo = spec.modality_combo;
  r.attr_variant = spec.attr_variant;
  r.d = effect_size_from_scores(span_x, span_y, options.std_dev);
  const PermutationResult perm = permutation_p_from_scores(span_x, span_y, mode);
  r.p_value = perm.p;
  r.permutation_mode = perm.exact ? "exact"
                                  : "monte_carlo(seed=" + std::to_string(options.permutation.seed) +
                                        ",n=" + std::to_string(perm.total) + ")";
  r.n_targets_per_side = static_cast<size_t>(x.rows());
  r.n_attrs_a = static_cast<size_t>(a.rows());
  r.n_attrs_b = static_cast<size_t>(b.rows());
  return r;
}

std::vector<EatResult> run_grid(const std::vector<EatTestSpec>& suite, const Registry& registry,
                                const std::vector<EmbeddingBundle>& bundles,
                                const EatOptions& options, unsigned threads) {
  const size_t jobs = suite.size() * bundles.size();
  std::vector<EatResult> results(jobs);
  std::vector<std::exception_ptr> errors(jobs);
  std::atomic<size_t> next{0};

  auto worker = [&] {
    for (size_t job = next++; job < jobs; job = next++) {
      const auto& bundle = bundles[job / suite.size()];
      const auto& spec = suite[job % suite.size()];
      try {
        results[job] = run_test(spec, registry, bundle, options);
      } catch (...) {
        errors[job] = std::current_exception();
      }
    }
  };

  const unsigned n_threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(jobs)));
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::sort(results.begin(), results.end(), [](const EatResult& l, const EatResult& r) {
    return std::tie(l.model_id, l.test_id, l.attr_variant) <
           std::tie(r.model_id, r.test_id, r.attr_variant);
  });
  return results;
}

}  // namespace xmeat
