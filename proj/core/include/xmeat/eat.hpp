#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "xmeat/embedding_store.hpp"
#include "xmeat/stimulus.hpp"

namespace xmeat {

// One stimulus per row.
using StimulusMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class StdDevKind { population, sample };

// Largest C(2n, n) that exact mode enumerates.
inline constexpr std::uint64_t kMaxExactPartitions = 200'000;

struct PermutationMode {
  enum class Kind { exact, monte_carlo, automatic };
  Kind kind = Kind::automatic;
  std::uint64_t seed = 0;
  std::uint64_t samples = 50'000;

  static PermutationMode exact() { return {Kind::exact, 0, 0}; }
  static PermutationMode monte_carlo(std::uint64_t seed, std::uint64_t samples) {
    return {Kind::monte_carlo, seed, samples};
  }
};

struct PermutationResult {
  double p = 1.0;
  // p = count / total for exact mode, (1 + count) / (1 + total) for Monte Carlo.
  std::uint64_t count = 0;
  std::uint64_t total = 0;
  bool exact = true;
  std::uint64_t seed = 0;
};

// Cosine similarity clamped to [-1, 1]. Throws DegenerateError on zero norm.
double cosine(std::span<const double> u, std::span<const double> v);

// s(w, A, B): mean cosine of w to A minus mean cosine of w to B.
double association(std::span<const double> w, const StimulusMatrix& a, const StimulusMatrix& b);

// s(w, A, B) for every row w of `targets`.
Eigen::VectorXd associations(const StimulusMatrix& targets, const StimulusMatrix& a,
                             const StimulusMatrix& b);

// Standardised difference of mean associations between X and Y. Requires
// |X| = |Y| >= 2; the deviation is taken over X ∪ Y.
double effect_size(const StimulusMatrix& x, const StimulusMatrix& y, const StimulusMatrix& a,
                   const StimulusMatrix& b, StdDevKind kind = StdDevKind::population);

// Effect size from precomputed associations of X and Y.
double effect_size_from_scores(std::span<const double> sx, std::span<const double> sy,
                               StdDevKind kind = StdDevKind::population);

// One-sided p for T = Σ_X s − Σ_Y s over equal-size repartitions of X ∪ Y.
PermutationResult permutation_p(const StimulusMatrix& x, const StimulusMatrix& y,
                                const StimulusMatrix& a, const StimulusMatrix& b,
                                const PermutationMode& mode);
PermutationResult permutation_p_from_scores(std::span<const double> sx, std::span<const double> sy,
                                            const PermutationMode& mode);

std::uint64_t binomial(unsigned n, unsigned k);

struct EatOptions {
  StdDevKind std_dev = StdDevKind::population;
  PermutationMode permutation;
};

struct EatResult {
  std::string model_id;
  std::string test_id;
  Category category = Category::flower_insect;
  ModalityCombo modality_combo = ModalityCombo::all_text;
  AttrVariant attr_variant = AttrVariant::controlled;
  double d = 0.0;
  double p_value = 1.0;
  size_t n_targets_per_side = 0;
  size_t n_attrs_a = 0;
  size_t n_attrs_b = 0;
  // "exact" or "monte_carlo(seed=S,n=N)".
  std::string permutation_mode;
};

// Resolves the rows for `ids` from the bundle as unit-norm vectors.
StimulusMatrix resolve(const EmbeddingBundle& bundle, const std::vector<std::string>& ids);

// Runs one test against one bundle. Monte Carlo seeds are derived from the
// configured seed and (model_id, test_id) so grid order does not matter.
EatResult run_test(const EatTestSpec& spec, const Registry& registry, const EmbeddingBundle& bundle,
                   const EatOptions& options = {});

// Every (bundle, spec) pair, evaluated with up to `threads` workers. Output
// is sorted by (model_id, test_id, attr_variant).
std::vector<EatResult> run_grid(const std::vector<EatTestSpec>& suite, const Registry& registry,
                                const std::vector<EmbeddingBundle>& bundles,
                                const EatOptions& options = {}, unsigned threads = 1);

}  // namespace xmeat
