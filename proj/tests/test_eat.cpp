#include <bit>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "support.hpp"
#include "xmeat/eat.hpp"
#include "xmeat/embedding_store.hpp"
#include "xmeat/error.hpp"

using namespace xmeat;
using xmeat::testing::kFixtures;
using xmeat::testing::random_matrix;
using xmeat::testing::uniform_int;

namespace {

std::span<const double> row(const StimulusMatrix& m, int i) {
  return {m.row(i).data(), static_cast<size_t>(m.cols())};
}

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

std::string error_of(auto&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Cosine, IdentityAndOrthogonal) {
  const std::vector<double> u{0.3, -2.0, 5.0}, e1{1, 0, 0}, e2{0, 1, 0};
  EXPECT_DOUBLE_EQ(cosine(u, u), 1.0);
  EXPECT_EQ(cosine(e1, e2), 0.0);
}

TEST(Cosine, MatchesExtendedPrecision) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 500; ++t) {
    const auto m = random_matrix(rng, 2, 8);
    EXPECT_NEAR(cosine(row(m, 0), row(m, 1)), static_cast<double>(oracle::cosine(m, 0, m, 1)), 1e-12);
  }
}

TEST(Cosine, ZeroVectorIsDegenerate) {
  const std::vector<double> z{0, 0}, u{1, 0};
  EXPECT_THROW(cosine(z, u), DegenerateError);
}

TEST(Association, EqualSetsGiveZero) {
  std::mt19937_64 rng(2);
  const auto a = random_matrix(rng, 4, 5);
  const auto w = random_matrix(rng, 1, 5);
  EXPECT_EQ(association(row(w, 0), a, a), 0.0);
}

TEST(Association, AntipodalExtreme) {
  StimulusMatrix w(1, 3), a(1, 3), b(1, 3);
  w << 1, 2, 3;
  a = w;
  b = -w;
  EXPECT_DOUBLE_EQ(association(row(w, 0), a, b), 2.0);
}

TEST(Association, MatchesNaiveLoop) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 100; ++t) {
    const auto w = random_matrix(rng, 1, 5);
    const auto a = random_matrix(rng, uniform_int(rng, 1, 10), 5);
    const auto b = random_matrix(rng, uniform_int(rng, 1, 10), 5);
    EXPECT_NEAR(association(row(w, 0), a, b), static_cast<double>(oracle::association(w, 0, a, b)), 1e-12);
  }
}

TEST(Association, EmptyAttributeSet) {
  const StimulusMatrix w = StimulusMatrix::Ones(1, 3), empty(0, 3);
  EXPECT_NE(error_of([&] { association(row(w, 0), empty, w); }).find("empty attribute set"),
            std::string::npos);
}

TEST(EffectSize, IdenticalTargetsGiveZero) {
  std::mt19937_64 rng(4);
  const auto x = random_matrix(rng, 4, 5);
  const auto a = random_matrix(rng, 6, 5), b = random_matrix(rng, 6, 5);
  // X = Y elementwise: the pooled deviation is nonzero but the mean gap is 0.
  EXPECT_EQ(effect_size(x, x, a, b), 0.0);
}

TEST(EffectSize, AntisymmetryExact) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 200; ++t) {
    const int n = uniform_int(rng, 2, 8), dim = uniform_int(rng, 3, 16);
    const auto x = random_matrix(rng, n, dim), y = random_matrix(rng, n, dim);
    const auto a = random_matrix(rng, uniform_int(rng, 2, 25), dim);
    const auto b = random_matrix(rng, a.rows(), dim);
    const double d = effect_size(x, y, a, b);
    EXPECT_EQ(effect_size(y, x, a, b), -d);
    EXPECT_EQ(effect_size(x, y, b, a), -d);
  }
}

TEST(EffectSize, MatchesIndependentImplementation) {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 200; ++t) {
    const auto x = random_matrix(rng, 4, 5), y = random_matrix(rng, 4, 5);
    const auto a = random_matrix(rng, 5, 5), b = random_matrix(rng, 5, 5);
    EXPECT_NEAR(effect_size(x, y, a, b), static_cast<double>(oracle::effect_size(x, y, a, b)), 1e-10);
    EXPECT_NEAR(effect_size(x, y, a, b, StdDevKind::sample),
                static_cast<double>(oracle::effect_size(x, y, a, b, true)), 1e-10);
  }
}

TEST(EffectSize, PowerOfTwoScaleIsBitExact) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 100; ++t) {
    auto x = random_matrix(rng, 3, 6), y = random_matrix(rng, 3, 6);
    auto a = random_matrix(rng, 4, 6), b = random_matrix(rng, 4, 6);
    const double d = effect_size(x, y, a, b);
    x.row(0) *= std::ldexp(1.0, uniform_int(rng, -30, 30));
    a.row(1) *= std::ldexp(1.0, uniform_int(rng, -30, 30));
    b *= 0.125;
    EXPECT_EQ(effect_size(x, y, a, b), d);
  }
}

TEST(EffectSize, BoundHolds) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 2000; ++t) {
    const int n = uniform_int(rng, 2, 8), dim = uniform_int(rng, 2, 10);
    const auto x = random_matrix(rng, n, dim), y = random_matrix(rng, n, dim);
    const auto a = random_matrix(rng, uniform_int(rng, 1, 6), dim);
    const auto b = random_matrix(rng, uniform_int(rng, 1, 6), dim);
    EXPECT_LE(std::abs(effect_size(x, y, a, b)), 2.0);
  }
}

TEST(EffectSize, PerfectSeparationReachesTwo) {
  const std::vector<double> sx{1, 1, 1}, sy{-1, -1, -1};
  EXPECT_DOUBLE_EQ(effect_size_from_scores(sx, sy), 2.0);
}

TEST(EffectSize, Errors) {
  const std::vector<double> c{0.5, 0.5}, three{1, 2, 3}, two{1, 2};
  EXPECT_NE(error_of([&] { effect_size_from_scores(c, c); }).find("degenerate test (constant associations)"),
            std::string::npos);
  EXPECT_NE(error_of([&] { effect_size_from_scores(three, two); }).find("unbalanced targets"),
            std::string::npos);
}

TEST(Permutation, Binomials) {
  EXPECT_EQ(binomial(6, 3), 20u);
  EXPECT_EQ(binomial(8, 4), 70u);
  EXPECT_EQ(binomial(20, 10), 184756u);
  EXPECT_EQ(binomial(3, 5), 0u);
}

TEST(Permutation, ExactDenominators) {
  std::mt19937_64 rng(9);
  for (int n : {3, 4}) {
    for (int t = 0; t < 50; ++t) {
      const auto x = random_matrix(rng, n, 6), y = random_matrix(rng, n, 6);
      const auto a = random_matrix(rng, 5, 6), b = random_matrix(rng, 5, 6);
      const auto r = permutation_p(x, y, a, b, PermutationMode::exact());
      EXPECT_EQ(r.total, n == 3 ? 20u : 70u);
      EXPECT_TRUE(r.exact);
      const auto o = oracle::enumerate_splits(to_vec(associations(x, a, b)), to_vec(associations(y, a, b)));
      EXPECT_EQ(r.count, o.at_least);
      EXPECT_EQ(r.total, o.total);
      EXPECT_EQ(r.p, static_cast<double>(o.at_least) / static_cast<double>(o.total));
    }
  }
}

TEST(Permutation, PlantedSeparationGivesMinimum) {
  std::mt19937_64 rng(10);
  const int dim = 8;
  const auto base = random_matrix(rng, 1, dim);
  StimulusMatrix a(6, dim), b(6, dim), x(4, dim), y(4, dim);
  auto noise = [&](double s) { return (random_matrix(rng, 1, dim) * s).eval(); };
  for (int i = 0; i < 6; ++i) {
    a.row(i) = base + noise(0.05);
    b.row(i) = -base + noise(0.05);
  }
  for (int i = 0; i < 4; ++i) {
    x.row(i) = base + noise(0.05);
    y.row(i) = -base + noise(0.05);
  }
  const auto r = permutation_p(x, y, a, b, PermutationMode::exact());
  EXPECT_EQ(r.count, 1u);
  EXPECT_EQ(r.total, 70u);
  EXPECT_DOUBLE_EQ(r.p, 1.0 / 70.0);
  EXPECT_GT(effect_size(x, y, a, b), 1.9);
}

TEST(Permutation, MonteCarloDeterministic) {
  std::mt19937_64 rng(11);
  const auto x = random_matrix(rng, 12, 6), y = random_matrix(rng, 12, 6);
  const auto a = random_matrix(rng, 5, 6), b = random_matrix(rng, 5, 6);
  const auto mode = PermutationMode::monte_carlo(42, 5000);
  const auto r1 = permutation_p(x, y, a, b, mode);
  const auto r2 = permutation_p(x, y, a, b, mode);
  EXPECT_EQ(r1.p, r2.p);
  EXPECT_EQ(r1.count, r2.count);
  EXPECT_FALSE(r1.exact);
  EXPECT_EQ(r1.p, (1.0 + r1.count) / (1.0 + 5000.0));
}

TEST(Permutation, AutomaticSwitchesOnSize) {
  std::mt19937_64 rng(12);
  const auto a = random_matrix(rng, 4, 5), b = random_matrix(rng, 4, 5);
  PermutationMode automatic;
  automatic.seed = 1;
  automatic.samples = 1000;
  const auto small = permutation_p(random_matrix(rng, 8, 5), random_matrix(rng, 8, 5), a, b, automatic);
  EXPECT_TRUE(small.exact);
  EXPECT_EQ(small.total, binomial(16, 8));
  const auto large = permutation_p(random_matrix(rng, 18, 5), random_matrix(rng, 18, 5), a, b, automatic);
  EXPECT_FALSE(large.exact);
  EXPECT_THROW(permutation_p(random_matrix(rng, 18, 5), random_matrix(rng, 18, 5), a, b,
                             PermutationMode::exact()),
               ValidationError);
}

TEST(Permutation, Unbalanced) {
  const std::vector<double> three{1, 2, 3}, two{1, 2};
  EXPECT_NE(error_of([&] { permutation_p_from_scores(three, two, PermutationMode::exact()); })
                .find("unbalanced targets"),
            std::string::npos);
}

namespace {

// Bundle with X ≡ A cluster and Y ≡ B cluster.
struct Planted {
  Registry registry;
  EmbeddingBundle bundle;
  EatTestSpec spec;
};

Planted planted(bool swap_targets) {
  std::vector<StimulusItem> items;
  std::vector<StimulusSet> sets;
  auto add_set = [&](const std::string& name, Role role, Pole pole, std::optional<Category> cat,
                     Variant variant, int n) {
    StimulusSet s{name, role, pole, Modality::text, cat, variant, {}};
    for (int i = 0; i < n; ++i) {
      const std::string id = name + "_" + std::to_string(i);
      items.push_back({id, Modality::text, id, role, pole, cat, variant, ""});
      s.item_ids.push_back(id);
    }
    sets.push_back(s);
  };
  add_set("x", Role::target, Pole::first, Category::flower_insect, Variant::words, 4);
  add_set("y", Role::target, Pole::second, Category::flower_insect, Variant::words, 4);
  add_set("a", Role::attribute, Pole::first, std::nullopt, Variant::classic_attr, 5);
  add_set("b", Role::attribute, Pole::second, std::nullopt, Variant::classic_attr, 5);
  Registry reg(items, sets);

  std::mt19937_64 rng(13);
  std::normal_distribution<float> noise(0.0f, 0.02f);
  EmbeddingBundle bundle("planted", 6);
  for (const auto& item : items) {
    const char g = item.id[0];
    const bool first = g == 'a' || (g == 'x' && !swap_targets) || (g == 'y' && swap_targets);
    std::vector<float> v(6);
    for (auto& c : v) c = noise(rng);
    v[0] += first ? 3.0f : -3.0f;
    bundle.add(item.id, v);
  }
  EatTestSpec spec{"flower_insect/all_text/words", Category::flower_insect, ModalityCombo::all_text,
                   AttrVariant::classic, "x", "y", "a", "b"};
  return {std::move(reg), std::move(bundle), spec};
}

}  // namespace

TEST(RunTest, PlantedClustersNearTwo) {
  const auto p = planted(false);
  EatOptions opts;
  opts.permutation = PermutationMode::exact();
  const auto r = run_test(p.spec, p.registry, p.bundle, opts);
  EXPECT_GT(r.d, 1.95);
  EXPECT_DOUBLE_EQ(r.p_value, 1.0 / 70.0);
  EXPECT_EQ(r.permutation_mode, "exact");
  EXPECT_EQ(r.n_targets_per_side, 4u);
  EXPECT_EQ(r.n_attrs_a, 5u);
}

TEST(RunTest, SwappedTargetsNegate) {
  const auto p = planted(false), q = planted(true);
  const auto r = run_test(p.spec, p.registry, p.bundle);
  const auto s = run_test(q.spec, q.registry, q.bundle);
  EXPECT_LT(s.d, -1.95);
  EXPECT_NEAR(s.d, -r.d, 1e-2);
}

TEST(RunTest, MissingStimulus) {
  auto p = planted(false);
  EmbeddingBundle partial("partial", 6);
  partial.add(p.bundle.ids().front(), std::vector<float>(6, 1.0f));
  EXPECT_NE(error_of([&] { run_test(p.spec, p.registry, partial); }).find("missing stimul"),
            std::string::npos);
}

TEST(RunGrid, ThreadCountDoesNotChangeResults) {
  const Registry reg = Registry::load(kFixtures / "registry");
  std::vector<EmbeddingBundle> bundles;
  for (const auto& dir : list_bundles(kFixtures / "bundles")) bundles.push_back(read_bundle(dir));
  bundles.resize(3);
  const auto suite = build_test_suite(reg, AttrVariant::controlled);
  EatOptions opts;
  opts.permutation = PermutationMode::monte_carlo(5, 500);
  const auto one = run_grid(suite, reg, bundles, opts, 1);
  const auto four = run_grid(suite, reg, bundles, opts, 4);
  ASSERT_EQ(one.size(), 3u * 26u);
  ASSERT_EQ(four.size(), one.size());
  for (size_t i = 0; i < one.size(); ++i) {
    EXPECT_EQ(one[i].model_id, four[i].model_id);
    EXPECT_EQ(one[i].test_id, four[i].test_id);
    EXPECT_EQ(one[i].d, four[i].d);
    EXPECT_EQ(one[i].p_value, four[i].p_value);
  }
}

TEST(RunGrid, ArbitraryScaleOfStoredVectorsBarelyMovesD) {
  const Registry reg = Registry::load(kFixtures / "registry");
  const auto bundle = read_bundle(list_bundles(kFixtures / "bundles").front());
  EmbeddingBundle scaled(bundle.model_id(), bundle.dim());
  for (size_t i = 0; i < bundle.size(); ++i) {
    std::vector<float> v(bundle.row(i).begin(), bundle.row(i).end());
    for (auto& c : v) c *= 4.0f;
    scaled.add(bundle.ids()[i], v);
  }
  EatOptions opts;
  opts.permutation = PermutationMode::monte_carlo(5, 500);
  for (const auto& spec : build_test_suite(reg, AttrVariant::classic)) {
    const auto r = run_test(spec, reg, bundle, opts), s = run_test(spec, reg, scaled, opts);
    EXPECT_EQ(r.d, s.d) << spec.test_id;
    EXPECT_EQ(r.p_value, s.p_value) << spec.test_id;
  }
}
