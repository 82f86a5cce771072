// Acceptance suite: one PASS/FAIL/SKIP line per criterion. Exit status is
// non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "simulate.hpp"
#include "support.hpp"
#include "xmeat/aggregation.hpp"
#include "xmeat/eat.hpp"
#include "xmeat/embedding_store.hpp"
#include "xmeat/inference.hpp"
#include "xmeat/mixed_model.hpp"
#include "xmeat/pipeline.hpp"
#include "xmeat/results.hpp"

using namespace xmeat;
using xmeat::testing::random_matrix;
using xmeat::testing::uniform_int;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  enum class Status { pass, fail, skip } status;
  std::string detail;
};

Outcome pass_if(bool ok, std::string detail) {
  return {ok ? Outcome::Status::pass : Outcome::Status::fail, std::move(detail)};
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

// ---------------------------------------------------------------------------

Outcome effect_size_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240101);
  double max_err = 0.0, max_scale_dev = 0.0;
  int antisym_fail = 0, pow2_fail = 0;
  for (int inst = 0; inst < 1000; ++inst) {
    const int dim = uniform_int(rng, 3, 16), n = uniform_int(rng, 2, 8), m = uniform_int(rng, 2, 25);
    const auto x = random_matrix(rng, n, dim), y = random_matrix(rng, n, dim);
    const auto a = random_matrix(rng, m, dim), b = random_matrix(rng, m, dim);
    const double d = effect_size(x, y, a, b);
    max_err = std::max(max_err, std::abs(d - static_cast<double>(oracle::effect_size(x, y, a, b))));
    if (effect_size(y, x, a, b) != -d || effect_size(x, y, b, a) != -d) ++antisym_fail;

    auto scale_rows = [&](StimulusMatrix mat, bool power_of_two) {
      std::uniform_real_distribution<double> u(1e-3, 1e3);
      for (Eigen::Index r = 0; r < mat.rows(); ++r)
        mat.row(r) *= power_of_two ? std::ldexp(1.0, uniform_int(rng, -40, 40)) : u(rng);
      return mat;
    };
    if (effect_size(scale_rows(x, true), scale_rows(y, true), scale_rows(a, true), scale_rows(b, true)) != d)
      ++pow2_fail;
    const double arbitrary =
        effect_size(scale_rows(x, false), scale_rows(y, false), scale_rows(a, false), scale_rows(b, false));
    max_scale_dev = std::max(max_scale_dev, std::abs(arbitrary - d));
  }
  const double elapsed = seconds_since(t0);
  const bool ok = max_err <= 1e-10 && antisym_fail == 0 && pow2_fail == 0 && max_scale_dev <= 1e-12 &&
                  elapsed < 5.0;
  return pass_if(ok, fmt("1000 instances; max |d - oracle| = %.2e (<= 1e-10); antisymmetry violations %d; "
                         "power-of-two scale bit mismatches %d; arbitrary-scale max deviation %.2e "
                         "(<= 1e-12); %.2f s (< 5 s)",
                         max_err, antisym_fail, pow2_fail, max_scale_dev, elapsed));
}

Outcome exact_permutation() {
  std::mt19937_64 rng(20240202);
  int exact_mismatch = 0, exact_checked = 0;
  for (int n : {3, 4}) {
    for (int inst = 0; inst < 50; ++inst) {
      const auto x = random_matrix(rng, n, 6), y = random_matrix(rng, n, 6);
      const auto a = random_matrix(rng, 5, 6), b = random_matrix(rng, 5, 6);
      const auto r = permutation_p(x, y, a, b, PermutationMode::exact());
      const auto o = oracle::enumerate_splits(to_vec(associations(x, a, b)), to_vec(associations(y, a, b)));
      const std::uint64_t expected_total = n == 3 ? 20 : 70;
      if (r.total != expected_total || o.total != expected_total || r.count != o.at_least ||
          r.p != static_cast<double>(o.at_least) / static_cast<double>(o.total))
        ++exact_mismatch;
      ++exact_checked;
    }
  }

  constexpr std::uint64_t kSamples = 50'000;
  int mc_outside = 0;
  double worst = 0.0;
  std::string outliers;
  for (int inst = 0; inst < 100; ++inst) {
    const int n = uniform_int(rng, 3, 8);
    // Mild planted signal so p spans the unit interval.
    auto x = random_matrix(rng, n, 6), y = random_matrix(rng, n, 6);
    const auto a = random_matrix(rng, 5, 6), b = random_matrix(rng, 5, 6);
    const double shift = std::uniform_real_distribution<double>(0.0, 0.6)(rng);
    x.col(0).array() += shift;
    y.col(0).array() -= shift;
    const auto exact = permutation_p(x, y, a, b, PermutationMode::exact());
    const auto mc = permutation_p(x, y, a, b, PermutationMode::monte_carlo(977 + inst, kSamples));
    const double se = std::sqrt(exact.p * (1.0 - exact.p) / static_cast<double>(kSamples));
    const double dev = std::abs(mc.p - exact.p);
    // A zero SE (p = 1) still allows the (1 + count) / (1 + N) offset.
    const double allowed = std::max(3.0 * se, 1.0 / static_cast<double>(kSamples + 1));
    if (dev > allowed) {
      ++mc_outside;
      outliers += fmt(" [instance %d: n=%d exact p=%llu/%llu MC p=%.6f, %.2f SE]", inst, n,
                      static_cast<unsigned long long>(exact.count), static_cast<unsigned long long>(exact.total),
                      mc.p, dev / se);
    }
    if (se > 0) worst = std::max(worst, dev / se);
  }
  return pass_if(exact_mismatch == 0 && mc_outside == 0,
                 fmt("exact: %d/%d instances match enumeration (denominators 20, 70); Monte Carlo N=50000: "
                     "%d/100 outside 3 SE (worst %.2f SE)%s",
                     exact_checked - exact_mismatch, exact_checked, mc_outside, worst, outliers.c_str()));
}

Outcome effect_size_bound() {
  std::mt19937_64 rng(20240303);
  int violations = 0;
  double largest = 0.0;
  for (int inst = 0; inst < 10'000; ++inst) {
    const int dim = uniform_int(rng, 2, 16), n = uniform_int(rng, 2, 8);
    auto x = random_matrix(rng, n, dim), y = random_matrix(rng, n, dim);
    const auto a = random_matrix(rng, uniform_int(rng, 1, 25), dim);
    const auto b = random_matrix(rng, uniform_int(rng, 1, 25), dim);
    if (inst % 2 == 0) {
      // Push half the instances towards separation.
      x.col(0).array() += 3.0;
      y.col(0).array() -= 3.0;
    }
    const double d = std::abs(effect_size(x, y, a, b));
    largest = std::max(largest, d);
    if (d > 2.0) ++violations;
  }
  return pass_if(violations == 0, fmt("10000 instances; violations %d; max |d| = %.6f", violations, largest));
}

Outcome mixed_model() {
  const auto truth = xmeat::testing::default_truth();
  double slowest = 0.0;
  int fits_not_converged = 0;
  std::array<int, 3> covered{0, 0, 0};
  for (int rep = 0; rep < 100; ++rep) {
    const auto data = xmeat::testing::simulate_lmm(5000 + rep, truth, 10, 20);
    const auto t0 = Clock::now();
    const auto fit = fit_lmm(data);
    slowest = std::max(slowest, seconds_since(t0));
    if (!fit.converged) ++fits_not_converged;
    for (int k = 0; k < 3; ++k) {
      if (std::abs(fit.fixed[k].estimate - truth.beta[k]) <= 2.0 * fit.fixed[k].se) ++covered[k];
    }
  }

  double ols_err = 0.0;
  for (int rep = 0; rep < 10; ++rep) {
    const auto data = xmeat::testing::simulate_lmm(7000 + rep, xmeat::testing::zero_variance_truth(), 10, 20, true);
    const auto t0 = Clock::now();
    const auto fit = fit_lmm(data);
    slowest = std::max(slowest, seconds_since(t0));
    const Eigen::VectorXd reference = ols(data.x, data.y);
    for (int k = 0; k < 3; ++k) ols_err = std::max(ols_err, std::abs(fit.fixed[k].estimate - reference[k]));
  }

  double grad_rel = 0.0;
  std::mt19937_64 rng(20240404);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (auto structure : {CovarianceStructure::diagonal, CovarianceStructure::unstructured}) {
    for (int rep = 0; rep < 20; ++rep) {
      const auto data = xmeat::testing::simulate_lmm(8000 + rep, truth, uniform_int(rng, 3, 10), uniform_int(rng, 5, 15));
      const RemlProblem problem(data, structure);
      Eigen::VectorXd theta(problem.parameter_count());
      for (auto& t : theta) t = u(rng);
      Eigen::VectorXd grad;
      problem.log_likelihood(theta, &grad);
      const auto fd = xmeat::testing::finite_difference_gradient(problem, theta);
      grad_rel = std::max(grad_rel, (grad - fd).lpNorm<Eigen::Infinity>() /
                                        std::max(1.0, grad.lpNorm<Eigen::Infinity>()));
    }
  }
  const int worst_cover = *std::min_element(covered.begin(), covered.end());
  const bool ok = worst_cover >= 90 && ols_err <= 1e-6 && grad_rel <= 1e-4 && slowest < 10.0;
  return pass_if(ok, fmt("within 2 SE: intercept %d, x1 %d, x2 %d of 100 (>= 90); non-converged %d; "
                         "zero-variance vs OLS max diff %.2e (<= 1e-6); gradient vs finite differences "
                         "rel %.2e (<= 1e-4); slowest fit %.3f s (< 10 s)",
                         covered[0], covered[1], covered[2], fits_not_converged, ols_err, grad_rel, slowest));
}

Outcome aggregation_rates() {
  std::mt19937_64 rng(20240505);
  // Planted counts: 60 rows d <= 0 (10 at exactly 0), 40 in (0, 0.2),
  // 100 in [0.2, 0.5) (15 at exactly 0.2), 120 in [0.5, 0.8), 180 >= 0.8.
  std::vector<double> ds;
  for (int i = 0; i < 50; ++i) ds.push_back(-std::uniform_real_distribution<double>(0.01, 1.5)(rng));
  for (int i = 0; i < 10; ++i) ds.push_back(0.0);
  for (int i = 0; i < 40; ++i) ds.push_back(std::uniform_real_distribution<double>(0.001, 0.199)(rng));
  for (int i = 0; i < 15; ++i) ds.push_back(0.2);
  for (int i = 0; i < 85; ++i) ds.push_back(std::uniform_real_distribution<double>(0.201, 0.499)(rng));
  for (int i = 0; i < 120; ++i) ds.push_back(std::uniform_real_distribution<double>(0.5, 0.799)(rng));
  for (int i = 0; i < 180; ++i) ds.push_back(std::uniform_real_distribution<double>(0.8, 1.99)(rng));
  std::shuffle(ds.begin(), ds.end(), rng);

  std::vector<EatResult> rows;
  for (size_t i = 0; i < ds.size(); ++i) {
    EatResult r;
    r.model_id = "m" + std::to_string(i % 17);
    r.category = kAllCategories[uniform_int(rng, 0, 4)];
    r.modality_combo = kAllCombos[uniform_int(rng, 0, 3)];
    r.attr_variant = AttrVariant::controlled;
    r.test_id = std::string(to_string(r.category)) + "/" + std::string(to_string(r.modality_combo));
    r.d = ds[i];
    rows.push_back(r);
  }
  const std::vector<double> thresholds{0.0, 0.2, 0.5, 0.8};
  const std::vector<double> planted{440.0 / 500, 400.0 / 500, 300.0 / 500, 180.0 / 500};
  const auto rates = congruence_rates(rows, thresholds);
  bool rates_exact = rates.size() == planted.size();
  for (size_t i = 0; rates_exact && i < rates.size(); ++i) rates_exact = rates[i].second == planted[i];

  const auto dense = congruence_rates(rows, {0.0, 0.1, 0.2, 0.3, 0.5, 0.8, 1.0, 1.5, 2.0});
  bool monotone = true;
  for (size_t i = 1; i < dense.size(); ++i) monotone = monotone && dense[i].second <= dense[i - 1].second;

  std::map<std::pair<Category, ModalityCombo>, std::vector<double>> groups;
  for (const auto& r : rows) groups[{r.category, r.modality_combo}].push_back(r.d);
  double max_err = 0.0;
  for (const auto& c : aggregate(rows)) {
    const auto& v = groups.at({c.category, c.modality_combo});
    long double m = 0, ss = 0;
    for (double d : v) m += d;
    m /= v.size();
    for (double d : v) ss += (d - m) * (d - m);
    max_err = std::max({max_err, std::abs(c.mean_d - static_cast<double>(m)),
                        std::abs(c.sd_d - static_cast<double>(std::sqrt(ss / v.size())))});
  }
  return pass_if(rates_exact && monotone && max_err <= 1e-12,
                 fmt("500 rows; planted rates reproduced exactly: %s; monotone: %s; aggregate vs two-pass "
                     "oracle max diff %.2e (<= 1e-12)",
                     rates_exact ? "yes" : "no", monotone ? "yes" : "no", max_err));
}

// Published figures, checked only when the released tables are available.
Outcome paper_reproduction() {
  const char* env = std::getenv("XMEAT_PAPER_DATA");
  if (!env || !fs::exists(fs::path(env) / "results.csv") || !fs::exists(fs::path(env) / "models.csv")) {
    return {Outcome::Status::skip,
            "conditional: released per-model results not present (set XMEAT_PAPER_DATA to a directory "
            "with results.csv, models.csv and optionally vtab.csv, families.csv)"};
  }
  const fs::path dir = env;
  const auto all = read_results(dir / "results.csv");
  const auto controlled = filter_variant(all, AttrVariant::controlled);
  const auto classic = filter_variant(all, AttrVariant::classic);
  std::vector<std::string> failures;
  std::ostringstream detail;
  auto check = [&](const std::string& what, double got, double want, double tol) {
    detail << what << " " << got << " (want " << want << " +/- " << tol << "); ";
    if (!(std::abs(got - want) <= tol)) failures.push_back(what);
  };

  check("controlled rows", static_cast<double>(controlled.size()), 3406, 0);
  const auto rc = congruence_rates(controlled, {0.0, 0.2});
  check("d>0 rate %", rc[0].second * 100, 78.86, 0.1);
  check("d>=0.2 rate controlled %", rc[1].second * 100, 70.23, 0.1);
  if (!classic.empty()) {
    check("d>=0.2 rate classic %", congruence_rates(classic, {0.2})[0].second * 100, 67.88, 0.1);
    const auto v = variance_comparison(classic, controlled);
    check("variance classic", v.variance_classic, 0.62, 0.01);
    check("variance controlled", v.variance_controlled, 0.59, 0.01);
  } else {
    failures.push_back("classic rows missing");
  }
  for (const auto& s : summarize_categories(controlled)) {
    if (s.category == Category::flower_insect) {
      check("flower_insect mean", s.mean_d, 1.341, 0.02);
      check("flower_insect sd", s.sd_d, 0.446, 0.02);
    }
    if (s.category == Category::instrument_weapon) {
      check("instrument_weapon mean", s.mean_d, 1.490, 0.02);
      check("instrument_weapon sd", s.sd_d, 0.390, 0.02);
    }
  }

  FamilyMap families;
  if (fs::exists(dir / "families.csv")) families = FamilyMap::load(dir / "families.csv");
  auto records = read_models(dir / "models.csv", &families);
  bool regression_ok = false;
  for (Grouping g : {Grouping::combo_category, Grouping::test}) {
    DesignOptions opts;
    opts.grouping = g;
    const auto fit = fit_mixed_model(build_design(controlled, records, opts));
    const auto& dfn = fit.coefficient("dataset[dfn]");
    const std::vector<std::string> order = {"dfn", "commonpool", "merged2b", "webli",
                                            "datacomp", "openai_wit", "laion", "metaclip"};
    std::vector<double> est;
    for (const auto& level : order) {
      for (const auto& f : fit.fixed)
        if (f.name == "dataset[" + level + "]") est.push_back(f.estimate);
    }
    const bool ordered = std::is_sorted(est.rbegin(), est.rend());
    detail << "dfn (" << (g == Grouping::test ? "test" : "combo_category") << ") " << dfn.estimate
           << " p " << dfn.p_value << "; ";
    if (std::abs(dfn.estimate - 0.608) <= 0.05 && dfn.p_value < 0.01 && ordered) regression_ok = true;
  }
  if (!regression_ok) failures.push_back("regression");

  if (fs::exists(dir / "vtab.csv")) {
    attach_vtab(records, read_csv(dir / "vtab.csv"));
    TaskSubsets subsets;
    if (fs::exists(dir / "task_subsets.csv")) subsets = load_task_subsets(dir / "task_subsets.csv");
    subsets.use_magnitude = true;
    for (const auto& c : correlate_performance(controlled, records, subsets).cells) {
      if (c.category == Category::instrument_weapon && c.modality_combo == ModalityCombo::text_as_target)
        check("r instrument_weapon/text_as_target", c.r, 0.82, 0.05);
      if (c.category == Category::gender && c.modality_combo == ModalityCombo::image_as_target)
        check("r gender/image_as_target", c.r, -0.51, 0.05);
    }
  } else {
    failures.push_back("vtab.csv missing");
  }
  std::string text = detail.str();
  if (!failures.empty()) {
    text += "failed:";
    for (const auto& f : failures) text += " " + f;
  }
  return pass_if(failures.empty(), text);
}

Outcome fixture_suite(int earlier_failures) {
  const fs::path fixtures = xmeat::testing::kFixtures;
  const Registry reg = Registry::load(fixtures / "registry");
  const bool registry_ok = reg.validate().empty();
  std::vector<EatTestSpec> suite = build_test_suite(reg, AttrVariant::controlled);
  const auto classic = build_test_suite(reg, AttrVariant::classic);
  suite.insert(suite.end(), classic.begin(), classic.end());
  size_t bundles = 0, runnable = 0;
  for (const auto& dir : list_bundles(fixtures / "bundles")) {
    runnable += coverage_check(read_bundle(dir), reg, suite).runnable_count();
    ++bundles;
  }
  xmeat::testing::TempDir out("acceptance");
  RunConfig cfg = RunConfig::load(fixtures / "run_config.json");
  cfg.output = out.path();
  const auto report = run_pipeline(cfg);
  const bool fixtures_ok = registry_ok && bundles == 8 && runnable == bundles * 52 &&
                          report.results.size() == 416 && report.stages_run.size() == 5 && report.fit &&
                          report.correlations && !emit_report(report).empty();
  return pass_if(fixtures_ok && earlier_failures == 0,
                 fmt("registry valid: %s; %zu bundles, %zu/%zu tests runnable; pipeline stages %zu/5, "
                     "%zu result rows; other criteria failing: %d",
                     registry_ok ? "yes" : "no", bundles, runnable, bundles * 52, report.stages_run.size(),
                     report.results.size(), earlier_failures));
}

}  // namespace

int main() {
  std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"effect-size oracle equivalence", effect_size_oracle},
      {"exact permutation and Monte Carlo agreement", exact_permutation},
      {"|d| <= 2 bound", effect_size_bound},
      {"mixed-model recovery", mixed_model},
      {"aggregation and congruence rates", aggregation_rates},
      {"paper reproduction", paper_reproduction},
  };
  int failed = 0;
  auto criteria_with_suite = criteria;
  criteria_with_suite.emplace_back("full suite on committed fixtures", [&failed] { return fixture_suite(failed); });
  for (const auto& [name, run] : criteria_with_suite) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {Outcome::Status::fail, std::string("exception: ") + e.what()};
    }
    const char* tag = o.status == Outcome::Status::pass ? "PASS" : o.status == Outcome::Status::fail ? "FAIL" : "SKIP";
    if (o.status == Outcome::Status::fail) ++failed;
    std::printf("%s  %s: %s\n", tag, name.c_str(), o.detail.c_str());
  }
  return failed == 0 ? 0 : 1;
}
