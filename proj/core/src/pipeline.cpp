#include "xmeat/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "xmeat/embedding_store.hpp"
#include "xmeat/hash.hpp"
#include "xmeat/results.hpp"
#include "xmeat/stimulus.hpp"

namespace xmeat {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Report-only rounding; the tables keep full precision.
std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

}  // namespace

VariantSelection parse_variant_selection(std::string_view s) {
  if (s == "controlled") return VariantSelection::controlled;
  if (s == "classic") return VariantSelection::classic;
  if (s == "both") return VariantSelection::both;
  throw ValidationError("unknown variant selection '" + std::string(s) + "'");
}

std::vector<AttrVariant> selected_variants(VariantSelection s) {
  switch (s) {
    case VariantSelection::controlled:
      return {AttrVariant::controlled};
    case VariantSelection::classic:
      return {AttrVariant::classic};
    case VariantSelection::both:
      break;
  }
  return {AttrVariant::classic, AttrVariant::controlled};
}

namespace {

std::string_view variant_label(VariantSelection s) {
  switch (s) {
    case VariantSelection::controlled:
      return "controlled";
    case VariantSelection::classic:
      return "classic";
    case VariantSelection::both:
      break;
  }
  return "both";
}

std::string_view permutation_label(PermutationMode::Kind k) {
  switch (k) {
    case PermutationMode::Kind::exact:
      return "exact";
    case PermutationMode::Kind::monte_carlo:
      return "monte_carlo";
    case PermutationMode::Kind::automatic:
      break;
  }
  return "auto";
}

PermutationMode::Kind parse_permutation(const std::string& s) {
  if (s == "exact") return PermutationMode::Kind::exact;
  if (s == "monte_carlo") return PermutationMode::Kind::monte_carlo;
  if (s == "auto") return PermutationMode::Kind::automatic;
  throw ValidationError("unknown permutation mode '" + s + "'");
}

std::optional<fs::path> optional_path(const json& j, const char* key, const fs::path& base) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  fs::path p = j[key].get<std::string>();
  return p.is_absolute() ? p : base / p;
}

json path_or_null(const std::optional<fs::path>& p) {
  return p ? json(p->generic_string()) : json(nullptr);
}

size_t write_table(const fs::path& dir, const std::string& name, const Table& table,
                   ReportBundle& report) {
  write_csv_atomic(dir / name, table);
  report.table_rows[name] = table.rows.size();
  return table.rows.size();
}

template <typename F>
void stage(const std::string& name, ReportBundle& report, F&& body) {
  try {
    body();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
  report.stages_run.push_back(name);
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: cannot parse: ") + e.what());
  }
  RunConfig c;
  try {
    c.registry = optional_path(j, "registry", base_dir);
    c.bundles = optional_path(j, "bundles", base_dir);
    c.results = optional_path(j, "results", base_dir);
    c.models = optional_path(j, "models", base_dir);
    c.vtab = optional_path(j, "vtab", base_dir);
    c.families = optional_path(j, "families", base_dir);
    c.task_subsets = optional_path(j, "task_subsets", base_dir);
    if (auto out = optional_path(j, "output", base_dir)) c.output = *out;
    if (j.contains("variant")) c.variant = parse_variant_selection(j["variant"].get<std::string>());
    if (j.contains("permutation")) {
      const auto& p = j["permutation"];
      if (p.contains("mode")) c.permutation = parse_permutation(p["mode"].get<std::string>());
      if (p.contains("seed") && !p["seed"].is_null()) c.seed = p["seed"].get<std::uint64_t>();
      if (p.contains("samples")) c.samples = p["samples"].get<std::uint64_t>();
    }
    if (j.contains("std_dev")) {
      const auto s = j["std_dev"].get<std::string>();
      if (s != "population" && s != "sample") throw ValidationError("config: std_dev must be population or sample");
      c.std_dev = s == "sample" ? StdDevKind::sample : StdDevKind::population;
    }
    if (j.contains("covariance")) {
      const auto s = j["covariance"].get<std::string>();
      if (s != "diagonal" && s != "unstructured") {
        throw ValidationError("config: covariance must be diagonal or unstructured");
      }
      c.covariance = s == "unstructured" ? CovarianceStructure::unstructured : CovarianceStructure::diagonal;
    }
    if (j.contains("grouping")) {
      const auto s = j["grouping"].get<std::string>();
      if (s != "combo_category" && s != "test") {
        throw ValidationError("config: grouping must be combo_category or test");
      }
      c.grouping = s == "test" ? Grouping::test : Grouping::combo_category;
    }
    if (j.contains("dataset_reference")) c.dataset_reference = j["dataset_reference"].get<std::string>();
    if (j.contains("arch_reference") && !j["arch_reference"].is_null()) {
      c.arch_reference = j["arch_reference"].get<std::string>();
    }
    if (j.contains("correlate_magnitude")) c.correlate_magnitude = j["correlate_magnitude"].get<bool>();
    if (j.contains("thresholds")) c.thresholds = j["thresholds"].get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return c;
}

RunConfig RunConfig::load(const fs::path& file) {
  std::string text;
  try {
    text = read_file(file);
  } catch (const Error& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return from_json_text(text, file.parent_path());
}

std::string RunConfig::canonical_json() const {
  json j = {{"registry", path_or_null(registry)},
            {"bundles", path_or_null(bundles)},
            {"results", path_or_null(results)},
            {"models", path_or_null(models)},
            {"vtab", path_or_null(vtab)},
            {"families", path_or_null(families)},
            {"task_subsets", path_or_null(task_subsets)},
            {"variant", variant_label(variant)},
            {"permutation",
             {{"mode", permutation_label(permutation)},
              {"seed", seed ? json(*seed) : json(nullptr)},
              {"samples", samples}}},
            {"std_dev", std_dev == StdDevKind::population ? "population" : "sample"},
            {"covariance", covariance == CovarianceStructure::diagonal ? "diagonal" : "unstructured"},
            {"grouping", grouping == Grouping::test ? "test" : "combo_category"},
            {"dataset_reference", dataset_reference},
            {"arch_reference", arch_reference ? json(*arch_reference) : json(nullptr)},
            {"correlate_magnitude", correlate_magnitude},
            {"thresholds", thresholds}};
  // Output location does not affect results and is left out of the hash.
  return j.dump();
}

std::string RunConfig::hash() const { return sha256_hex(canonical_json()).substr(0, 16); }

std::vector<std::string> RunConfig::validate() const {
  std::vector<std::string> problems;
  auto must_exist = [&problems](const std::optional<fs::path>& p, const char* what) {
    if (p && !fs::exists(*p)) problems.push_back(std::string(what) + " not found: " + p->string());
  };
  must_exist(registry, "registry");
  must_exist(bundles, "bundle directory");
  must_exist(results, "results table");
  must_exist(models, "models table");
  must_exist(vtab, "vtab table");
  must_exist(families, "family map");
  must_exist(task_subsets, "task subsets");
  if (registry.has_value() != bundles.has_value()) {
    problems.push_back("registry and bundles must be given together");
  }
  if (!registry && !results) problems.push_back("need registry + bundles or a results table");
  if (registry && results) problems.push_back("give either registry + bundles or a results table, not both");
  if (permutation == PermutationMode::Kind::monte_carlo && !seed) {
    problems.push_back("seed is mandatory for Monte Carlo permutation mode");
  }
  if (samples == 0) problems.push_back("permutation samples must be positive");
  if (vtab && !models) problems.push_back("vtab table needs a models table");
  return problems;
}

unsigned thread_budget() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("XMEAT_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return std::min<unsigned>(static_cast<unsigned>(v), hw);
  }
  return hw;
}

ReportBundle run_pipeline(const RunConfig& config) {
  if (auto problems = config.validate(); !problems.empty()) {
    std::string msg = "invalid run config:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ValidationError(msg);
  }

  ReportBundle report;
  report.config_hash = config.hash();
  const fs::path out = config.output;
  fs::create_directories(out);

  // Stage 1: effect sizes.
  if (config.registry) {
    stage("eat", report, [&] {
      const Registry registry = Registry::load(*config.registry);
      if (auto problems = registry.validate(); !problems.empty()) {
        throw ValidationError("registry invalid: " + problems.front());
      }
      report.input_hashes["registry"] = registry.content_hash();
      std::vector<EatTestSpec> suite;
      for (AttrVariant v : selected_variants(config.variant)) {
        auto part = build_test_suite(registry, v);
        suite.insert(suite.end(), part.begin(), part.end());
      }
      std::vector<EmbeddingBundle> bundles;
      for (const auto& dir : list_bundles(*config.bundles)) {
        bundles.push_back(read_bundle(dir));
        report.input_hashes["bundle:" + bundles.back().model_id()] =
            read_manifest(dir).payload_sha256;
      }
      if (bundles.empty()) throw ValidationError("no bundles under " + config.bundles->string());

      EatOptions options;
      options.std_dev = config.std_dev;
      options.permutation.kind = config.permutation;
      options.permutation.seed = config.seed.value_or(0);
      options.permutation.samples = config.samples;
      report.results = run_grid(suite, registry, bundles, options, thread_budget());
      write_table(out, "results.csv", results_table(report.results, report.config_hash), report);
      write_file_atomic(out / "results.jsonl", results_jsonl(report.results, report.config_hash));
    });
  } else {
    stage("load_results", report, [&] {
      report.input_hashes["results"] = sha256_file(*config.results);
      report.results = read_results(*config.results);
      if (report.results.empty()) throw ValidationError("results table is empty");
      write_table(out, "results.csv", results_table(report.results, report.config_hash), report);
    });
  }

  // Stage 2: aggregates, rates and the classic/controlled variance comparison.
  const VarianceKind var_kind =
      config.std_dev == StdDevKind::population ? VarianceKind::population : VarianceKind::sample;
  stage("aggregate", report, [&] {
    report.aggregates = aggregate(report.results, var_kind);
    report.categories = summarize_categories(report.results, var_kind);
    write_table(out, "aggregates.csv", aggregates_table(report.aggregates, report.config_hash), report);
    write_table(out, "categories.csv", category_table(report.categories, report.config_hash), report);
    write_table(out, "figure_aggregate.csv", figure_table(report.aggregates, report.config_hash), report);

    Table rates;
    for (AttrVariant v : {AttrVariant::classic, AttrVariant::controlled}) {
      const auto rows = filter_variant(report.results, v);
      if (rows.empty()) continue;
      report.rates[v] = congruence_rates(rows, config.thresholds);
      Table part = rates_table(report.rates[v], v, rows.size(), report.config_hash);
      if (rates.header.empty()) rates.header = part.header;
      rates.rows.insert(rates.rows.end(), part.rows.begin(), part.rows.end());
    }
    write_table(out, "rates.csv", rates, report);

    const auto classic = filter_variant(report.results, AttrVariant::classic);
    const auto controlled = filter_variant(report.results, AttrVariant::controlled);
    if (!classic.empty() && !controlled.empty()) {
      report.variance = variance_comparison(classic, controlled, var_kind);
      write_table(out, "variance_report.csv", variance_table(*report.variance, report.config_hash),
                  report);
    } else {
      report.notices.push_back(
          "variance comparison skipped: needs both classic and controlled results");
    }
  });

  // Stages 3 and 4 need model metadata.
  if (!config.models) {
    report.notices.push_back("regression skipped: no models table configured");
    report.notices.push_back("correlation skipped: no models table configured");
    return report;
  }

  std::vector<ModelRecord> records;
  stage("load_models", report, [&] {
    FamilyMap families;
    if (config.families) {
      families = FamilyMap::load(*config.families);
      report.input_hashes["families"] = sha256_file(*config.families);
    }
    records = read_models(*config.models, &families);
    report.input_hashes["models"] = sha256_file(*config.models);
    if (config.vtab) {
      attach_vtab(records, read_csv(*config.vtab));
      report.input_hashes["vtab"] = sha256_file(*config.vtab);
    }
  });

  // The regression uses the controlled variant when present.
  auto primary_rows = filter_variant(report.results, AttrVariant::controlled);
  if (primary_rows.empty()) primary_rows = report.results;

  stage("regress", report, [&] {
    DesignOptions design;
    design.grouping = config.grouping;
    design.dataset_reference = config.dataset_reference;
    design.arch_reference = config.arch_reference;
    const auto dataset = build_design(primary_rows, records, design);
    MixedModelSpec spec;
    spec.lmm.covariance = config.covariance;
    report.fit = fit_mixed_model(dataset, spec);
    for (const auto& w : report.fit->warnings) report.notices.push_back("regression: " + w);
    write_table(out, "mixed_fit.csv", mixed_fit_table(*report.fit, report.config_hash), report);
  });

  if (!config.vtab) {
    report.notices.push_back("correlation skipped: no vtab table configured");
    return report;
  }
  stage("correlate", report, [&] {
    TaskSubsets subsets;
    if (config.task_subsets) {
      subsets = load_task_subsets(*config.task_subsets);
      report.input_hashes["task_subsets"] = sha256_file(*config.task_subsets);
    }
    subsets.use_magnitude = config.correlate_magnitude;
    report.correlations = correlate_performance(report.results, records, subsets);
    for (const auto& w : report.correlations->warnings) report.notices.push_back("correlation: " + w);
    write_table(out, "correlations.csv",
                correlations_table(report.correlations->cells, report.config_hash), report);
  });
  return report;
}

std::string emit_report(const ReportBundle& r) {
  std::ostringstream o;
  o << "# xmeat report\n\n";
  o << "config hash: " << r.config_hash << "\n";
  for (const auto& [name, hash] : r.input_hashes) o << "input " << name << ": " << hash << "\n";
  o << "\n## Stages\n\n";
  for (const auto& s : r.stages_run) o << "- " << s << "\n";
  if (!r.notices.empty()) {
    o << "\n## Notices\n\n";
    for (const auto& n : r.notices) o << "- " << n << "\n";
  }
  o << "\n## Tables\n\n";
  for (const auto& [name, rows] : r.table_rows) o << "- " << name << ": " << rows << " rows\n";

  if (!r.rates.empty()) {
    o << "\n## Congruence rates\n\n";
    for (const auto& [variant, rates] : r.rates) {
      for (const auto& [t, rate] : rates) {
        o << "- " << to_string(variant) << ": " << (t == 0.0 ? "d > " : "d >= ") << format_real(t)
          << " in " << fixed(rate * 100.0, 2) << "% of rows\n";
      }
    }
  }

  if (!r.aggregates.empty()) {
    o << "\n## Top aggregate cells\n\n";
    auto cells = r.aggregates;
    std::stable_sort(cells.begin(), cells.end(), [](const AggregateCell& a, const AggregateCell& b) {
      return a.mean_d > b.mean_d;
    });
    const size_t shown = std::min<size_t>(cells.size(), 5);
    for (size_t i = 0; i < shown; ++i) {
      const auto& c = cells[i];
      o << "- " << to_string(c.category) << " / " << to_string(c.modality_combo) << " ("
        << to_string(c.attr_variant) << "): mean d " << fixed(c.mean_d, 3) << ", sd "
        << fixed(c.sd_d, 3) << ", n " << c.n << "\n";
    }
  }

  if (r.variance) {
    o << "\n## Variance comparison\n\n";
    o << "- overall: " << fixed(r.variance->variance_classic, 4) << " -> "
      << fixed(r.variance->variance_controlled, 4) << " (relative change "
      << fixed(r.variance->relative_change_overall * 100.0, 2) << "%)\n";
    for (const auto& [combo, change] : r.variance->per_modality_changes) {
      o << "- " << to_string(combo) << ": relative change " << fixed(change * 100.0, 2) << "%\n";
    }
  }

  if (r.fit) {
    o << "\n## Significant regression terms (p < " << format_real(kSignificanceLevel) << ")\n\n";
    o << "REML log-likelihood " << fixed(r.fit->reml_loglik, 3)
      << (r.fit->converged ? "" : " (not converged)") << "\n\n";
    bool any = false;
    for (const auto& fe : r.fit->fixed) {
      if (fe.p_value < kSignificanceLevel) {
        o << "- " << fe.name << ": " << fixed(fe.estimate, 4) << " (SE " << fixed(fe.se, 4)
          << ", p " << sci(fe.p_value) << ")\n";
        any = true;
      }
    }
    if (!any) o << "- none\n";
  }

  if (r.correlations) {
    o << "\n## Significant correlations (p < " << format_real(kSignificanceLevel) << ")\n\n";
    bool any = false;
    for (const auto& c : r.correlations->cells) {
      if (c.p_value < kSignificanceLevel) {
        o << "- " << to_string(c.category) << " / " << to_string(c.modality_combo) << " ("
          << to_string(c.attr_variant) << "): r " << fixed(c.r, 3) << ", p "
          << sci(c.p_value) << ", n " << c.n << "\n";
        any = true;
      }
    }
    if (!any) o << "- none\n";
  }
  return o.str();
}

}  // namespace xmeat
