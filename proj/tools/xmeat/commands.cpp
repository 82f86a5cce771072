#include "commands.hpp"

#include <iostream>

#include "xmeat/aggregation.hpp"
#include "xmeat/embedding_store.hpp"
#include "xmeat/hash.hpp"
#include "xmeat/inference.hpp"
#include "xmeat/pipeline.hpp"
#include "xmeat/results.hpp"
#include "xmeat/stimulus.hpp"

namespace xmeat::cli {
namespace fs = std::filesystem;

namespace {

// Maps exceptions onto the documented exit codes.
template <typename F>
int guarded(F&& body) {
  try {
    return body();
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStage;
  } catch (const ValidationError& e) {
    std::cerr << "validation failed: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStage;
  }
}

fs::path results_file(const fs::path& p) { return fs::is_directory(p) ? p / "results.csv" : p; }

std::string hash_of(std::initializer_list<std::string> parts) {
  std::string joined;
  for (const auto& p : parts) joined += p + "\n";
  return sha256_hex(joined).substr(0, 16);
}

void print_problems(const std::string& what, const std::vector<std::string>& problems) {
  std::cerr << what << ": " << problems.size() << " problem(s)\n";
  for (const auto& p : problems) std::cerr << "  - " << p << "\n";
}

}  // namespace

int registry_validate(const fs::path& dir) {
  return guarded([&] {
    const Registry reg = Registry::load(dir);
    auto problems = reg.validate();
    for (AttrVariant v : {AttrVariant::classic, AttrVariant::controlled}) {
      try {
        const auto suite = build_test_suite(reg, v);
        std::cout << to_string(v) << " suite: " << suite.size() << " tests\n";
      } catch (const ValidationError& e) {
        problems.push_back(e.what());
      }
    }
    if (!problems.empty()) {
      print_problems("registry " + dir.string(), problems);
      return kExitValidation;
    }
    std::cout << "registry ok: " << reg.items().size() << " items, " << reg.sets().size()
              << " sets, hash " << reg.content_hash() << "\n";
    return kExitOk;
  });
}

int registry_select_valence(const fs::path& lexicon, size_t k) {
  return guarded([&] {
    const Table t = read_csv(lexicon);
    const size_t c_term = t.column("term"), c_val = t.column("valence");
    std::vector<LexiconRow> rows;
    for (const auto& row : t.rows) {
      rows.push_back({row[c_term], parse_real(row[c_val], "valence of " + row[c_term])});
    }
    const auto sel = select_top_valence(rows, k);
    Table out;
    out.header = {"pole", "rank", "term"};
    for (size_t i = 0; i < sel.pleasant.size(); ++i) {
      out.rows.push_back({"pleasant", std::to_string(i + 1), sel.pleasant[i]});
    }
    for (size_t i = 0; i < sel.unpleasant.size(); ++i) {
      out.rows.push_back({"unpleasant", std::to_string(i + 1), sel.unpleasant[i]});
    }
    std::cout << to_csv(out);
    return kExitOk;
  });
}

int bundle_validate(const fs::path& dir, const std::optional<fs::path>& registry) {
  return guarded([&] {
    const EmbeddingBundle bundle = read_bundle(dir);
    if (registry) {
      const Registry reg = Registry::load(*registry);
      std::vector<std::string> problems;
      for (const auto& id : bundle.ids()) {
        if (!reg.has_item(id)) problems.push_back("id '" + id + "' not in registry");
      }
      if (!bundle.registry_hash.empty() && bundle.registry_hash != reg.content_hash()) {
        problems.push_back("bundle was built against a different registry (hash mismatch)");
      }
      if (!problems.empty()) {
        print_problems("bundle " + dir.string(), problems);
        return kExitValidation;
      }
    }
    std::cout << "bundle ok: model " << bundle.model_id() << ", " << bundle.size() << " rows, dim "
              << bundle.dim() << "\n";
    return kExitOk;
  });
}

int bundle_coverage(const fs::path& dir, const fs::path& registry, const std::string& variant) {
  return guarded([&] {
    const Registry reg = Registry::load(registry);
    const EmbeddingBundle bundle = read_bundle(dir);
    std::vector<EatTestSpec> suite;
    for (AttrVariant v : selected_variants(parse_variant_selection(variant))) {
      auto part = build_test_suite(reg, v);
      suite.insert(suite.end(), part.begin(), part.end());
    }
    const CoverageReport rep = coverage_check(bundle, reg, suite);
    Table t;
    t.header = {"test_id", "attr_variant", "runnable", "missing", "first_missing"};
    for (const auto& c : rep.tests) {
      t.rows.push_back({c.test_id, std::string(to_string(c.attr_variant)), c.runnable() ? "1" : "0",
                        std::to_string(c.missing_ids.size()),
                        c.missing_ids.empty() ? "" : c.missing_ids.front()});
    }
    std::cout << to_csv(t);
    std::cout << "runnable: " << rep.runnable_count() << " of " << rep.tests.size() << "\n";
    if (!rep.unknown_ids.empty()) {
      std::cout << "ids unknown to the registry: " << rep.unknown_ids.size() << "\n";
    }
    return kExitOk;
  });
}

int run(const RunArgs& args) {
  return guarded([&] {
    RunConfig config;
    config.registry = args.registry;
    config.bundles = args.bundles;
    config.output = args.out;
    config.variant = parse_variant_selection(args.variant);
    config.permutation = args.permutation == "exact"         ? PermutationMode::Kind::exact
                         : args.permutation == "monte_carlo" ? PermutationMode::Kind::monte_carlo
                                                             : PermutationMode::Kind::automatic;
    config.seed = args.seed;
    config.samples = args.samples;
    config.std_dev = args.std_dev == "sample" ? StdDevKind::sample : StdDevKind::population;
    if (auto problems = config.validate(); !problems.empty()) {
      print_problems("run", problems);
      return kExitValidation;
    }

    const Registry reg = Registry::load(args.registry);
    if (auto problems = reg.validate(); !problems.empty()) {
      print_problems("registry", problems);
      return kExitValidation;
    }
    std::vector<EatTestSpec> suite;
    for (AttrVariant v : selected_variants(config.variant)) {
      auto part = build_test_suite(reg, v);
      suite.insert(suite.end(), part.begin(), part.end());
    }
    std::vector<EmbeddingBundle> bundles;
    for (const auto& dir : list_bundles(args.bundles)) bundles.push_back(read_bundle(dir));
    if (bundles.empty()) throw ValidationError("no bundles under " + args.bundles.string());

    EatOptions options;
    options.std_dev = config.std_dev;
    options.permutation.kind = config.permutation;
    options.permutation.seed = config.seed.value_or(0);
    options.permutation.samples = config.samples;
    const auto results = run_grid(suite, reg, bundles, options, thread_budget());
    const std::string hash = config.hash();
    write_csv_atomic(args.out / "results.csv", results_table(results, hash));
    write_file_atomic(args.out / "results.jsonl", results_jsonl(results, hash));
    std::cout << results.size() << " results (" << bundles.size() << " bundles x " << suite.size()
              << " tests) written to " << (args.out / "results.csv").string() << "\n";
    return kExitOk;
  });
}

int aggregate(const fs::path& results, const fs::path& out, const std::string& std_dev) {
  return guarded([&] {
    const auto file = results_file(results);
    const auto rows = read_results(file);
    if (rows.empty()) throw ValidationError("results table is empty");
    const auto kind = std_dev == "sample" ? VarianceKind::sample : VarianceKind::population;
    const std::string hash = hash_of({"aggregate", sha256_file(file), std_dev});

    const auto cells = xmeat::aggregate(rows, kind);
    write_csv_atomic(out / "aggregates.csv", aggregates_table(cells, hash));
    write_csv_atomic(out / "categories.csv", category_table(summarize_categories(rows, kind), hash));
    write_csv_atomic(out / "figure_aggregate.csv", figure_table(cells, hash));

    Table rates;
    for (AttrVariant v : {AttrVariant::classic, AttrVariant::controlled}) {
      const auto part_rows = filter_variant(rows, v);
      if (part_rows.empty()) continue;
      Table part = rates_table(congruence_rates(part_rows, {0.0, 0.2, 0.5, 0.8}), v,
                               part_rows.size(), hash);
      if (rates.header.empty()) rates.header = part.header;
      rates.rows.insert(rates.rows.end(), part.rows.begin(), part.rows.end());
    }
    write_csv_atomic(out / "rates.csv", rates);

    const auto classic = filter_variant(rows, AttrVariant::classic);
    const auto controlled = filter_variant(rows, AttrVariant::controlled);
    if (!classic.empty() && !controlled.empty()) {
      write_csv_atomic(out / "variance_report.csv",
                       variance_table(variance_comparison(classic, controlled, kind), hash));
    } else {
      std::cout << "variance comparison skipped: needs both classic and controlled rows\n";
    }
    std::cout << cells.size() << " aggregate cells written to " << out.string() << "\n";
    return kExitOk;
  });
}

int regress(const RegressArgs& args) {
  return guarded([&] {
    const auto file = results_file(args.results);
    auto rows = filter_variant(read_results(file), parse_attr_variant(args.variant));
    if (rows.empty()) throw ValidationError("no " + args.variant + " rows in " + file.string());
    FamilyMap families;
    if (args.families) families = FamilyMap::load(*args.families);
    const auto records = read_models(args.models, &families);

    DesignOptions design;
    design.grouping = args.grouping == "test" ? Grouping::test : Grouping::combo_category;
    design.dataset_reference = args.dataset_reference;
    design.arch_reference = args.arch_reference;
    const auto dataset = build_design(rows, records, design);

    MixedModelSpec spec;
    spec.lmm.covariance = args.covariance == "unstructured" ? CovarianceStructure::unstructured
                                                            : CovarianceStructure::diagonal;
    const auto fit = fit_mixed_model(dataset, spec);
    for (const auto& w : fit.warnings) std::cerr << "warning: " << w << "\n";

    const std::string hash =
        hash_of({"regress", sha256_file(file), sha256_file(args.models), args.grouping,
                 args.covariance, args.dataset_reference, args.arch_reference.value_or(""),
                 args.variant});
    write_csv_atomic(args.out / "mixed_fit.csv", mixed_fit_table(fit, hash));
    std::cout << "REML log-likelihood " << format_real(fit.reml_loglik) << " over "
              << dataset.data.y.size() << " rows in " << dataset.data.n_groups << " groups"
              << (fit.converged ? "" : " (not converged)") << "\n";
    for (const auto& fe : fit.fixed) {
      std::cout << "  " << fe.name << " " << format_real(fe.estimate) << " (SE "
                << format_real(fe.se) << ", p " << format_real(fe.p_value) << ")"
                << (fe.p_value < kSignificanceLevel ? " *" : "") << "\n";
    }
    return kExitOk;
  });
}

int correlate(const CorrelateArgs& args) {
  return guarded([&] {
    const auto file = results_file(args.results);
    const auto rows = read_results(file);
    FamilyMap families;
    if (args.families) families = FamilyMap::load(*args.families);
    auto records = read_models(args.models, &families);
    attach_vtab(records, read_csv(args.vtab));
    TaskSubsets subsets;
    if (args.task_subsets) subsets = load_task_subsets(*args.task_subsets);
    subsets.use_magnitude = args.magnitude;

    const auto rep = correlate_performance(rows, records, subsets);
    for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";
    const std::string hash = hash_of({"correlate", sha256_file(file), sha256_file(args.models),
                                      sha256_file(args.vtab), args.magnitude ? "abs" : "signed"});
    write_csv_atomic(args.out / "correlations.csv", correlations_table(rep.cells, hash));
    std::cout << rep.cells.size() << " correlation cells written to "
              << (args.out / "correlations.csv").string() << "\n";
    return kExitOk;
  });
}

int run_all(const fs::path& config_path, const fs::path& output) {
  return guarded([&] {
    RunConfig config = RunConfig::load(config_path);
    if (!output.empty()) config.output = output;
    const ReportBundle report = run_pipeline(config);
    const std::string text = emit_report(report);
    write_file_atomic(config.output / "report.md", text);
    std::cout << text;
    return kExitOk;
  });
}

}  // namespace xmeat::cli
