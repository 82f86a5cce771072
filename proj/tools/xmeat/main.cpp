#include <array>
#include <iostream>
#include <memory>

#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
  using namespace xmeat::cli;
  CLI::App app{"Embedding association tests for vision-language embedding spaces"};
  app.require_subcommand(1);
  int status = kExitOk;

  // registry
  auto* registry = app.add_subcommand("registry", "Stimulus registry operations");
  registry->require_subcommand(1);
  {
    auto* validate = registry->add_subcommand("validate", "Validate a registry directory");
    auto dir = std::make_shared<std::string>();
    validate->add_option("dir", *dir, "Registry directory")->required();
    validate->callback([dir, &status] { status = registry_validate(*dir); });

    auto* select = registry->add_subcommand(
        "select-valence", "Pick the k most pleasant and unpleasant terms from a lexicon CSV");
    auto lexicon = std::make_shared<std::string>();
    auto k = std::make_shared<size_t>(25);
    select->add_option("lexicon", *lexicon, "CSV with columns term,valence")->required();
    select->add_option("-k,--k", *k, "Terms per pole");
    select->callback([lexicon, k, &status] { status = registry_select_valence(*lexicon, *k); });
  }

  // bundle
  auto* bundle = app.add_subcommand("bundle", "Embedding bundle operations");
  bundle->require_subcommand(1);
  {
    auto* validate = bundle->add_subcommand("validate", "Validate a bundle directory");
    auto dir = std::make_shared<std::string>();
    auto reg = std::make_shared<std::string>();
    validate->add_option("dir", *dir, "Bundle directory")->required();
    validate->add_option("--registry", *reg, "Also check ids against this registry");
    validate->callback([dir, reg, &status] {
      status = bundle_validate(*dir, reg->empty() ? std::nullopt
                                                  : std::optional<std::filesystem::path>(*reg));
    });

    auto* coverage = bundle->add_subcommand("coverage", "Report per-test stimulus coverage");
    auto cdir = std::make_shared<std::string>();
    auto creg = std::make_shared<std::string>();
    auto variant = std::make_shared<std::string>("both");
    coverage->add_option("dir", *cdir, "Bundle directory")->required();
    coverage->add_option("--registry", *creg, "Registry directory")->required();
    coverage->add_option("--variant", *variant, "controlled|classic|both")
        ->check(CLI::IsMember({"controlled", "classic", "both"}));
    coverage->callback([cdir, creg, variant, &status] {
      status = bundle_coverage(*cdir, *creg, *variant);
    });
  }

  // run
  {
    auto* run_cmd = app.add_subcommand("run", "Compute effect sizes for every bundle and test");
    auto args = std::make_shared<RunArgs>();
    auto seed = std::make_shared<std::uint64_t>(0);
    auto paths = std::make_shared<std::array<std::string, 3>>();
    (*paths)[2] = "results";
    run_cmd->add_option("--registry", (*paths)[0], "Registry directory")->required();
    run_cmd->add_option("--bundles", (*paths)[1], "Directory of bundle directories")->required();
    run_cmd->add_option("--variant", args->variant, "controlled|classic|both")
        ->check(CLI::IsMember({"controlled", "classic", "both"}));
    run_cmd->add_option("--permutation", args->permutation, "auto|exact|monte_carlo")
        ->check(CLI::IsMember({"auto", "exact", "monte_carlo"}));
    auto* seed_opt = run_cmd->add_option("--seed", *seed, "Monte Carlo seed");
    run_cmd->add_option("--samples", args->samples, "Monte Carlo samples");
    run_cmd->add_option("--std-dev", args->std_dev, "population|sample")
        ->check(CLI::IsMember({"population", "sample"}));
    run_cmd->add_option("--out", (*paths)[2], "Output directory");
    run_cmd->callback([args, paths, seed, seed_opt, &status] {
      args->registry = (*paths)[0];
      args->bundles = (*paths)[1];
      args->out = (*paths)[2];
      if (seed_opt->count() > 0) args->seed = *seed;
      status = run(*args);
    });
  }

  // aggregate
  {
    auto* agg = app.add_subcommand("aggregate", "Aggregate a results table");
    auto results = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>("results");
    auto std_dev = std::make_shared<std::string>("population");
    agg->add_option("--results", *results, "results.csv or the directory holding it")->required();
    agg->add_option("--out", *out, "Output directory");
    agg->add_option("--std-dev", *std_dev, "population|sample")
        ->check(CLI::IsMember({"population", "sample"}));
    agg->callback([results, out, std_dev, &status] { status = aggregate(*results, *out, *std_dev); });
  }

  // regress
  {
    auto* reg = app.add_subcommand("regress", "Mixed-effects regression on upstream factors");
    auto args = std::make_shared<RegressArgs>();
    auto s = std::make_shared<std::array<std::string, 6>>();
    (*s)[3] = "results";
    reg->add_option("--results", (*s)[0], "results.csv or its directory")->required();
    reg->add_option("--models", (*s)[1], "models.csv")->required();
    reg->add_option("--families", (*s)[2], "Family mapping CSV (kind,pattern,family)");
    reg->add_option("--out", (*s)[3], "Output directory");
    reg->add_option("--grouping", args->grouping, "combo_category|test")
        ->check(CLI::IsMember({"combo_category", "test"}));
    reg->add_option("--covariance", args->covariance, "diagonal|unstructured")
        ->check(CLI::IsMember({"diagonal", "unstructured"}));
    reg->add_option("--dataset-reference", args->dataset_reference, "Reference dataset family");
    reg->add_option("--arch-reference", (*s)[4], "Reference architecture family");
    reg->add_option("--variant", args->variant, "Attribute variant to model")
        ->check(CLI::IsMember({"controlled", "classic"}));
    reg->callback([args, s, &status] {
      args->results = (*s)[0];
      args->models = (*s)[1];
      if (!(*s)[2].empty()) args->families = (*s)[2];
      args->out = (*s)[3];
      if (!(*s)[4].empty()) args->arch_reference = (*s)[4];
      status = regress(*args);
    });
  }

  // correlate
  {
    auto* cor = app.add_subcommand("correlate", "Correlate effect sizes with VTAB+ performance");
    auto args = std::make_shared<CorrelateArgs>();
    auto s = std::make_shared<std::array<std::string, 6>>();
    (*s)[5] = "results";
    cor->add_option("--results", (*s)[0], "results.csv or its directory")->required();
    cor->add_option("--models", (*s)[1], "models.csv")->required();
    cor->add_option("--vtab", (*s)[2], "vtab.csv (model_id,task,score)")->required();
    cor->add_option("--families", (*s)[3], "Family mapping CSV");
    cor->add_option("--task-subsets", (*s)[4], "CSV (modality_combo,task)");
    cor->add_flag("--magnitude", args->magnitude, "Correlate |d| instead of d");
    cor->add_option("--out", (*s)[5], "Output directory");
    cor->callback([args, s, &status] {
      args->results = (*s)[0];
      args->models = (*s)[1];
      args->vtab = (*s)[2];
      if (!(*s)[3].empty()) args->families = (*s)[3];
      if (!(*s)[4].empty()) args->task_subsets = (*s)[4];
      args->out = (*s)[5];
      status = correlate(*args);
    });
  }

  // run-all
  {
    auto* all = app.add_subcommand("run-all", "Run the whole pipeline from a config file");
    auto config = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    all->add_option("--config", *config, "Run configuration (JSON)")->required();
    all->add_option("--out", *out, "Output directory (overrides the config)");
    all->callback([config, out, &status] { status = run_all(*config, *out); });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }
  return status;
}
