#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "xmeat/aggregation.hpp"
#include "xmeat/eat.hpp"
#include "xmeat/error.hpp"
#include "xmeat/inference.hpp"

namespace xmeat {

enum class VariantSelection { controlled, classic, both };
VariantSelection parse_variant_selection(std::string_view s);
std::vector<AttrVariant> selected_variants(VariantSelection s);

struct RunConfig {
  // Paths are resolved against the config file's directory on load.
  std::optional<std::filesystem::path> registry;
  std::optional<std::filesystem::path> bundles;
  // Precomputed results table; used instead of registry + bundles.
  std::optional<std::filesystem::path> results;
  std::optional<std::filesystem::path> models;
  std::optional<std::filesystem::path> vtab;
  std::optional<std::filesystem::path> families;
  std::optional<std::filesystem::path> task_subsets;
  std::filesystem::path output = "results";

  VariantSelection variant = VariantSelection::controlled;
  PermutationMode::Kind permutation = PermutationMode::Kind::automatic;
  std::optional<std::uint64_t> seed;
  std::uint64_t samples = 50'000;
  StdDevKind std_dev = StdDevKind::population;
  CovarianceStructure covariance = CovarianceStructure::diagonal;
  Grouping grouping = Grouping::combo_category;
  std::string dataset_reference = "cc12m";
  std::optional<std::string> arch_reference;
  bool correlate_magnitude = false;
  std::vector<double> thresholds = {0.0, 0.2, 0.5, 0.8};

  static RunConfig load(const std::filesystem::path& file);
  static RunConfig from_json_text(const std::string& text, const std::filesystem::path& base_dir);

  // Canonical JSON of every setting (paths as given after resolution).
  std::string canonical_json() const;
  // First 16 hex digits of the SHA-256 of canonical_json().
  std::string hash() const;

  // Every violated invariant (empty when valid).
  std::vector<std::string> validate() const;
};

// Raised when a stage fails; carries the stage name.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& cause)
      : Error("stage '" + stage + "' failed: " + cause), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct ReportBundle {
  std::string config_hash;
  std::map<std::string, std::string> input_hashes;
  std::vector<std::string> stages_run;
  std::vector<std::string> notices;  // skipped stages and warnings
  std::map<std::string, size_t> table_rows;  // output file -> data rows

  std::vector<EatResult> results;
  std::vector<AggregateCell> aggregates;
  std::vector<CategorySummary> categories;
  std::map<AttrVariant, std::vector<std::pair<double, double>>> rates;
  std::optional<VarianceReport> variance;
  std::optional<MixedModelFit> fit;
  std::optional<CorrelationReport> correlations;
};

// Worker count: XMEAT_THREADS if set, else hardware concurrency.
unsigned thread_budget();

// Runs every stage whose inputs are present and writes its tables under
// config.output. Throws ValidationError for invalid configs and StageError
// for stage failures; stages that already finished keep their outputs.
ReportBundle run_pipeline(const RunConfig& config);

std::string emit_report(const ReportBundle& report);

}  // namespace xmeat
