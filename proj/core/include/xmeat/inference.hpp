#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "xmeat/eat.hpp"
#include "xmeat/mixed_model.hpp"
#include "xmeat/stats.hpp"
#include "xmeat/table.hpp"

namespace xmeat {

struct ModelRecord {
  std::string model_id;
  std::uint64_t param_count = 0;
  std::string arch_family;
  std::string dataset_family;
  std::uint64_t dataset_size = 0;  // samples
  std::map<std::string, double> vtab_scores;
};

// Maps raw architecture / dataset labels onto families. Rules are matched in
// file order; a pattern ending in '*' is a prefix match, anything else exact.
// Labels matching no rule pass through lower-cased.
class FamilyMap {
 public:
  enum class Kind { arch, dataset };

  FamilyMap() = default;
  // CSV with columns kind,pattern,family.
  static FamilyMap load(const std::filesystem::path& csv);
  void add(Kind kind, std::string pattern, std::string family);
  std::string normalize(Kind kind, const std::string& label) const;

 private:
  struct Rule {
    Kind kind;
    std::string pattern;
    std::string family;
  };
  std::vector<Rule> rules_;
};

// models.csv: model_id, param_count, arch_family, dataset_family, dataset_size.
std::vector<ModelRecord> read_models(const std::filesystem::path& csv,
                                     const FamilyMap* families = nullptr);
std::vector<ModelRecord> models_from_table(const Table& table, const FamilyMap* families = nullptr);
// vtab.csv: model_id, task, score. Scores attach to matching records;
// rows for unknown models are ignored.
void attach_vtab(std::vector<ModelRecord>& records, const Table& vtab);

enum class Grouping {
  combo_category,  // (modality_combo, category): 20 cells
  test,            // test_id: 26 cells
};

struct DesignOptions {
  Grouping grouping = Grouping::combo_category;
  std::string dataset_reference = "cc12m";
  // Defaults to the alphabetically first architecture family.
  std::optional<std::string> arch_reference;
};

struct RegressionDataset {
  LmmData data;  // z left empty; filled by fit_mixed_model
  std::vector<std::string> group_labels;
  std::string arch_reference;
  std::string dataset_reference;
  std::vector<std::string> warnings;
};

// Columns: intercept, log_params, arch[...] dummies, dataset[...] dummies,
// log_dataset_size. Continuous predictors are log-transformed, then
// z-standardised across rows.
RegressionDataset build_design(const std::vector<EatResult>& results,
                               const std::vector<ModelRecord>& records,
                               const DesignOptions& options = {});

struct MixedModelSpec {
  // Random terms; each must name a fixed-design column ("intercept" included).
  std::vector<std::string> random_terms = {"intercept", "log_params", "log_dataset_size"};
  LmmOptions lmm;
};

MixedModelFit fit_mixed_model(const RegressionDataset& dataset, const MixedModelSpec& spec = {});

struct CorrelationResult {
  Category category = Category::flower_insect;
  ModalityCombo modality_combo = ModalityCombo::all_text;
  AttrVariant attr_variant = AttrVariant::controlled;
  double r = 0.0;
  double p_value = 1.0;
  size_t n = 0;
};

struct TaskSubsets {
  // Tasks averaged per modality combination; combos without an entry use
  // every available task.
  std::map<ModalityCombo, std::vector<std::string>> tasks;
  // Correlate |d| instead of d.
  bool use_magnitude = false;
};

TaskSubsets load_task_subsets(const std::filesystem::path& csv);

struct CorrelationReport {
  std::vector<CorrelationResult> cells;
  std::vector<std::string> warnings;
};

CorrelationReport correlate_performance(const std::vector<EatResult>& results,
                                        const std::vector<ModelRecord>& records,
                                        const TaskSubsets& subsets = {});

inline constexpr double kSignificanceLevel = 0.01;

Table mixed_fit_table(const MixedModelFit& fit, const std::string& config_hash,
                      double alpha = kSignificanceLevel);
Table correlations_table(const std::vector<CorrelationResult>& cells,
                         const std::string& config_hash, double alpha = kSignificanceLevel);

}  // namespace xmeat
