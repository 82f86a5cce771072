#pragma once

#include <map>
#include <utility>
#include <vector>

#include "xmeat/eat.hpp"
#include "xmeat/stats.hpp"
#include "xmeat/table.hpp"

namespace xmeat {

struct AggregateCell {
  Category category = Category::flower_insect;
  ModalityCombo modality_combo = ModalityCombo::all_text;
  AttrVariant attr_variant = AttrVariant::controlled;
  double mean_d = 0.0;
  double sd_d = 0.0;
  size_t n = 0;
};

// One cell per observed (category, modality_combo, attr_variant); name and
// word sub-tests pool within their category. Cells come out in enum order.
std::vector<AggregateCell> aggregate(const std::vector<EatResult>& results,
                                     VarianceKind kind = VarianceKind::population);

// Per-category summary across modality combinations.
struct CategorySummary {
  Category category = Category::flower_insect;
  AttrVariant attr_variant = AttrVariant::controlled;
  // Mean and SD over every row of the category.
  double mean_d = 0.0;
  double sd_d = 0.0;
  size_t n = 0;
  // Mean and SD of the per-combination cell means.
  double cell_mean_of_means = 0.0;
  double cell_sd_of_means = 0.0;
  size_t cells = 0;
};

std::vector<CategorySummary> summarize_categories(const std::vector<EatResult>& results,
                                                  VarianceKind kind = VarianceKind::population);

// Fraction of rows with d > t when t == 0, and d >= t otherwise.
std::vector<std::pair<double, double>> congruence_rates(const std::vector<EatResult>& results,
                                                        const std::vector<double>& thresholds);

struct VarianceReport {
  double variance_classic = 0.0;
  double variance_controlled = 0.0;
  // (classic - controlled) / classic
  double relative_change_overall = 0.0;
  std::map<ModalityCombo, double> variance_classic_by_combo;
  std::map<ModalityCombo, double> variance_controlled_by_combo;
  std::map<ModalityCombo, double> per_modality_changes;
  // Auxiliary: mean of the per-(category, combo) cell variances.
  double group_mean_variance_classic = 0.0;
  double group_mean_variance_controlled = 0.0;
};

VarianceReport variance_comparison(const std::vector<EatResult>& classic,
                                   const std::vector<EatResult>& controlled,
                                   VarianceKind kind = VarianceKind::population);

// Rows filtered to one attribute variant.
std::vector<EatResult> filter_variant(const std::vector<EatResult>& results, AttrVariant variant);

Table aggregates_table(const std::vector<AggregateCell>& cells, const std::string& config_hash);
Table category_table(const std::vector<CategorySummary>& rows, const std::string& config_hash);
Table rates_table(const std::vector<std::pair<double, double>>& rates, AttrVariant variant,
                  size_t n_rows, const std::string& config_hash);
Table variance_table(const VarianceReport& report, const std::string& config_hash);
// Long format with one row per bar: variant, category, combo, mean, sd,
// lower = mean - sd, upper = mean + sd.
Table figure_table(const std::vector<AggregateCell>& cells, const std::string& config_hash);

}  // namespace xmeat
