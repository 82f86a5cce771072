#include "xmeat/aggregation.hpp"

#include <algorithm>
#include <tuple>

#include "xmeat/error.hpp"

namespace xmeat {
namespace {

using CellKey = std::tuple<Category, ModalityCombo, AttrVariant>;

std::map<CellKey, std::vector<double>> group_cells(const std::vector<EatResult>& results) {
  std::map<CellKey, std::vector<double>> groups;
  for (const auto& r : results) groups[{r.category, r.modality_combo, r.attr_variant}].push_back(r.d);
  return groups;
}

std::vector<double> all_d(const std::vector<EatResult>& results) {
  std::vector<double> d;
  d.reserve(results.size());
  for (const auto& r : results) d.push_back(r.d);
  return d;
}

double relative_change(double before, double after) {
  return before == 0.0 ? 0.0 : (before - after) / before;
}

}  // namespace

std::vector<AggregateCell> aggregate(const std::vector<EatResult>& results, VarianceKind kind) {
  std::vector<AggregateCell> cells;
  for (auto& [key, values] : group_cells(results)) {
    // Sorting makes the sums independent of input row order.
    std::sort(values.begin(), values.end());
    AggregateCell cell;
    std::tie(cell.category, cell.modality_combo, cell.attr_variant) = key;
    cell.mean_d = mean(values);
    cell.sd_d = values.size() > 1 || kind == VarianceKind::population ? std_dev(values, kind) : 0.0;
    cell.n = values.size();
    cells.push_back(cell);
  }
  return cells;
}

std::vector<CategorySummary> summarize_categories(const std::vector<EatResult>& results,
                                                  VarianceKind kind) {
  std::map<std::pair<Category, AttrVariant>, std::vector<double>> rows;
  std::map<std::pair<Category, AttrVariant>, std::vector<double>> cell_means;
  for (const auto& r : results) rows[{r.category, r.attr_variant}].push_back(r.d);
  for (const auto& cell : aggregate(results, kind)) {
    cell_means[{cell.category, cell.attr_variant}].push_back(cell.mean_d);
  }

  std::vector<CategorySummary> out;
  for (auto& [key, values] : rows) {
    std::sort(values.begin(), values.end());
    CategorySummary s;
    s.category = key.first;
    s.attr_variant = key.second;
    s.mean_d = mean(values);
    s.sd_d = values.size() > 1 || kind == VarianceKind::population ? std_dev(values, kind) : 0.0;
    s.n = values.size();
    const auto& means = cell_means[key];
    s.cell_mean_of_means = mean(means);
    s.cell_sd_of_means = means.size() > 1 || kind == VarianceKind::population ? std_dev(means, kind) : 0.0;
    s.cells = means.size();
    out.push_back(s);
  }
  return out;
}

std::vector<std::pair<double, double>> congruence_rates(const std::vector<EatResult>& results,
                                                        const std::vector<double>& thresholds) {
  if (results.empty()) throw ValidationError("congruence rates need at least one result");
  std::vector<std::pair<double, double>> out;
  for (double t : thresholds) {
    size_t hits = 0;
    for (const auto& r : results) hits += (t == 0.0 ? r.d > t : r.d >= t) ? 1 : 0;
    out.emplace_back(t, static_cast<double>(hits) / static_cast<double>(results.size()));
  }
  return out;
}

VarianceReport variance_comparison(const std::vector<EatResult>& classic,
                                   const std::vector<EatResult>& controlled, VarianceKind kind) {
  if (classic.empty() || controlled.empty()) {
    throw ValidationError("variance comparison needs two non-empty tables");
  }
  VarianceReport rep;
  {
    auto dc = all_d(classic), dn = all_d(controlled);
    std::sort(dc.begin(), dc.end());
    std::sort(dn.begin(), dn.end());
    rep.variance_classic = variance(dc, kind);
    rep.variance_controlled = variance(dn, kind);
  }
  rep.relative_change_overall = relative_change(rep.variance_classic, rep.variance_controlled);

  auto by_combo = [kind](const std::vector<EatResult>& rs) {
    std::map<ModalityCombo, std::vector<double>> g;
    for (const auto& r : rs) g[r.modality_combo].push_back(r.d);
    std::map<ModalityCombo, double> v;
    for (auto& [combo, values] : g) {
      std::sort(values.begin(), values.end());
      v[combo] = values.size() > 1 || kind == VarianceKind::population ? variance(values, kind) : 0.0;
    }
    return v;
  };
  rep.variance_classic_by_combo = by_combo(classic);
  rep.variance_controlled_by_combo = by_combo(controlled);
  for (const auto& [combo, v] : rep.variance_classic_by_combo) {
    auto it = rep.variance_controlled_by_combo.find(combo);
    if (it != rep.variance_controlled_by_combo.end()) {
      rep.per_modality_changes[combo] = relative_change(v, it->second);
    }
  }

  auto group_mean_variance = [kind](const std::vector<EatResult>& rs) {
    std::vector<double> vars;
    for (auto& [key, values] : group_cells(rs)) {
      std::sort(values.begin(), values.end());
      vars.push_back(values.size() > 1 || kind == VarianceKind::population ? variance(values, kind) : 0.0);
    }
    return mean(vars);
  };
  rep.group_mean_variance_classic = group_mean_variance(classic);
  rep.group_mean_variance_controlled = group_mean_variance(controlled);
  return rep;
}

std::vector<EatResult> filter_variant(const std::vector<EatResult>& results, AttrVariant variant) {
  std::vector<EatResult> out;
  std::copy_if(results.begin(), results.end(), std::back_inserter(out),
               [variant](const EatResult& r) { return r.attr_variant == variant; });
  return out;
}

Table aggregates_table(const std::vector<AggregateCell>& cells, const std::string& config_hash) {
  Table t;
  t.header = {"category", "modality_combo", "attr_variant", "mean_d", "sd_d", "n", "config_hash"};
  for (const auto& c : cells) {
    t.rows.push_back({std::string(to_string(c.category)), std::string(to_string(c.modality_combo)),
                      std::string(to_string(c.attr_variant)), format_real(c.mean_d),
                      format_real(c.sd_d), std::to_string(c.n), config_hash});
  }
  return t;
}

Table category_table(const std::vector<CategorySummary>& rows, const std::string& config_hash) {
  Table t;
  t.header = {"category",        "attr_variant",   "mean_d", "sd_d", "n", "cell_mean_of_means",
              "cell_sd_of_means", "cells",         "config_hash"};
  for (const auto& s : rows) {
    t.rows.push_back({std::string(to_string(s.category)), std::string(to_string(s.attr_variant)),
                      format_real(s.mean_d), format_real(s.sd_d), std::to_string(s.n),
                      format_real(s.cell_mean_of_means), format_real(s.cell_sd_of_means),
                      std::to_string(s.cells), config_hash});
  }
  return t;
}

Table rates_table(const std::vector<std::pair<double, double>>& rates, AttrVariant variant,
                  size_t n_rows, const std::string& config_hash) {
  Table t;
  t.header = {"attr_variant", "threshold", "comparison", "rate", "n", "config_hash"};
  for (const auto& [threshold, rate] : rates) {
    t.rows.push_back({std::string(to_string(variant)), format_real(threshold),
                      threshold == 0.0 ? "d>t" : "d>=t", format_real(rate), std::to_string(n_rows),
                      config_hash});
  }
  return t;
}

Table variance_table(const VarianceReport& rep, const std::string& config_hash) {
  Table t;
  t.header = {"scope", "variance_classic", "variance_controlled", "relative_change", "config_hash"};
  t.rows.push_back({"overall", format_real(rep.variance_classic),
                    format_real(rep.variance_controlled), format_real(rep.relative_change_overall),
                    config_hash});
  for (const auto& [combo, change] : rep.per_modality_changes) {
    t.rows.push_back({std::string(to_string(combo)),
                      format_real(rep.variance_classic_by_combo.at(combo)),
                      format_real(rep.variance_controlled_by_combo.at(combo)), format_real(change),
                      config_hash});
  }
  t.rows.push_back({"group_mean", format_real(rep.group_mean_variance_classic),
                    format_real(rep.group_mean_variance_controlled),
                    format_real(rep.group_mean_variance_classic == 0.0
                                    ? 0.0
                                    : (rep.group_mean_variance_classic -
                                       rep.group_mean_variance_controlled) /
                                          rep.group_mean_variance_classic),
                    config_hash});
  return t;
}

Table figure_table(const std::vector<AggregateCell>& cells, const std::string& config_hash) {
  Table t;
  t.header = {"attr_variant", "category", "modality_combo", "mean_d", "sd_d",
              "lower",        "upper",    "n",              "config_hash"};
  for (const auto& c : cells) {
    t.rows.push_back({std::string(to_string(c.attr_variant)), std::string(to_string(c.category)),
                      std::string(to_string(c.modality_combo)), format_real(c.mean_d),
                      format_real(c.sd_d), format_real(c.mean_d - c.sd_d),
                      format_real(c.mean_d + c.sd_d), std::to_string(c.n), config_hash});
  }
  return t;
}

}  // namespace xmeat
