#include "xmeat/inference.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "xmeat/error.hpp"

namespace xmeat {
namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

FamilyMap::Kind parse_kind(const std::string& s) {
  if (s == "arch") return FamilyMap::Kind::arch;
  if (s == "dataset") return FamilyMap::Kind::dataset;
  throw ValidationError("family map: unknown kind '" + s + "'");
}

}  // namespace

// ---------------------------------------------------------------------------
// Records

FamilyMap FamilyMap::load(const std::filesystem::path& csv) {
  const Table t = read_csv(csv);
  const size_t c_kind = t.column("kind"), c_pat = t.column("pattern"), c_fam = t.column("family");
  FamilyMap map;
  for (const auto& row : t.rows) map.add(parse_kind(row[c_kind]), row[c_pat], row[c_fam]);
  return map;
}

void FamilyMap::add(Kind kind, std::string pattern, std::string family) {
  rules_.push_back({kind, lower(std::move(pattern)), lower(std::move(family))});
}

std::string FamilyMap::normalize(Kind kind, const std::string& label) const {
  const std::string key = lower(label);
  for (const auto& rule : rules_) {
    if (rule.kind != kind) continue;
    if (!rule.pattern.empty() && rule.pattern.back() == '*') {
      if (key.compare(0, rule.pattern.size() - 1, rule.pattern, 0, rule.pattern.size() - 1) == 0) {
        return rule.family;
      }
    } else if (key == rule.pattern) {
      return rule.family;
    }
  }
  return key;
}

std::vector<ModelRecord> models_from_table(const Table& t, const FamilyMap* families) {
  const size_t c_id = t.column("model_id");
  const size_t c_params = t.column("param_count");
  const size_t c_arch = t.column("arch_family");
  const size_t c_data = t.column("dataset_family");
  const size_t c_size = t.column("dataset_size");
  std::vector<ModelRecord> out;
  std::set<std::string> seen;
  for (const auto& row : t.rows) {
    ModelRecord rec;
    rec.model_id = row[c_id];
    if (!seen.insert(rec.model_id).second) {
      throw ValidationError("models table: duplicate model_id '" + rec.model_id + "'");
    }
    const long long params = parse_integer(row[c_params], "param_count of " + rec.model_id);
    const long long size = parse_integer(row[c_size], "dataset_size of " + rec.model_id);
    if (params <= 0 || size <= 0) {
      throw ValidationError("models table: param_count and dataset_size must be positive for '" +
                            rec.model_id + "'");
    }
    rec.param_count = static_cast<std::uint64_t>(params);
    rec.dataset_size = static_cast<std::uint64_t>(size);
    rec.arch_family = families ? families->normalize(FamilyMap::Kind::arch, row[c_arch]) : lower(row[c_arch]);
    rec.dataset_family =
        families ? families->normalize(FamilyMap::Kind::dataset, row[c_data]) : lower(row[c_data]);
    if (rec.arch_family.empty() || rec.dataset_family.empty()) {
      throw ValidationError("models table: empty family label for '" + rec.model_id + "'");
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<ModelRecord> read_models(const std::filesystem::path& csv, const FamilyMap* families) {
  return models_from_table(read_csv(csv), families);
}

void attach_vtab(std::vector<ModelRecord>& records, const Table& vtab) {
  const size_t c_id = vtab.column("model_id"), c_task = vtab.column("task"),
               c_score = vtab.column("score");
  std::map<std::string, ModelRecord*> by_id;
  for (auto& r : records) by_id[r.model_id] = &r;
  for (const auto& row : vtab.rows) {
    auto it = by_id.find(row[c_id]);
    if (it == by_id.end() || row[c_score].empty()) continue;
    const double score = parse_real(row[c_score], "vtab score");
    if (!std::isfinite(score)) continue;
    it->second->vtab_scores[row[c_task]] = score;
  }
}

// ---------------------------------------------------------------------------
// Design

RegressionDataset build_design(const std::vector<EatResult>& results,
                               const std::vector<ModelRecord>& records,
                               const DesignOptions& options) {
  if (results.empty()) throw ValidationError("regression needs at least one result");
  std::map<std::string, const ModelRecord*> by_id;
  for (const auto& r : records) by_id[r.model_id] = &r;

  std::vector<const ModelRecord*> row_records;
  row_records.reserve(results.size());
  std::set<std::string> arch_levels, data_levels;
  for (const auto& r : results) {
    auto it = by_id.find(r.model_id);
    if (it == by_id.end()) throw ValidationError("unknown model_id '" + r.model_id + "'");
    row_records.push_back(it->second);
    arch_levels.insert(it->second->arch_family);
    data_levels.insert(it->second->dataset_family);
  }

  RegressionDataset ds;
  ds.dataset_reference = lower(options.dataset_reference);
  if (!data_levels.count(ds.dataset_reference)) {
    throw ValidationError("unknown family label: dataset reference '" + ds.dataset_reference +
                          "' does not occur in the data");
  }
  ds.arch_reference = options.arch_reference ? lower(*options.arch_reference) : *arch_levels.begin();
  if (!arch_levels.count(ds.arch_reference)) {
    throw ValidationError("unknown family label: architecture reference '" + ds.arch_reference +
                          "' does not occur in the data");
  }

  std::vector<std::string> arch_dummies, data_dummies;
  for (const auto& a : arch_levels) {
    if (a != ds.arch_reference) arch_dummies.push_back(a);
  }
  for (const auto& d : data_levels) {
    if (d != ds.dataset_reference) data_dummies.push_back(d);
  }

  const size_t n = results.size();
  std::vector<double> log_params(n), log_size(n);
  for (size_t i = 0; i < n; ++i) {
    log_params[i] = std::log(static_cast<double>(row_records[i]->param_count));
    log_size[i] = std::log(static_cast<double>(row_records[i]->dataset_size));
  }
  // A continuous predictor that does not vary is dropped rather than failing
  // the whole regression (e.g. every model trained on one dataset).
  auto standardized = [&ds](const std::vector<double>& v, const char* name) {
    std::optional<std::vector<double>> z;
    try {
      z = standardize(v);
    } catch (const DegenerateError&) {
      ds.warnings.push_back(std::string(name) + " is constant across rows; column dropped");
    }
    return z;
  };
  const auto z_params = standardized(log_params, "log_params");
  const auto z_size = standardized(log_size, "log_dataset_size");

  auto& data = ds.data;
  data.fixed_names.push_back("intercept");
  if (z_params) data.fixed_names.push_back("log_params");
  for (const auto& a : arch_dummies) data.fixed_names.push_back("arch[" + a + "]");
  for (const auto& d : data_dummies) data.fixed_names.push_back("dataset[" + d + "]");
  if (z_size) data.fixed_names.push_back("log_dataset_size");

  const auto p = static_cast<Eigen::Index>(data.fixed_names.size());
  data.x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), p);
  data.y.resize(static_cast<Eigen::Index>(n));

  std::map<std::string, int> group_index;
  std::vector<std::string> labels(n);
  for (size_t i = 0; i < n; ++i) {
    labels[i] = options.grouping == Grouping::test
                    ? results[i].test_id
                    : std::string(to_string(results[i].modality_combo)) + "/" +
                          std::string(to_string(results[i].category));
    group_index.emplace(labels[i], 0);
  }
  int next = 0;
  for (auto& [label, idx] : group_index) {
    idx = next++;
    ds.group_labels.push_back(label);
  }
  data.n_groups = next;

  for (size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    data.y[row] = results[i].d;
    Eigen::Index col = 0;
    data.x(row, col++) = 1.0;
    if (z_params) data.x(row, col++) = (*z_params)[i];
    for (const auto& a : arch_dummies) data.x(row, col++) = row_records[i]->arch_family == a ? 1.0 : 0.0;
    for (const auto& d : data_dummies) {
      data.x(row, col++) = row_records[i]->dataset_family == d ? 1.0 : 0.0;
    }
    if (z_size) data.x(row, col++) = (*z_size)[i];
    data.group.push_back(group_index.at(labels[i]));
  }
  return ds;
}

MixedModelFit fit_mixed_model(const RegressionDataset& dataset, const MixedModelSpec& spec) {
  LmmData data = dataset.data;
  std::vector<std::string> warnings = dataset.warnings;
  std::vector<Eigen::Index> columns;
  data.random_names.clear();
  for (const auto& term : spec.random_terms) {
    auto it = std::find(data.fixed_names.begin(), data.fixed_names.end(), term);
    if (it != data.fixed_names.end()) {
      columns.push_back(it - data.fixed_names.begin());
      data.random_names.push_back(term);
      continue;
    }
    // Dropped by build_design; anything else is a caller error.
    const bool dropped = std::any_of(warnings.begin(), warnings.end(), [&term](const std::string& w) {
      return w.rfind(term + " is constant", 0) == 0;
    });
    if (!dropped) throw ValidationError("random term '" + term + "' is not a design column");
    warnings.push_back("random term '" + term + "' omitted");
  }
  if (columns.empty()) throw ValidationError("no random terms left in the design");
  data.z.resize(data.x.rows(), static_cast<Eigen::Index>(columns.size()));
  for (size_t k = 0; k < columns.size(); ++k) {
    data.z.col(static_cast<Eigen::Index>(k)) = data.x.col(columns[k]);
  }
  MixedModelFit fit = fit_lmm(data, spec.lmm);
  fit.warnings.insert(fit.warnings.begin(), warnings.begin(), warnings.end());
  return fit;
}

// ---------------------------------------------------------------------------
// Correlations

TaskSubsets load_task_subsets(const std::filesystem::path& csv) {
  const Table t = read_csv(csv);
  const size_t c_combo = t.column("modality_combo"), c_task = t.column("task");
  TaskSubsets subsets;
  for (const auto& row : t.rows) {
    subsets.tasks[parse_modality_combo(row[c_combo])].push_back(row[c_task]);
  }
  return subsets;
}

CorrelationReport correlate_performance(const std::vector<EatResult>& results,
                                        const std::vector<ModelRecord>& records,
                                        const TaskSubsets& subsets) {
  std::map<std::string, const ModelRecord*> by_id;
  for (const auto& r : records) by_id[r.model_id] = &r;

  using CellKey = std::tuple<AttrVariant, Category, ModalityCombo>;
  // cell -> model -> d values
  std::map<CellKey, std::map<std::string, std::vector<double>>> cells;
  for (const auto& r : results) {
    cells[{r.attr_variant, r.category, r.modality_combo}][r.model_id].push_back(
        subsets.use_magnitude ? std::abs(r.d) : r.d);
  }

  auto performance = [&subsets](const ModelRecord& rec,
                                ModalityCombo combo) -> std::optional<double> {
    auto it = subsets.tasks.find(combo);
    double sum = 0.0;
    size_t count = 0;
    if (it == subsets.tasks.end()) {
      for (const auto& [task, score] : rec.vtab_scores) {
        sum += score;
        ++count;
      }
    } else {
      for (const auto& task : it->second) {
        auto s = rec.vtab_scores.find(task);
        if (s != rec.vtab_scores.end()) {
          sum += s->second;
          ++count;
        }
      }
    }
    if (count == 0) return std::nullopt;
    return sum / static_cast<double>(count);
  };

  CorrelationReport report;
  for (const auto& [key, per_model] : cells) {
    const auto& [variant, category, combo] = key;
    std::vector<double> xs, ys;
    for (const auto& [model, ds] : per_model) {
      auto rec = by_id.find(model);
      if (rec == by_id.end()) continue;
      auto perf = performance(*rec->second, combo);
      if (!perf) continue;
      xs.push_back(mean(ds));
      ys.push_back(*perf);
    }
    const std::string cell_name = std::string(to_string(category)) + " x " +
                                  std::string(to_string(combo)) + " (" +
                                  std::string(to_string(variant)) + ")";
    if (xs.size() < 3) {
      report.warnings.push_back("correlation omitted for " + cell_name + ": only " +
                                std::to_string(xs.size()) + " models with performance data");
      continue;
    }
    try {
      const PearsonResult pr = pearson(xs, ys);
      report.cells.push_back({category, combo, variant, pr.r, pr.p_value, pr.n});
    } catch (const DegenerateError& e) {
      report.warnings.push_back("correlation omitted for " + cell_name + ": " + e.what());
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Tables

Table mixed_fit_table(const MixedModelFit& fit, const std::string& config_hash, double alpha) {
  Table t;
  t.header = {"kind", "term", "estimate", "se", "z", "p", "significant", "config_hash"};
  for (const auto& fe : fit.fixed) {
    t.rows.push_back({"fixed", fe.name, format_real(fe.estimate), format_real(fe.se),
                      format_real(fe.z), format_real(fe.p_value), fe.p_value < alpha ? "1" : "0",
                      config_hash});
  }
  for (Eigen::Index r = 0; r < fit.random_covariance.rows(); ++r) {
    for (Eigen::Index c = 0; c <= r; ++c) {
      const double v = fit.random_covariance(r, c);
      const auto& nr = fit.random_names[static_cast<size_t>(r)];
      const auto& nc = fit.random_names[static_cast<size_t>(c)];
      if (r != c && v == 0.0) continue;
      t.rows.push_back({"random", r == c ? "var(" + nr + ")" : "cov(" + nr + "," + nc + ")",
                        format_real(v), "", "", "", "", config_hash});
    }
  }
  t.rows.push_back({"residual", "var(residual)", format_real(fit.residual_variance), "", "", "", "",
                    config_hash});
  t.rows.push_back({"fit", "reml_loglik", format_real(fit.reml_loglik), "", "", "", "", config_hash});
  t.rows.push_back({"fit", "converged", fit.converged ? "1" : "0", "", "", "", "", config_hash});
  return t;
}

Table correlations_table(const std::vector<CorrelationResult>& cells, const std::string& config_hash,
                         double alpha) {
  Table t;
  t.header = {"attr_variant", "category", "modality_combo", "r", "p", "n", "significant",
              "config_hash"};
  for (const auto& c : cells) {
    t.rows.push_back({std::string(to_string(c.attr_variant)), std::string(to_string(c.category)),
                      std::string(to_string(c.modality_combo)), format_real(c.r),
                      format_real(c.p_value), std::to_string(c.n), c.p_value < alpha ? "1" : "0",
                      config_hash});
  }
  return t;
}

}  // namespace xmeat
