#include "xmeat/results.hpp"

#include <nlohmann/json.hpp>

#include "xmeat/error.hpp"

namespace xmeat {

Table results_table(const std::vector<EatResult>& results, const std::string& config_hash) {
  Table t;
  t.header = {"model_id", "test_id", "category", "modality_combo", "attr_variant", "d",
              "p",        "mode",    "n_targets", "n_attrs_a",     "n_attrs_b",    "config_hash"};
  for (const auto& r : results) {
    t.rows.push_back({r.model_id, r.test_id, std::string(to_string(r.category)),
                      std::string(to_string(r.modality_combo)),
                      std::string(to_string(r.attr_variant)), format_real(r.d),
                      format_real(r.p_value), r.permutation_mode,
                      std::to_string(r.n_targets_per_side), std::to_string(r.n_attrs_a),
                      std::to_string(r.n_attrs_b), config_hash});
  }
  return t;
}

std::vector<EatResult> results_from_table(const Table& table) {
  const size_t c_model = table.column("model_id");
  const size_t c_test = table.column("test_id");
  const size_t c_cat = table.column("category");
  const size_t c_combo = table.column("modality_combo");
  const size_t c_var = table.column("attr_variant");
  const size_t c_d = table.column("d");
  const bool has_p = table.has_column("p");
  const bool has_mode = table.has_column("mode");
  const bool has_n = table.has_column("n_targets");

  std::vector<EatResult> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    EatResult r;
    r.model_id = row[c_model];
    r.test_id = row[c_test];
    r.category = parse_category(row[c_cat]);
    r.modality_combo = parse_modality_combo(row[c_combo]);
    r.attr_variant = parse_attr_variant(row[c_var]);
    r.d = parse_real(row[c_d], "d");
    if (has_p && !row[table.column("p")].empty()) r.p_value = parse_real(row[table.column("p")], "p");
    if (has_mode) r.permutation_mode = row[table.column("mode")];
    if (has_n) {
      r.n_targets_per_side = static_cast<size_t>(parse_integer(row[table.column("n_targets")], "n_targets"));
      r.n_attrs_a = static_cast<size_t>(parse_integer(row[table.column("n_attrs_a")], "n_attrs_a"));
      r.n_attrs_b = static_cast<size_t>(parse_integer(row[table.column("n_attrs_b")], "n_attrs_b"));
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<EatResult> read_results(const std::filesystem::path& csv) {
  return results_from_table(read_csv(csv));
}

std::string results_jsonl(const std::vector<EatResult>& results, const std::string& config_hash) {
  std::string out;
  for (const auto& r : results) {
    nlohmann::ordered_json j = {{"model_id", r.model_id},
                                {"test_id", r.test_id},
                                {"category", to_string(r.category)},
                                {"modality_combo", to_string(r.modality_combo)},
                                {"attr_variant", to_string(r.attr_variant)},
                                {"d", r.d},
                                {"p", r.p_value},
                                {"mode", r.permutation_mode},
                                {"n_targets", r.n_targets_per_side},
                                {"n_attrs_a", r.n_attrs_a},
                                {"n_attrs_b", r.n_attrs_b},
                                {"config_hash", config_hash}};
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

}  // namespace xmeat
