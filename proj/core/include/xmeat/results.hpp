#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "xmeat/eat.hpp"
#include "xmeat/table.hpp"

namespace xmeat {

// Columns: model_id, test_id, category, modality_combo, attr_variant, d, p,
// mode, n_targets, n_attrs_a, n_attrs_b, config_hash.
Table results_table(const std::vector<EatResult>& results, const std::string& config_hash);

// Accepts tables with at least model_id, test_id, category, modality_combo,
// attr_variant and d; remaining columns are optional.
std::vector<EatResult> results_from_table(const Table& table);

std::vector<EatResult> read_results(const std::filesystem::path& csv);

// One JSON object per line, same fields as the table.
std::string results_jsonl(const std::vector<EatResult>& results, const std::string& config_hash);

}  // namespace xmeat
