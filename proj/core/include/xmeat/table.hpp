#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace xmeat {

// Minimal RFC-4180 style comma-separated table: a header row plus string
// cells. Numbers are written with round-trip precision via format_real().
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column; throws ValidationError naming the column.
  size_t column(const std::string& name) const;
  bool has_column(const std::string& name) const;
};

std::string to_csv(const Table& table);
Table parse_csv(const std::string& text, const std::string& origin = "<memory>");
Table read_csv(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it into place, so readers
// never observe a partially written file.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
void write_csv_atomic(const std::filesystem::path& path, const Table& table);

std::string read_file(const std::filesystem::path& path);

// Shortest decimal form that parses back to the same double.
std::string format_real(double value);
double parse_real(const std::string& cell, const std::string& what);
long long parse_integer(const std::string& cell, const std::string& what);

}  // namespace xmeat
