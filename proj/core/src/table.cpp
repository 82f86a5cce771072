#include "xmeat/table.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

#include "xmeat/error.hpp"

namespace xmeat {
namespace {

bool needs_quotes(const std::string& cell) {
  return cell.find_first_of(",\"\n\r") != std::string::npos;
}

void append_cell(std::string& out, const std::string& cell) {
  if (!needs_quotes(cell)) {
    out += cell;
    return;
  }
  out.push_back('"');
  for (char c : cell) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
}

}  // namespace

size_t Table::column(const std::string& name) const {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ValidationError("missing column '" + name + "'");
  return static_cast<size_t>(it - header.begin());
}

bool Table::has_column(const std::string& name) const {
  return std::find(header.begin(), header.end(), name) != header.end();
}

std::string to_csv(const Table& table) {
  std::string out;
  auto emit_row = [&out](const std::vector<std::string>& row) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) out.push_back(',');
      append_cell(out, row[i]);
    }
    out.push_back('\n');
  };
  emit_row(table.header);
  for (const auto& row : table.rows) emit_row(row);
  return out;
}

Table parse_csv(const std::string& text, const std::string& origin) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string cell;
  bool quoted = false;
  bool cell_started = false;
  size_t line = 1;

  auto end_cell = [&] {
    record.push_back(std::move(cell));
    cell.clear();
    cell_started = false;
  };
  auto end_record = [&] {
    end_cell();
    if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
    record.clear();
  };

  for (size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          cell.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        cell.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (cell_started) {
          throw ValidationError(origin + ":" + std::to_string(line) + ": stray quote");
        }
        quoted = true;
        cell_started = true;
        break;
      case ',':
        end_cell();
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        ++line;
        break;
      default:
        cell.push_back(c);
        cell_started = true;
    }
  }
  if (quoted) throw ValidationError(origin + ": unterminated quoted cell");
  if (cell_started || !record.empty()) end_record();

  Table table;
  if (records.empty()) throw ValidationError(origin + ": empty table");
  table.header = std::move(records.front());
  for (size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != table.header.size()) {
      throw ValidationError(origin + ": row " + std::to_string(r) + " has " +
                            std::to_string(records[r].size()) + " cells, header has " +
                            std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(records[r]));
  }
  return table;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Table read_csv(const std::filesystem::path& path) {
  return parse_csv(read_file(path), path.string());
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw Error("write failure on " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error("cannot rename into " + path.string() + ": " + ec.message());
  }
}

void write_csv_atomic(const std::filesystem::path& path, const Table& table) {
  write_file_atomic(path, to_csv(table));
}

std::string format_real(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

double parse_real(const std::string& cell, const std::string& what) {
  double value = 0.0;
  auto res = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
    throw ValidationError("invalid number for " + what + ": '" + cell + "'");
  }
  return value;
}

long long parse_integer(const std::string& cell, const std::string& what) {
  long long value = 0;
  auto res = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
    // Accept integral values written in scientific form, e.g. "1.2e9".
    double d = parse_real(cell, what);
    if (d != static_cast<double>(static_cast<long long>(d))) {
      throw ValidationError("invalid integer for " + what + ": '" + cell + "'");
    }
    return static_cast<long long>(d);
  }
  return value;
}

}  // namespace xmeat
