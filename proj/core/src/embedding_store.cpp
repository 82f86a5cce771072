#include "xmeat/embedding_store.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "xmeat/error.hpp"
#include "xmeat/hash.hpp"
#include "xmeat/table.hpp"

namespace xmeat {

using nlohmann::json;

static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

namespace {

void put_le32(std::string& out, float value) {
  auto bits = std::bit_cast<std::uint32_t>(value);
  for (int shift = 0; shift < 32; shift += 8) {
    out.push_back(static_cast<char>((bits >> shift) & 0xFFu));
  }
}

float get_le32(const unsigned char* p) {
  std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
                       static_cast<std::uint32_t>(p[2]) << 16 |
                       static_cast<std::uint32_t>(p[3]) << 24;
  return std::bit_cast<float>(bits);
}

[[noreturn]] void corrupt(const std::filesystem::path& dir, const std::string& why) {
  throw ValidationError("corrupt bundle " + dir.string() + ": " + why);
}

}  // namespace

void EmbeddingBundle::add(std::string id, std::vector<float> vector) {
  index_.emplace(id, ids_.size());
  ids_.push_back(std::move(id));
  rows_.push_back(std::move(vector));
}

std::span<const float> EmbeddingBundle::vector(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) {
    throw ValidationError("missing stimulus '" + id + "' in bundle " + model_id_);
  }
  return rows_[it->second];
}

std::vector<std::string> EmbeddingBundle::validate() const {
  std::vector<std::string> problems;
  if (model_id_.empty()) problems.push_back("empty model id");
  if (dim_ == 0) problems.push_back("dimension must be positive");
  std::set<std::string> seen;
  for (size_t i = 0; i < ids_.size(); ++i) {
    if (!seen.insert(ids_[i]).second) problems.push_back("duplicate id '" + ids_[i] + "'");
    if (rows_[i].size() != dim_) {
      problems.push_back("row '" + ids_[i] + "' has length " + std::to_string(rows_[i].size()) +
                         ", expected " + std::to_string(dim_));
    }
    for (float v : rows_[i]) {
      if (!std::isfinite(v)) {
        problems.push_back("row '" + ids_[i] + "' has a non-finite entry");
        break;
      }
    }
  }
  return problems;
}

bool EmbeddingBundle::operator==(const EmbeddingBundle& other) const {
  if (model_id_ != other.model_id_ || dim_ != other.dim_ || ids_ != other.ids_ ||
      meta_ != other.meta_ || registry_hash != other.registry_hash) {
    return false;
  }
  // Bitwise payload comparison.
  for (size_t i = 0; i < rows_.size(); ++i) {
    if (rows_[i].size() != other.rows_[i].size() ||
        std::memcmp(rows_[i].data(), other.rows_[i].data(), rows_[i].size() * sizeof(float)) != 0) {
      return false;
    }
  }
  return true;
}

void write_bundle(const EmbeddingBundle& bundle, const std::filesystem::path& dir) {
  if (auto problems = bundle.validate(); !problems.empty()) {
    throw ValidationError("invalid bundle: " + problems.front());
  }
  std::string payload;
  payload.reserve(bundle.size() * bundle.dim() * 4);
  json offsets = json::array();
  for (size_t i = 0; i < bundle.size(); ++i) {
    offsets.push_back(static_cast<std::uint64_t>(payload.size()));
    for (float v : bundle.row(i)) put_le32(payload, v);
  }

  json manifest = {{"format", "xmeat-bundle/1"},
                   {"model_id", bundle.model_id()},
                   {"dim", bundle.dim()},
                   {"row_count", bundle.size()},
                   {"dtype", "float32-le"},
                   {"ids", bundle.ids()},
                   {"offsets", offsets},
                   {"registry_hash", bundle.registry_hash},
                   {"payload_sha256", sha256_hex(payload)},
                   {"meta", bundle.meta()}};

  std::filesystem::create_directories(dir);
  write_file_atomic(dir / kVectorsFile, payload);
  write_file_atomic(dir / kManifestFile, manifest.dump(2) + "\n");
}

BundleManifest read_manifest(const std::filesystem::path& dir) {
  BundleManifest m;
  json doc;
  try {
    doc = json::parse(read_file(dir / kManifestFile));
  } catch (const json::exception& e) {
    corrupt(dir, std::string("unreadable manifest: ") + e.what());
  }
  try {
    if (doc.value("dtype", "float32-le") != "float32-le") corrupt(dir, "unsupported dtype");
    m.model_id = doc.at("model_id").get<std::string>();
    m.dim = doc.at("dim").get<size_t>();
    m.row_count = doc.at("row_count").get<size_t>();
    m.ids = doc.at("ids").get<std::vector<std::string>>();
    m.registry_hash = doc.value("registry_hash", "");
    m.payload_sha256 = doc.at("payload_sha256").get<std::string>();
    if (doc.contains("offsets")) m.offsets = doc["offsets"].get<std::vector<std::uint64_t>>();
    if (doc.contains("meta")) m.meta = doc["meta"].get<std::map<std::string, std::string>>();
  } catch (const json::exception& e) {
    corrupt(dir, std::string("malformed manifest: ") + e.what());
  }
  if (m.dim == 0) corrupt(dir, "dimension must be positive");
  if (m.row_count != m.ids.size()) corrupt(dir, "row_count disagrees with id list");
  if (!m.offsets.empty()) {
    if (m.offsets.size() != m.row_count) corrupt(dir, "offset count disagrees with row_count");
    for (size_t i = 0; i < m.offsets.size(); ++i) {
      if (m.offsets[i] != i * m.dim * 4) corrupt(dir, "offsets inconsistent with row-major layout");
    }
  }
  return m;
}

EmbeddingBundle read_bundle(const std::filesystem::path& dir) {
  const BundleManifest m = read_manifest(dir);
  const std::string payload = read_file(dir / kVectorsFile);
  if (payload.size() != m.row_count * m.dim * 4) {
    corrupt(dir, "dimension mismatch: payload has " + std::to_string(payload.size()) +
                     " bytes, manifest implies " + std::to_string(m.row_count * m.dim * 4));
  }
  if (sha256_hex(payload) != m.payload_sha256) corrupt(dir, "checksum failure");

  EmbeddingBundle bundle(m.model_id, m.dim);
  bundle.registry_hash = m.registry_hash;
  bundle.meta() = m.meta;
  const auto* bytes = reinterpret_cast<const unsigned char*>(payload.data());
  for (size_t r = 0; r < m.row_count; ++r) {
    std::vector<float> row(m.dim);
    for (size_t c = 0; c < m.dim; ++c) row[c] = get_le32(bytes + (r * m.dim + c) * 4);
    bundle.add(m.ids[r], std::move(row));
  }
  if (auto problems = bundle.validate(); !problems.empty()) {
    corrupt(dir, problems.front());
  }
  return bundle;
}

std::vector<std::filesystem::path> list_bundles(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  if (!std::filesystem::is_directory(dir)) throw Error("not a directory: " + dir.string());
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_directory() && std::filesystem::exists(entry.path() / kManifestFile)) {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

size_t CoverageReport::runnable_count() const {
  size_t n = 0;
  for (const auto& t : tests) n += t.runnable() ? 1 : 0;
  return n;
}

CoverageReport coverage_check(const EmbeddingBundle& bundle, const Registry& registry,
                              const std::vector<EatTestSpec>& suite) {
  CoverageReport report;
  for (const auto& spec : suite) {
    TestCoverage cov{spec.test_id, spec.attr_variant, {}};
    for (const auto& id : referenced_ids(registry, spec)) {
      if (!bundle.contains(id)) cov.missing_ids.push_back(id);
    }
    report.tests.push_back(std::move(cov));
  }
  for (const auto& id : bundle.ids()) {
    if (!registry.has_item(id)) report.unknown_ids.push_back(id);
  }
  return report;
}

}  // namespace xmeat
