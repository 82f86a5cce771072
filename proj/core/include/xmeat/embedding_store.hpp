#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "xmeat/stimulus.hpp"

namespace xmeat {

// One model's embeddings for a registry, keyed by stimulus id. Vectors are
// stored raw (not normalised) as 32-bit floats in insertion order.
class EmbeddingBundle {
 public:
  EmbeddingBundle() = default;
  EmbeddingBundle(std::string model_id, size_t dim) : model_id_(std::move(model_id)), dim_(dim) {}

  const std::string& model_id() const { return model_id_; }
  size_t dim() const { return dim_; }
  size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }

  // Appends a row. Does not validate; call validate() or write_bundle().
  void add(std::string id, std::vector<float> vector);

  bool contains(const std::string& id) const { return index_.count(id) != 0; }
  // Throws ValidationError("missing stimulus ...") for unknown ids.
  std::span<const float> vector(const std::string& id) const;

  const std::vector<std::string>& ids() const { return ids_; }
  std::span<const float> row(size_t i) const { return rows_[i]; }

  std::map<std::string, std::string>& meta() { return meta_; }
  const std::map<std::string, std::string>& meta() const { return meta_; }
  std::string registry_hash;

  // Every violated invariant (empty when valid).
  std::vector<std::string> validate() const;

  bool operator==(const EmbeddingBundle& other) const;

 private:
  std::string model_id_;
  size_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<std::vector<float>> rows_;
  std::map<std::string, size_t> index_;
  std::map<std::string, std::string> meta_;
};

struct BundleManifest {
  std::string model_id;
  size_t dim = 0;
  size_t row_count = 0;
  std::vector<std::string> ids;
  std::string registry_hash;
  std::string payload_sha256;
  // Byte offset of each row in vectors.bin.
  std::vector<std::uint64_t> offsets;
  std::map<std::string, std::string> meta;
};

inline constexpr const char* kManifestFile = "manifest";
inline constexpr const char* kVectorsFile = "vectors.bin";

// Writes `dir/manifest` and `dir/vectors.bin`. Throws ValidationError
// ("invalid bundle: ...") if the bundle violates its invariants.
void write_bundle(const EmbeddingBundle& bundle, const std::filesystem::path& dir);

// Reads and fully validates a bundle directory: manifest structure, payload
// size, checksum, and finiteness of every entry.
EmbeddingBundle read_bundle(const std::filesystem::path& dir);
BundleManifest read_manifest(const std::filesystem::path& dir);

// Bundle directories directly under `dir` (those holding a manifest), sorted.
std::vector<std::filesystem::path> list_bundles(const std::filesystem::path& dir);

struct TestCoverage {
  std::string test_id;
  AttrVariant attr_variant = AttrVariant::controlled;
  std::vector<std::string> missing_ids;
  bool runnable() const { return missing_ids.empty(); }
};

struct CoverageReport {
  std::vector<TestCoverage> tests;
  // Bundle ids that the registry does not know.
  std::vector<std::string> unknown_ids;
  size_t runnable_count() const;
};

CoverageReport coverage_check(const EmbeddingBundle& bundle, const Registry& registry,
                              const std::vector<EatTestSpec>& suite);

}  // namespace xmeat
