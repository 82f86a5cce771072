#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace xmeat::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitStage = 3;

int registry_validate(const std::filesystem::path& dir);
int registry_select_valence(const std::filesystem::path& lexicon, size_t k);

int bundle_validate(const std::filesystem::path& dir,
                    const std::optional<std::filesystem::path>& registry);
int bundle_coverage(const std::filesystem::path& dir, const std::filesystem::path& registry,
                    const std::string& variant);

struct RunArgs {
  std::filesystem::path registry;
  std::filesystem::path bundles;
  std::string variant = "controlled";
  std::string permutation = "auto";
  std::optional<std::uint64_t> seed;
  std::uint64_t samples = 50'000;
  std::string std_dev = "population";
  std::filesystem::path out = "results";
};
int run(const RunArgs& args);

int aggregate(const std::filesystem::path& results, const std::filesystem::path& out,
              const std::string& std_dev);

struct RegressArgs {
  std::filesystem::path results;
  std::filesystem::path models;
  std::optional<std::filesystem::path> families;
  std::string grouping = "combo_category";
  std::string covariance = "diagonal";
  std::string dataset_reference = "cc12m";
  std::optional<std::string> arch_reference;
  std::string variant = "controlled";
  std::filesystem::path out = "results";
};
int regress(const RegressArgs& args);

struct CorrelateArgs {
  std::filesystem::path results;
  std::filesystem::path models;
  std::filesystem::path vtab;
  std::optional<std::filesystem::path> families;
  std::optional<std::filesystem::path> task_subsets;
  bool magnitude = false;
  std::filesystem::path out = "results";
};
int correlate(const CorrelateArgs& args);

int run_all(const std::filesystem::path& config, const std::filesystem::path& output = {});

}  // namespace xmeat::cli
