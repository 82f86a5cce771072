#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace xmeat {

enum class Modality { text, image };
enum class Role { target, attribute };
// first = stereotype-congruent-positive side (flowers, women, pleasant, ...).
enum class Pole { first, second };
enum class Category { flower_insect, instrument_weapon, gender, race, age };
enum class Variant { names, words, image, classic_attr, controlled_attr };
enum class ModalityCombo { all_image, all_text, image_as_target, text_as_target };
enum class AttrVariant { classic, controlled };

std::string_view to_string(Modality m);
std::string_view to_string(Role r);
std::string_view to_string(Pole p);
std::string_view to_string(Category c);
std::string_view to_string(Variant v);
std::string_view to_string(ModalityCombo m);
std::string_view to_string(AttrVariant v);

// Parsers throw ValidationError on unknown labels.
Modality parse_modality(std::string_view s);
Role parse_role(std::string_view s);
Pole parse_pole(std::string_view s);
Category parse_category(std::string_view s);
Variant parse_variant(std::string_view s);
ModalityCombo parse_modality_combo(std::string_view s);
AttrVariant parse_attr_variant(std::string_view s);

inline constexpr Category kAllCategories[] = {Category::flower_insect, Category::instrument_weapon,
                                              Category::gender, Category::race, Category::age};
inline constexpr ModalityCombo kAllCombos[] = {ModalityCombo::all_image, ModalityCombo::all_text,
                                               ModalityCombo::image_as_target,
                                               ModalityCombo::text_as_target};

ModalityCombo combo_for(Modality target, Modality attribute);

struct StimulusItem {
  std::string id;
  Modality modality = Modality::text;
  // Text string, or image path relative to the registry directory.
  std::string payload;
  Role role = Role::target;
  Pole pole = Pole::first;
  // Targets only; attributes are valence-only and carry no category.
  std::optional<Category> category;
  Variant variant = Variant::words;
  // SHA-256 of the image file; empty for text.
  std::string content_hash;

  bool operator==(const StimulusItem&) const = default;
};

struct StimulusSet {
  std::string name;
  Role role = Role::target;
  Pole pole = Pole::first;
  Modality modality = Modality::text;
  std::optional<Category> category;
  Variant variant = Variant::words;
  std::vector<std::string> item_ids;

  bool operator==(const StimulusSet&) const = default;
};

struct EatTestSpec {
  std::string test_id;
  Category category = Category::flower_insect;
  ModalityCombo modality_combo = ModalityCombo::all_text;
  AttrVariant attr_variant = AttrVariant::controlled;
  std::string x;  // congruent-positive target set
  std::string y;  // congruent-negative target set
  std::string a;  // pleasant attributes
  std::string b;  // unpleasant attributes

  bool operator==(const EatTestSpec&) const = default;
};

inline constexpr std::string_view kWordPlaceholder = "[WORD]";
inline constexpr size_t kControlledWordsPerPole = 25;
inline constexpr size_t kControlledImagesPerPole = 25;

// Immutable after load. Item and set lookups are by id/name.
class Registry {
 public:
  Registry() = default;
  Registry(std::vector<StimulusItem> items, std::vector<StimulusSet> sets,
           std::vector<std::string> templates = {});

  // Reads `registry.json` under `dir`; image payloads resolve against `dir`.
  static Registry load(const std::filesystem::path& dir);
  // Writes `registry.json` under `dir` (image files are not copied).
  void save(const std::filesystem::path& dir) const;

  const std::vector<StimulusItem>& items() const { return items_; }
  const std::vector<StimulusSet>& sets() const { return sets_; }
  const std::vector<std::string>& templates() const { return templates_; }
  const std::filesystem::path& root() const { return root_; }

  const StimulusItem& item(const std::string& id) const;
  const StimulusSet& set(const std::string& name) const;
  bool has_item(const std::string& id) const { return item_index_.count(id) != 0; }
  bool has_set(const std::string& name) const { return set_index_.count(name) != 0; }

  // Target set lookup; nullptr if absent.
  const StimulusSet* find_target(Category c, Modality m, Variant v, Pole p) const;
  const StimulusSet* find_attribute(AttrVariant v, Modality m, Pole p) const;

  // Canonical serialisation; identical registries hash identically.
  std::string manifest_text() const;
  std::string content_hash() const;

  // Returns every invariant violation found (empty when valid). When
  // `check_files` is set, image payloads must exist and match their hash.
  std::vector<std::string> validate(bool check_files = true) const;

 private:
  void index();

  std::vector<StimulusItem> items_;
  std::vector<StimulusSet> sets_;
  std::vector<std::string> templates_;
  std::filesystem::path root_;
  std::map<std::string, size_t> item_index_;
  std::map<std::string, size_t> set_index_;
};

struct LexiconRow {
  std::string term;
  double valence = 0.0;
};

struct ValenceSelection {
  std::vector<std::string> pleasant;
  std::vector<std::string> unpleasant;
};

// k highest- and k lowest-valence terms. Ties are broken by ascending term so
// the selection is deterministic.
ValenceSelection select_top_valence(const std::vector<LexiconRow>& rows, size_t k);

// Word-major expansion: for each word, every template in order. Produces
// text attribute items with ids "<id_prefix><word index>_t<template index>".
std::vector<StimulusItem> expand_templates(const std::vector<std::string>& words,
                                           const std::vector<std::string>& templates,
                                           const std::string& id_prefix = "w",
                                           Pole pole = Pole::first,
                                           Variant variant = Variant::controlled_attr);

// The 26 tests for one attribute variant, ordered all_image, all_text,
// image_as_target, text_as_target; within a combo by category then target
// variant. Throws ValidationError("incomplete registry: ...") naming the first
// missing set as "<category>/<modality>/<role>" or "<variant>/<modality>/attribute".
std::vector<EatTestSpec> build_test_suite(const Registry& registry, AttrVariant variant);

// Checks one spec against the registry (shared modality, pole layout, |X|=|Y|).
std::vector<std::string> check_test_spec(const Registry& registry, const EatTestSpec& spec);

// The registry items a spec references, X then Y then A then B.
std::vector<std::string> referenced_ids(const Registry& registry, const EatTestSpec& spec);

}  // namespace xmeat
