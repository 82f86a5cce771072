#include "xmeat/stimulus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "xmeat/error.hpp"
#include "xmeat/hash.hpp"
#include "xmeat/table.hpp"

namespace xmeat {

using nlohmann::json;

namespace {

template <typename Enum, size_t N>
Enum parse_label(std::string_view s, const std::pair<Enum, std::string_view> (&table)[N],
                 std::string_view what) {
  for (const auto& [value, label] : table) {
    if (label == s) return value;
  }
  throw ValidationError("unknown " + std::string(what) + " '" + std::string(s) + "'");
}

template <typename Enum, size_t N>
std::string_view label_of(Enum e, const std::pair<Enum, std::string_view> (&table)[N]) {
  for (const auto& [value, label] : table) {
    if (value == e) return label;
  }
  return "?";
}

constexpr std::pair<Modality, std::string_view> kModalities[] = {{Modality::text, "text"},
                                                                 {Modality::image, "image"}};
constexpr std::pair<Role, std::string_view> kRoles[] = {{Role::target, "target"},
                                                        {Role::attribute, "attribute"}};
constexpr std::pair<Pole, std::string_view> kPoles[] = {{Pole::first, "first"},
                                                        {Pole::second, "second"}};
constexpr std::pair<Category, std::string_view> kCategories[] = {
    {Category::flower_insect, "flower_insect"},
    {Category::instrument_weapon, "instrument_weapon"},
    {Category::gender, "gender"},
    {Category::race, "race"},
    {Category::age, "age"}};
constexpr std::pair<Variant, std::string_view> kVariants[] = {
    {Variant::names, "names"},
    {Variant::words, "words"},
    {Variant::image, "image"},
    {Variant::classic_attr, "classic_attr"},
    {Variant::controlled_attr, "controlled_attr"}};
constexpr std::pair<ModalityCombo, std::string_view> kCombos[] = {
    {ModalityCombo::all_image, "all_image"},
    {ModalityCombo::all_text, "all_text"},
    {ModalityCombo::image_as_target, "image_as_target"},
    {ModalityCombo::text_as_target, "text_as_target"}};
constexpr std::pair<AttrVariant, std::string_view> kAttrVariants[] = {
    {AttrVariant::classic, "classic"}, {AttrVariant::controlled, "controlled"}};

Variant attr_set_variant(AttrVariant v) {
  return v == AttrVariant::classic ? Variant::classic_attr : Variant::controlled_attr;
}

size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  size_t n = 0;
  for (size_t pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

json item_to_json(const StimulusItem& item) {
  json j = {{"id", item.id},
            {"modality", to_string(item.modality)},
            {"payload", item.payload},
            {"role", to_string(item.role)},
            {"pole", to_string(item.pole)},
            {"variant", to_string(item.variant)}};
  if (item.category) j["category"] = to_string(*item.category);
  if (!item.content_hash.empty()) j["sha256"] = item.content_hash;
  return j;
}

json set_to_json(const StimulusSet& set) {
  json j = {{"name", set.name},
            {"role", to_string(set.role)},
            {"pole", to_string(set.pole)},
            {"modality", to_string(set.modality)},
            {"variant", to_string(set.variant)},
            {"items", set.item_ids}};
  if (set.category) j["category"] = to_string(*set.category);
  return j;
}

std::string require_string(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_string()) {
    throw ValidationError("registry: " + where + " lacks string field '" + key + "'");
  }
  return j[key].get<std::string>();
}

}  // namespace

std::string_view to_string(Modality m) { return label_of(m, kModalities); }
std::string_view to_string(Role r) { return label_of(r, kRoles); }
std::string_view to_string(Pole p) { return label_of(p, kPoles); }
std::string_view to_string(Category c) { return label_of(c, kCategories); }
std::string_view to_string(Variant v) { return label_of(v, kVariants); }
std::string_view to_string(ModalityCombo m) { return label_of(m, kCombos); }
std::string_view to_string(AttrVariant v) { return label_of(v, kAttrVariants); }

Modality parse_modality(std::string_view s) { return parse_label(s, kModalities, "modality"); }
Role parse_role(std::string_view s) { return parse_label(s, kRoles, "role"); }
Pole parse_pole(std::string_view s) { return parse_label(s, kPoles, "pole"); }
Category parse_category(std::string_view s) { return parse_label(s, kCategories, "category"); }
Variant parse_variant(std::string_view s) { return parse_label(s, kVariants, "variant"); }
ModalityCombo parse_modality_combo(std::string_view s) {
  return parse_label(s, kCombos, "modality combination");
}
AttrVariant parse_attr_variant(std::string_view s) {
  return parse_label(s, kAttrVariants, "attribute variant");
}

ModalityCombo combo_for(Modality target, Modality attribute) {
  if (target == Modality::image) {
    return attribute == Modality::image ? ModalityCombo::all_image : ModalityCombo::image_as_target;
  }
  return attribute == Modality::text ? ModalityCombo::all_text : ModalityCombo::text_as_target;
}

// ---------------------------------------------------------------------------
// Registry

Registry::Registry(std::vector<StimulusItem> items, std::vector<StimulusSet> sets,
                   std::vector<std::string> templates)
    : items_(std::move(items)), sets_(std::move(sets)), templates_(std::move(templates)) {
  index();
}

void Registry::index() {
  item_index_.clear();
  set_index_.clear();
  for (size_t i = 0; i < items_.size(); ++i) item_index_.emplace(items_[i].id, i);
  for (size_t i = 0; i < sets_.size(); ++i) set_index_.emplace(sets_[i].name, i);
}

Registry Registry::load(const std::filesystem::path& dir) {
  const auto path = dir / "registry.json";
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ValidationError("registry: cannot parse " + path.string() + ": " + e.what());
  }
  std::vector<StimulusItem> items;
  std::vector<StimulusSet> sets;
  std::vector<std::string> templates;

  try {
    if (doc.contains("templates")) templates = doc["templates"].get<std::vector<std::string>>();
    for (const auto& j : doc.at("items")) {
      StimulusItem item;
      item.id = require_string(j, "id", "item");
      const std::string where = "item '" + item.id + "'";
      item.modality = parse_modality(require_string(j, "modality", where));
      item.payload = require_string(j, "payload", where);
      item.role = parse_role(require_string(j, "role", where));
      item.pole = parse_pole(require_string(j, "pole", where));
      item.variant = parse_variant(require_string(j, "variant", where));
      if (j.contains("category")) item.category = parse_category(require_string(j, "category", where));
      if (j.contains("sha256")) item.content_hash = require_string(j, "sha256", where);
      items.push_back(std::move(item));
    }
    for (const auto& j : doc.at("sets")) {
      StimulusSet set;
      set.name = require_string(j, "name", "set");
      const std::string where = "set '" + set.name + "'";
      set.role = parse_role(require_string(j, "role", where));
      set.pole = parse_pole(require_string(j, "pole", where));
      set.modality = parse_modality(require_string(j, "modality", where));
      set.variant = parse_variant(require_string(j, "variant", where));
      if (j.contains("category")) set.category = parse_category(require_string(j, "category", where));
      set.item_ids = j.at("items").get<std::vector<std::string>>();
      sets.push_back(std::move(set));
    }
  } catch (const json::exception& e) {
    throw ValidationError("registry: malformed " + path.string() + ": " + e.what());
  }

  Registry reg(std::move(items), std::move(sets), std::move(templates));
  reg.root_ = dir;
  return reg;
}

void Registry::save(const std::filesystem::path& dir) const {
  write_file_atomic(dir / "registry.json", manifest_text());
}

std::string Registry::manifest_text() const {
  json doc;
  doc["format"] = "xmeat-registry/1";
  doc["templates"] = templates_;
  doc["items"] = json::array();
  for (const auto& item : items_) doc["items"].push_back(item_to_json(item));
  doc["sets"] = json::array();
  for (const auto& set : sets_) doc["sets"].push_back(set_to_json(set));
  return doc.dump(2) + "\n";
}

std::string Registry::content_hash() const { return sha256_hex(manifest_text()); }

const StimulusItem& Registry::item(const std::string& id) const {
  auto it = item_index_.find(id);
  if (it == item_index_.end()) throw ValidationError("unknown stimulus id '" + id + "'");
  return items_[it->second];
}

const StimulusSet& Registry::set(const std::string& name) const {
  auto it = set_index_.find(name);
  if (it == set_index_.end()) throw ValidationError("unknown stimulus set '" + name + "'");
  return sets_[it->second];
}

const StimulusSet* Registry::find_target(Category c, Modality m, Variant v, Pole p) const {
  for (const auto& s : sets_) {
    if (s.role == Role::target && s.category == c && s.modality == m && s.variant == v &&
        s.pole == p) {
      return &s;
    }
  }
  return nullptr;
}

const StimulusSet* Registry::find_attribute(AttrVariant v, Modality m, Pole p) const {
  const Variant sv = attr_set_variant(v);
  for (const auto& s : sets_) {
    if (s.role == Role::attribute && s.modality == m && s.variant == sv && s.pole == p) return &s;
  }
  return nullptr;
}

std::vector<std::string> Registry::validate(bool check_files) const {
  std::vector<std::string> problems;
  std::set<std::string> seen;
  for (const auto& item : items_) {
    const std::string where = "item '" + item.id + "'";
    if (item.id.empty()) problems.push_back("item with empty id");
    if (!seen.insert(item.id).second) problems.push_back("duplicate item id '" + item.id + "'");
    if (item.payload.empty()) problems.push_back(where + ": empty payload");
    if (item.role == Role::attribute && item.category) {
      problems.push_back(where + ": attribute items must not carry a category");
    }
    if (item.role == Role::target && !item.category) {
      problems.push_back(where + ": target items need a category");
    }
    if (item.modality == Modality::image) {
      if (item.content_hash.empty()) {
        problems.push_back(where + ": image without content hash");
      } else if (check_files && !item.payload.empty()) {
        const auto path = root_ / item.payload;
        if (!std::filesystem::is_regular_file(path)) {
          problems.push_back(where + ": image file not found: " + path.string());
        } else if (sha256_file(path) != item.content_hash) {
          problems.push_back(where + ": content hash mismatch for " + path.string());
        }
      }
    }
  }

  for (const auto& tmpl : templates_) {
    if (count_occurrences(tmpl, kWordPlaceholder) != 1) {
      problems.push_back("malformed template '" + tmpl + "'");
    }
  }

  std::set<std::string> seen_sets;
  for (const auto& set : sets_) {
    const std::string where = "set '" + set.name + "'";
    if (!seen_sets.insert(set.name).second) problems.push_back("duplicate set name '" + set.name + "'");
    if (set.item_ids.empty()) problems.push_back(where + ": empty");
    if (set.role == Role::attribute && set.category) {
      problems.push_back(where + ": attribute sets must not carry a category");
    }
    for (const auto& id : set.item_ids) {
      auto it = item_index_.find(id);
      if (it == item_index_.end()) {
        problems.push_back(where + ": unknown item '" + id + "'");
        continue;
      }
      const auto& item = items_[it->second];
      if (item.modality != set.modality || item.role != set.role || item.pole != set.pole) {
        problems.push_back(where + ": item '" + id + "' disagrees on modality/role/pole");
      }
    }
    if (set.role == Role::attribute && set.variant == Variant::controlled_attr) {
      const size_t expected = set.modality == Modality::text
                                  ? kControlledWordsPerPole * 6
                                  : kControlledImagesPerPole;
      if (set.item_ids.size() != expected) {
        problems.push_back(where + ": controlled " + std::string(to_string(set.modality)) +
                           " attribute set has " + std::to_string(set.item_ids.size()) +
                           " items, expected " + std::to_string(expected));
      }
    }
  }
  return problems;
}

// ---------------------------------------------------------------------------
// Stimulus construction

ValenceSelection select_top_valence(const std::vector<LexiconRow>& rows, size_t k) {
  if (k == 0 || rows.empty() || k > rows.size() / 2) {
    throw ValidationError("lexicon too small: need 2*" + std::to_string(k) + " rows, have " +
                          std::to_string(rows.size()));
  }
  for (const auto& row : rows) {
    if (!std::isfinite(row.valence)) throw ValidationError("invalid rating for '" + row.term + "'");
  }
  std::vector<const LexiconRow*> order;
  order.reserve(rows.size());
  for (const auto& row : rows) order.push_back(&row);

  // Descending valence, ties by ascending term.
  auto by_valence_desc = [](const LexiconRow* l, const LexiconRow* r) {
    if (l->valence != r->valence) return l->valence > r->valence;
    return l->term < r->term;
  };
  // Ascending valence, ties by ascending term.
  auto by_valence_asc = [](const LexiconRow* l, const LexiconRow* r) {
    if (l->valence != r->valence) return l->valence < r->valence;
    return l->term < r->term;
  };

  ValenceSelection out;
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    by_valence_desc);
  for (size_t i = 0; i < k; ++i) out.pleasant.push_back(order[i]->term);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    by_valence_asc);
  for (size_t i = 0; i < k; ++i) out.unpleasant.push_back(order[i]->term);
  return out;
}

std::vector<StimulusItem> expand_templates(const std::vector<std::string>& words,
                                           const std::vector<std::string>& templates,
                                           const std::string& id_prefix, Pole pole,
                                           Variant variant) {
  for (const auto& tmpl : templates) {
    if (count_occurrences(tmpl, kWordPlaceholder) != 1) {
      throw ValidationError("malformed template '" + tmpl + "'");
    }
  }
  std::vector<StimulusItem> out;
  out.reserve(words.size() * templates.size());
  for (size_t w = 0; w < words.size(); ++w) {
    for (size_t t = 0; t < templates.size(); ++t) {
      std::string text = templates[t];
      text.replace(text.find(kWordPlaceholder), kWordPlaceholder.size(), words[w]);
      StimulusItem item;
      item.id = id_prefix + std::to_string(w) + "_t" + std::to_string(t);
      item.modality = Modality::text;
      item.payload = std::move(text);
      item.role = Role::attribute;
      item.pole = pole;
      item.variant = variant;
      out.push_back(std::move(item));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Test suite

namespace {

struct TargetSlot {
  Category category;
  Modality modality;
  Variant variant;
};

std::vector<TargetSlot> target_slots(Modality modality) {
  std::vector<TargetSlot> slots;
  if (modality == Modality::image) {
    for (Category c : kAllCategories) slots.push_back({c, Modality::image, Variant::image});
    return slots;
  }
  for (Category c : kAllCategories) {
    if (c == Category::flower_insect || c == Category::instrument_weapon) {
      slots.push_back({c, Modality::text, Variant::words});
    } else {
      slots.push_back({c, Modality::text, Variant::names});
      slots.push_back({c, Modality::text, Variant::words});
    }
  }
  return slots;
}

[[noreturn]] void missing(const std::string& what) {
  throw ValidationError("incomplete registry: missing " + what);
}

}  // namespace

std::vector<EatTestSpec> build_test_suite(const Registry& registry, AttrVariant variant) {
  struct ComboLayout {
    ModalityCombo combo;
    Modality target;
    Modality attribute;
  };
  constexpr ComboLayout layouts[] = {
      {ModalityCombo::all_image, Modality::image, Modality::image},
      {ModalityCombo::all_text, Modality::text, Modality::text},
      {ModalityCombo::image_as_target, Modality::image, Modality::text},
      {ModalityCombo::text_as_target, Modality::text, Modality::image},
  };

  std::vector<EatTestSpec> suite;
  for (const auto& layout : layouts) {
    const std::string attr_name = std::string(to_string(variant)) + "/" +
                                  std::string(to_string(layout.attribute)) + "/attribute";
    const auto* a = registry.find_attribute(variant, layout.attribute, Pole::first);
    if (!a) missing(attr_name + " (pleasant)");
    const auto* b = registry.find_attribute(variant, layout.attribute, Pole::second);
    if (!b) missing(attr_name + " (unpleasant)");

    for (const auto& slot : target_slots(layout.target)) {
      const std::string target_name = std::string(to_string(slot.category)) + "/" +
                                      std::string(to_string(slot.modality)) + "/target";
      const std::string qualifier =
          slot.modality == Modality::text ? "/" + std::string(to_string(slot.variant)) : "";
      const auto* x = registry.find_target(slot.category, slot.modality, slot.variant, Pole::first);
      if (!x) missing(target_name + qualifier + " (first pole)");
      const auto* y = registry.find_target(slot.category, slot.modality, slot.variant, Pole::second);
      if (!y) missing(target_name + qualifier + " (second pole)");

      EatTestSpec spec;
      spec.test_id = std::string(to_string(slot.category)) + "/" +
                     std::string(to_string(layout.combo)) + "/" +
                     std::string(to_string(slot.variant));
      spec.category = slot.category;
      spec.modality_combo = layout.combo;
      spec.attr_variant = variant;
      spec.x = x->name;
      spec.y = y->name;
      spec.a = a->name;
      spec.b = b->name;
      if (auto problems = check_test_spec(registry, spec); !problems.empty()) {
        throw ValidationError("invalid test " + spec.test_id + ": " + problems.front());
      }
      suite.push_back(std::move(spec));
    }
  }
  return suite;
}

std::vector<std::string> check_test_spec(const Registry& registry, const EatTestSpec& spec) {
  std::vector<std::string> problems;
  for (const auto* name : {&spec.x, &spec.y, &spec.a, &spec.b}) {
    if (!registry.has_set(*name)) problems.push_back("unknown set '" + *name + "'");
  }
  if (!problems.empty()) return problems;

  const auto& x = registry.set(spec.x);
  const auto& y = registry.set(spec.y);
  const auto& a = registry.set(spec.a);
  const auto& b = registry.set(spec.b);
  if (x.role != Role::target || y.role != Role::target) problems.push_back("X/Y must be target sets");
  if (a.role != Role::attribute || b.role != Role::attribute) {
    problems.push_back("A/B must be attribute sets");
  }
  if (x.modality != y.modality) problems.push_back("X and Y differ in modality");
  if (a.modality != b.modality) problems.push_back("A and B differ in modality");
  if (combo_for(x.modality, a.modality) != spec.modality_combo) {
    problems.push_back("modality combination does not match stimulus modalities");
  }
  if (x.item_ids.size() != y.item_ids.size()) problems.push_back("|X| != |Y|");
  if (x.pole != Pole::first || y.pole != Pole::second) {
    problems.push_back("X must be the congruent-positive group and Y the negative");
  }
  if (a.pole != Pole::first || b.pole != Pole::second) {
    problems.push_back("A must be pleasant and B unpleasant");
  }
  if (x.category != spec.category || y.category != spec.category) {
    problems.push_back("target category does not match test category");
  }
  const Variant av = attr_set_variant(spec.attr_variant);
  if (a.variant != av || b.variant != av) problems.push_back("attribute variant mismatch");
  return problems;
}

std::vector<std::string> referenced_ids(const Registry& registry, const EatTestSpec& spec) {
  std::vector<std::string> ids;
  for (const auto* name : {&spec.x, &spec.y, &spec.a, &spec.b}) {
    const auto& s = registry.set(*name);
    ids.insert(ids.end(), s.item_ids.begin(), s.item_ids.end());
  }
  return ids;
}

}  // namespace xmeat
