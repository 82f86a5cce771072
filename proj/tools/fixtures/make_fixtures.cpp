// Writes the synthetic fixture set used by the test suites: a registry with
// placeholder images, one embedding bundle per synthetic model with planted
// valence structure, models.csv, vtab.csv and a run configuration.
//
// usage: xmeat_make_fixtures <data dir> <output dir>

#include <cmath>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xmeat/embedding_store.hpp"
#include "xmeat/hash.hpp"
#include "xmeat/stimulus.hpp"
#include "xmeat/table.hpp"

namespace fs = std::filesystem;
using namespace xmeat;

namespace {

struct TargetList {
  Category category;
  Variant variant;
  std::vector<std::string> first;
  std::vector<std::string> second;
};

// Illustrative target lists; production registries ship the published
// SEAT/iEAT stimuli instead.
std::vector<TargetList> text_targets() {
  return {
      {Category::flower_insect, Variant::words,
       {"aster", "clover", "hyacinth", "marigold", "poppy", "azalea", "crocus", "iris", "orchid",
        "rose", "bluebell", "daffodil", "lilac", "pansy", "tulip", "buttercup", "daisy", "lily",
        "peony", "violet", "carnation", "gladiola", "magnolia", "petunia", "zinnia"},
       {"ant", "caterpillar", "flea", "locust", "spider", "bedbug", "centipede", "fly", "maggot",
        "tarantula", "bee", "cockroach", "gnat", "mosquito", "termite", "beetle", "cricket",
        "hornet", "moth", "wasp", "blackfly", "dragonfly", "horsefly", "roach", "weevil"}},
      {Category::instrument_weapon, Variant::words,
       {"bagpipe", "cello", "guitar", "lute", "trombone", "banjo", "clarinet", "harmonica",
        "mandolin", "trumpet", "bassoon", "drum", "harp", "oboe", "tuba", "bell", "fiddle",
        "harpsichord", "piano", "viola", "bongo", "flute", "horn", "saxophone", "violin"},
       {"arrow", "club", "gun", "missile", "spear", "axe", "dagger", "harpoon", "pistol", "sword",
        "blade", "dynamite", "hatchet", "rifle", "tank", "bomb", "firearm", "knife", "shotgun",
        "teargas", "cannon", "grenade", "mace", "slingshot", "whip"}},
      {Category::gender, Variant::names,
       {"Amy", "Joan", "Lisa", "Sarah", "Diana", "Kate", "Ann", "Donna"},
       {"John", "Paul", "Mike", "Kevin", "Steve", "Greg", "Jeff", "Bill"}},
      {Category::gender, Variant::words,
       {"female", "woman", "girl", "sister", "she", "her", "hers", "daughter"},
       {"male", "man", "boy", "brother", "he", "him", "his", "son"}},
      {Category::race, Variant::names,
       {"Brad", "Brendan", "Geoffrey", "Greg", "Brett", "Jay", "Matthew", "Neil", "Todd",
        "Allison", "Anne", "Carrie", "Emily", "Jill", "Laurie", "Kristen", "Meredith", "Sarah"},
       {"Darnell", "Hakim", "Jermaine", "Kareem", "Jamal", "Leroy", "Rasheed", "Tremayne",
        "Tyrone", "Aisha", "Ebony", "Keisha", "Kenya", "Latonya", "Lakisha", "Latoya", "Tamika",
        "Tanisha"}},
      {Category::race, Variant::words,
       {"European American", "White American", "Caucasian", "white person"},
       {"African American", "Black American", "Black", "black person"}},
      {Category::age, Variant::names,
       {"Tiffany", "Michelle", "Cindy", "Kristy", "Brad", "Eric", "Joey", "Billy"},
       {"Ethel", "Bernice", "Gertrude", "Agnes", "Cecil", "Wilbert", "Mortimer", "Edgar"}},
      {Category::age, Variant::words,
       {"young", "youth", "youthful", "teenager", "child", "kid", "adolescent", "juvenile"},
       {"old", "elderly", "aged", "senior", "retiree", "pensioner", "geriatric", "oldster"}},
  };
}

const std::vector<std::string> kClassicPleasant = {
    "caress", "freedom", "health", "love", "peace", "cheer", "friend", "heaven", "loyal",
    "pleasure", "diamond", "gentle", "honest", "lucky", "rainbow", "diploma", "gift", "honor",
    "miracle", "sunrise", "family", "happy", "laughter", "paradise", "vacation"};
const std::vector<std::string> kClassicUnpleasant = {
    "abuse", "crash", "filth", "murder", "sickness", "accident", "death", "grief", "poison",
    "stink", "assault", "disaster", "hatred", "pollute", "tragedy", "divorce", "jail", "poverty",
    "ugly", "cancer", "kill", "rotten", "vomit", "agony", "prison"};

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string slug(std::string s) {
  for (auto& c : s) {
    if (c == ' ') c = '_';
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return s;
}

// 8x8 binary PPM with pseudo-random pixels derived from the id.
std::string write_placeholder_image(const fs::path& root, const std::string& rel,
                                    const std::string& id) {
  const fs::path path = root / rel;
  fs::create_directories(path.parent_path());
  std::mt19937_64 rng(fnv1a(id));
  std::string bytes = "P6\n8 8\n255\n";
  for (int i = 0; i < 8 * 8 * 3; ++i) bytes.push_back(static_cast<char>(rng() & 0xFF));
  write_file_atomic(path, bytes);
  return sha256_file(path);
}

struct RegistryBuilder {
  fs::path root;
  std::vector<StimulusItem> items;
  std::vector<StimulusSet> sets;

  void add_set(StimulusSet set, std::vector<StimulusItem> new_items) {
    for (auto& item : new_items) {
      set.item_ids.push_back(item.id);
      items.push_back(std::move(item));
    }
    sets.push_back(std::move(set));
  }

  std::vector<StimulusItem> text_items(const std::string& prefix, const std::vector<std::string>& words,
                                       Role role, Pole pole, std::optional<Category> cat,
                                       Variant variant) {
    std::vector<StimulusItem> out;
    for (size_t i = 0; i < words.size(); ++i) {
      out.push_back({prefix + std::to_string(i), Modality::text, words[i], role, pole, cat, variant, ""});
    }
    return out;
  }

  std::vector<StimulusItem> image_items(const std::string& prefix, const std::vector<std::string>& labels,
                                        Role role, Pole pole, std::optional<Category> cat,
                                        Variant variant, const std::string& subdir) {
    std::vector<StimulusItem> out;
    for (size_t i = 0; i < labels.size(); ++i) {
      const std::string id = prefix + std::to_string(i);
      const std::string rel = "images/" + subdir + "/" + slug(labels[i]) + ".ppm";
      out.push_back({id, Modality::image, rel, role, pole, cat, variant,
                     write_placeholder_image(root, rel, id)});
    }
    return out;
  }
};

Registry build_registry(const fs::path& data_dir, const fs::path& root) {
  const auto controlled = nlohmann::json::parse(read_file(data_dir / "controlled_attributes.json"));
  const auto templates = controlled["templates"].get<std::vector<std::string>>();

  RegistryBuilder b{root, {}, {}};
  for (const auto& t : text_targets()) {
    const std::string base = std::string(to_string(t.category)) + "/text/" +
                             std::string(to_string(t.variant));
    const std::string prefix = "t_" + std::string(to_string(t.category)) + "_" +
                               std::string(to_string(t.variant));
    b.add_set({base + "/first", Role::target, Pole::first, Modality::text, t.category, t.variant, {}},
              b.text_items(prefix + "_first_", t.first, Role::target, Pole::first, t.category, t.variant));
    b.add_set({base + "/second", Role::target, Pole::second, Modality::text, t.category, t.variant, {}},
              b.text_items(prefix + "_second_", t.second, Role::target, Pole::second, t.category,
                           t.variant));
  }
  for (Category c : kAllCategories) {
    const std::string cat(to_string(c));
    for (Pole p : {Pole::first, Pole::second}) {
      const std::string pole(to_string(p));
      std::vector<std::string> labels;
      for (int i = 1; i <= 6; ++i) labels.push_back(cat + " " + pole + " " + std::to_string(i));
      b.add_set({cat + "/image/" + pole, Role::target, p, Modality::image, c, Variant::image, {}},
                b.image_items("i_" + cat + "_" + pole + "_", labels, Role::target, p, c,
                              Variant::image, "targets"));
    }
  }

  // Classic attributes.
  b.add_set({"attr/classic/text/first", Role::attribute, Pole::first, Modality::text, std::nullopt,
             Variant::classic_attr, {}},
            b.text_items("a_classic_text_first_", kClassicPleasant, Role::attribute, Pole::first,
                         std::nullopt, Variant::classic_attr));
  b.add_set({"attr/classic/text/second", Role::attribute, Pole::second, Modality::text, std::nullopt,
             Variant::classic_attr, {}},
            b.text_items("a_classic_text_second_", kClassicUnpleasant, Role::attribute, Pole::second,
                         std::nullopt, Variant::classic_attr));
  for (Pole p : {Pole::first, Pole::second}) {
    const std::string pole(to_string(p));
    std::vector<std::string> labels;
    for (int i = 1; i <= 8; ++i) labels.push_back("classic " + pole + " " + std::to_string(i));
    b.add_set({"attr/classic/image/" + pole, Role::attribute, p, Modality::image, std::nullopt,
               Variant::classic_attr, {}},
              b.image_items("a_classic_image_" + pole + "_", labels, Role::attribute, p,
                            std::nullopt, Variant::classic_attr, "classic"));
  }

  // Controlled attributes: template-expanded words and named valence images.
  for (Pole p : {Pole::first, Pole::second}) {
    const std::string pole(to_string(p));
    const auto words = controlled[p == Pole::first ? "pleasant_words" : "unpleasant_words"]
                           .get<std::vector<std::string>>();
    b.add_set({"attr/controlled/text/" + pole, Role::attribute, p, Modality::text, std::nullopt,
               Variant::controlled_attr, {}},
              expand_templates(words, templates, "a_controlled_text_" + pole + "_w", p,
                               Variant::controlled_attr));
    const auto images = controlled[p == Pole::first ? "pleasant_images" : "unpleasant_images"]
                            .get<std::vector<std::string>>();
    b.add_set({"attr/controlled/image/" + pole, Role::attribute, p, Modality::image, std::nullopt,
               Variant::controlled_attr, {}},
              b.image_items("a_controlled_image_" + pole + "_", images, Role::attribute, p,
                            std::nullopt, Variant::controlled_attr, "controlled"));
  }

  Registry reg(std::move(b.items), std::move(b.sets), templates);
  reg.save(root);
  return Registry::load(root);
}

struct SyntheticModel {
  std::string id;
  std::uint64_t params;
  std::string arch;
  std::string dataset;
  std::uint64_t dataset_size;
  double bias;  // planted congruent strength added to every target
};

const std::vector<SyntheticModel> kModels = {
    {"m01_rn50_cc12m", 102'000'000, "RN50", "cc12m", 12'000'000, 0.05},
    {"m02_vit_b32_cc12m", 151'000'000, "ViT-B-32", "cc12m", 12'000'000, 0.10},
    {"m03_vit_b32_laion400m", 151'000'000, "ViT-B-32", "laion400m_e32", 400'000'000, 0.30},
    {"m04_vit_l14_laion2b", 428'000'000, "ViT-L-14", "laion2b_s32b_b82k", 2'000'000'000, 0.35},
    {"m05_rn101_openai", 120'000'000, "RN101", "openai", 400'000'000, 0.30},
    {"m06_vit_b16_openai", 150'000'000, "ViT-B-16", "openai", 400'000'000, 0.35},
    {"m07_vit_b16_dfn2b", 150'000'000, "ViT-B-16", "dfn2b", 2'000'000'000, 0.60},
    {"m08_vit_h14_dfn5b", 986'000'000, "ViT-H-14", "dfn5b", 5'000'000'000, 0.70},
};

// Per-category baseline of the planted target valence.
double category_strength(Category c) {
  switch (c) {
    case Category::flower_insect:
      return 0.45;
    case Category::instrument_weapon:
      return 0.5;
    case Category::gender:
      return 0.1;
    case Category::race:
      return 0.05;
    case Category::age:
      return 0.0;
  }
  return 0.0;
}

EmbeddingBundle synth_bundle(const Registry& reg, const SyntheticModel& model, size_t dim) {
  std::mt19937_64 rng(fnv1a(model.id));
  std::normal_distribution<double> normal(0.0, 1.0);
  auto random_unit = [&] {
    std::vector<double> v(dim);
    double n = 0.0;
    for (auto& x : v) {
      x = normal(rng);
      n += x * x;
    }
    for (auto& x : v) x /= std::sqrt(n);
    return v;
  };
  const auto valence = random_unit();
  const auto text_offset = random_unit();
  const auto image_offset = random_unit();

  EmbeddingBundle bundle(model.id, dim);
  bundle.registry_hash = reg.content_hash();
  bundle.meta()["encoder"] = "synthetic";
  bundle.meta()["arch"] = model.arch;
  bundle.meta()["pretrained"] = model.dataset;

  for (const auto& item : reg.items()) {
    const double sign = item.pole == Pole::first ? 1.0 : -1.0;
    double strength;
    if (item.role == Role::attribute) {
      strength = 1.2;
    } else {
      strength = category_strength(*item.category) + model.bias;
      // Cross-model variation per (category, modality).
      strength += 0.15 * std::sin(static_cast<double>(fnv1a(model.id + std::string(to_string(*item.category)) +
                                                          std::string(to_string(item.modality))) %
                                                    1000));
    }
    const auto& offset = item.modality == Modality::text ? text_offset : image_offset;
    std::vector<float> v(dim);
    for (size_t k = 0; k < dim; ++k) {
      const double noise = 0.9 * normal(rng);
      v[k] = static_cast<float>(noise + sign * strength * valence[k] + 0.8 * offset[k]);
    }
    bundle.add(item.id, std::move(v));
  }
  return bundle;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 3) {
    std::cerr << "usage: xmeat_make_fixtures <data dir> <output dir>\n";
    return 2;
  }
  const fs::path data_dir = argv[1];
  const fs::path out = argv[2];
  const Registry reg = build_registry(data_dir, out / "registry");
  if (auto problems = reg.validate(); !problems.empty()) {
    for (const auto& p : problems) std::cerr << p << "\n";
    return 1;
  }

  Table models;
  models.header = {"model_id", "param_count", "arch_family", "dataset_family", "dataset_size"};
  Table vtab;
  vtab.header = {"model_id", "task", "score"};
  const std::vector<std::string> tasks = {"imagenet1k", "cifar10", "caltech101", "flickr30k_retrieval"};
  for (const auto& m : kModels) {
    write_bundle(synth_bundle(reg, m, 24), out / "bundles" / m.id);
    models.rows.push_back({m.id, std::to_string(m.params), m.arch, m.dataset, std::to_string(m.dataset_size)});
    for (size_t t = 0; t < tasks.size(); ++t) {
      const double score = 0.35 + 0.5 * m.bias + 0.05 * std::cos(static_cast<double>(fnv1a(m.id + tasks[t]) % 997));
      vtab.rows.push_back({m.id, tasks[t], format_real(std::round(score * 1e4) / 1e4)});
    }
  }
  write_csv_atomic(out / "models.csv", models);
  write_csv_atomic(out / "vtab.csv", vtab);

  nlohmann::ordered_json config = {{"registry", "registry"},
                                   {"bundles", "bundles"},
                                   {"models", "models.csv"},
                                   {"vtab", "vtab.csv"},
                                   {"families", "../../data/families.csv"},
                                   {"variant", "both"},
                                   {"permutation", {{"mode", "auto"}, {"seed", 20240801}, {"samples", 5000}}},
                                   {"std_dev", "population"},
                                   {"covariance", "diagonal"},
                                   {"grouping", "combo_category"},
                                   {"dataset_reference", "cc12m"},
                                   {"output", "out"}};
  write_file_atomic(out / "run_config.json", config.dump(2) + "\n");
  std::cout << "fixtures written to " << out.string() << "\n";
  return 0;
}
