#pragma once

// Experiment configuration: one JSON document shared by every subcommand.
//
// {
//   "seed": 42,
//   "output_dir": "hsia_out",
//   "scene": {"preset": "brain" | "mdc", "height": 64, "width": 64, "bands": 60,
//             "noise_sigma": 0.05, "recipe_file": "optional/path.json"},
//   "pca_components": 20, "patch_window": 11, "train_fraction": 0.8,
//   "train": {"learning_rate": 0.02, "epochs": 8, "batch_size": 16, "l2_weight_decay": 0},
//   "attacks": [{"kind": "lpda" | "mia" | "combined" | "baseline" | "none",
//                "epsilon": 0.03, "iterations": 20, "window": 3, "scales": [1, 2, 4],
//                "mia_mode": "residual" | "literal",
//                "direction": "untargeted" | "targeted", "target_class": null}],
//   "lesion_class": 1,
//   "palette": [[r, g, b], ...]
// }
//
// Missing keys take the defaults above; unknown keys are rejected.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "hsia/attacks.hpp"
#include "hsia/binary_io.hpp"
#include "hsia/cube_io.hpp"
#include "hsia/errors.hpp"
#include "hsia/scene.hpp"
#include "hsia/train.hpp"

namespace hsia {

using Json = nlohmann::json;

struct SceneSection {
  std::string preset = "brain";
  std::optional<std::string> recipe_file;
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t bands = 60;
  double noise_sigma = 0.05;
};

struct AttackEntry {
  AttackKind kind = AttackKind::Combined;
  AttackConfig config;
};

struct ExperimentConfig {
  std::uint64_t seed = 42;
  std::string output_dir = "hsia_out";
  SceneSection scene;
  std::size_t pca_components = 20;
  std::size_t patch_window = 11;
  double train_fraction = 0.8;
  TrainConfig train;
  std::vector<AttackEntry> attacks;
  ClassId lesion_class = 1;
  std::optional<std::vector<Rgb>> palette;

  // Seeds for each stage, all derived from the global seed.
  std::uint64_t scene_seed() const { return seed; }
  std::uint64_t split_seed() const { return seed + 1; }
  std::uint64_t init_seed() const { return seed + 2; }
  std::uint64_t shuffle_seed() const { return seed + 3; }
};

/// Attack list used when a config does not name one: the four attacks at
/// their default settings.
inline std::vector<AttackEntry> default_attacks() {
  return {{AttackKind::Lpda, {}}, {AttackKind::Mia, {}}, {AttackKind::Combined, {}}, {AttackKind::Baseline, {}}};
}

namespace detail {

inline void reject_unknown(const Json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

template <typename T>
void read_key(const Json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

inline AttackEntry parse_attack(const Json& j, std::size_t index) {
  const std::string where = "attacks[" + std::to_string(index) + "]";
  reject_unknown(j, {"kind", "epsilon", "iterations", "window", "scales", "mia_mode", "direction", "target_class",
                     "clip"},
                 where);
  AttackEntry e;
  std::string kind = "combined", mode = "residual", direction = "untargeted";
  read_key(j, "kind", kind, where);
  read_key(j, "mia_mode", mode, where);
  read_key(j, "direction", direction, where);
  try {
    e.kind = parse_attack_kind(kind);
  } catch (const ArgumentError& err) {
    throw ConfigError(where + ": " + err.what());
  }
  read_key(j, "epsilon", e.config.epsilon, where);
  read_key(j, "iterations", e.config.iterations, where);
  read_key(j, "window", e.config.window, where);
  read_key(j, "scales", e.config.scales, where);
  if (j.contains("target_class") && !j.at("target_class").is_null()) {
    e.config.target_class = j.at("target_class").get<ClassId>();
  }
  if (j.contains("clip")) {
    auto clip = j.at("clip").get<std::vector<float>>();
    if (clip.size() != 2) throw ConfigError(where + ".clip must be [lo, hi]");
    e.config.clip_lo = clip[0];
    e.config.clip_hi = clip[1];
  }
  if (mode == "residual") e.config.mia_mode = MiaMode::Residual;
  else if (mode == "literal") e.config.mia_mode = MiaMode::Literal;
  else throw ConfigError(where + ".mia_mode must be 'residual' or 'literal'");
  if (direction == "untargeted") e.config.direction = Direction::Untargeted;
  else if (direction == "targeted") e.config.direction = Direction::Targeted;
  else throw ConfigError(where + ".direction must be 'untargeted' or 'targeted'");
  try {
    e.config.validate();
  } catch (const ArgumentError& err) {
    throw ConfigError(where + ": " + err.what());
  }
  return e;
}

}  // namespace detail

/// Number of classes the configured scene will have.
inline std::size_t configured_class_count(const ExperimentConfig& cfg);

/// Parses and validates a config document. `base_dir` resolves relative
/// recipe paths.
inline ExperimentConfig parse_config(const Json& j, const std::filesystem::path& base_dir = {}) {
  detail::reject_unknown(j, {"seed", "output_dir", "scene", "pca_components", "patch_window", "train_fraction",
                             "train", "attacks", "lesion_class", "palette"},
                         "config");
  ExperimentConfig cfg;
  detail::read_key(j, "seed", cfg.seed, "config");
  detail::read_key(j, "output_dir", cfg.output_dir, "config");
  detail::read_key(j, "pca_components", cfg.pca_components, "config");
  detail::read_key(j, "patch_window", cfg.patch_window, "config");
  detail::read_key(j, "train_fraction", cfg.train_fraction, "config");
  detail::read_key(j, "lesion_class", cfg.lesion_class, "config");

  if (j.contains("scene")) {
    const Json& s = j.at("scene");
    detail::reject_unknown(s, {"preset", "recipe_file", "height", "width", "bands", "noise_sigma"}, "scene");
    detail::read_key(s, "preset", cfg.scene.preset, "scene");
    detail::read_key(s, "height", cfg.scene.height, "scene");
    detail::read_key(s, "width", cfg.scene.width, "scene");
    detail::read_key(s, "bands", cfg.scene.bands, "scene");
    detail::read_key(s, "noise_sigma", cfg.scene.noise_sigma, "scene");
    if (s.contains("recipe_file")) {
      std::filesystem::path p = s.at("recipe_file").get<std::string>();
      if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
      if (!std::filesystem::exists(p)) throw ConfigError("scene recipe file " + p.string() + " does not exist");
      cfg.scene.recipe_file = p.string();
    }
  }
  if (cfg.scene.preset != "brain" && cfg.scene.preset != "mdc") {
    throw ConfigError("scene.preset must be 'brain' or 'mdc'");
  }
  if (j.contains("train")) {
    const Json& t = j.at("train");
    detail::reject_unknown(t, {"learning_rate", "epochs", "batch_size", "l2_weight_decay"}, "train");
    detail::read_key(t, "learning_rate", cfg.train.learning_rate, "train");
    detail::read_key(t, "epochs", cfg.train.epochs, "train");
    detail::read_key(t, "batch_size", cfg.train.batch_size, "train");
    detail::read_key(t, "l2_weight_decay", cfg.train.l2_weight_decay, "train");
  }
  cfg.train.seed = cfg.shuffle_seed();
  try {
    cfg.train.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("train: ") + e.what());
  }
  if (j.contains("attacks")) {
    const Json& a = j.at("attacks");
    if (!a.is_array()) throw ConfigError("attacks must be an array");
    for (std::size_t i = 0; i < a.size(); ++i) cfg.attacks.push_back(detail::parse_attack(a[i], i));
  } else {
    cfg.attacks = default_attacks();
  }
  if (j.contains("palette")) {
    std::vector<Rgb> palette;
    for (const auto& c : j.at("palette")) {
      auto v = c.get<std::vector<int>>();
      if (v.size() != 3) throw ConfigError("palette entries must be [r, g, b]");
      palette.push_back(Rgb{static_cast<std::uint8_t>(v[0]), static_cast<std::uint8_t>(v[1]),
                            static_cast<std::uint8_t>(v[2])});
    }
    cfg.palette = palette;
  }

  if (cfg.pca_components == 0) throw ConfigError("pca_components must be positive");
  if (cfg.patch_window == 0 || cfg.patch_window % 2 == 0) throw ConfigError("patch_window must be odd");
  if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0,1)");
  const std::size_t classes = configured_class_count(cfg);
  if (cfg.lesion_class >= classes) throw ConfigError("lesion_class out of range");
  for (const auto& a : cfg.attacks) {
    if (a.config.target_class && *a.config.target_class >= classes) {
      throw ConfigError("attack target_class out of range");
    }
  }
  if (cfg.palette && cfg.palette->size() < classes) throw ConfigError("palette has fewer entries than classes");
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  return parse_config(j, std::filesystem::path(path).parent_path());
}

/// Fully-expanded config, every default filled in. Keys serialise in sorted
/// order, so the dump is independent of the source file's key order.
inline Json to_json(const ExperimentConfig& cfg) {
  Json j;
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir;
  Json s;
  s["preset"] = cfg.scene.preset;
  s["height"] = cfg.scene.height;
  s["width"] = cfg.scene.width;
  s["bands"] = cfg.scene.bands;
  s["noise_sigma"] = cfg.scene.noise_sigma;
  if (cfg.scene.recipe_file) s["recipe_file"] = *cfg.scene.recipe_file;
  j["scene"] = s;
  j["pca_components"] = cfg.pca_components;
  j["patch_window"] = cfg.patch_window;
  j["train_fraction"] = cfg.train_fraction;
  j["train"] = {{"learning_rate", cfg.train.learning_rate},
                {"epochs", cfg.train.epochs},
                {"batch_size", cfg.train.batch_size},
                {"l2_weight_decay", cfg.train.l2_weight_decay}};
  Json attacks = Json::array();
  for (const auto& a : cfg.attacks) {
    Json e;
    e["kind"] = to_string(a.kind);
    e["epsilon"] = a.config.epsilon;
    e["iterations"] = a.config.iterations;
    e["window"] = a.config.window;
    e["scales"] = a.config.scales;
    e["mia_mode"] = a.config.mia_mode == MiaMode::Residual ? "residual" : "literal";
    e["direction"] = a.config.direction == Direction::Untargeted ? "untargeted" : "targeted";
    e["target_class"] = a.config.target_class ? Json(*a.config.target_class) : Json(nullptr);
    e["clip"] = {a.config.clip_lo, a.config.clip_hi};
    attacks.push_back(e);
  }
  j["attacks"] = attacks;
  j["lesion_class"] = cfg.lesion_class;
  if (cfg.palette) {
    Json p = Json::array();
    for (const auto& c : *cfg.palette) p.push_back({c[0], c[1], c[2]});
    j["palette"] = p;
  }
  return j;
}

/// CRC-32 of the canonical config dump, as 8 hex digits. The output directory
/// is left out so relocating an experiment keeps its hash.
inline std::string config_hash(const ExperimentConfig& cfg) {
  Json j = to_json(cfg);
  j.erase("output_dir");
  const std::string dump = j.dump();
  const auto crc = crc32_of(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(dump.data()), dump.size()));
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", crc);
  return buf;
}

/// Recipe from a standalone JSON file with explicit prototypes:
/// {"height", "width", "bands", "noise_sigma", "fill_class",
///  "classes": [{"name", "prototype": [...], "blobs": {"count", "radius_min", "radius_max", "host"}}]}
inline SceneRecipe load_recipe_file(const std::string& path, std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open recipe " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("recipe " + path + " is not valid JSON: " + e.what());
  }
  SceneRecipe r;
  r.seed = seed;
  try {
    r.height = j.at("height").get<std::size_t>();
    r.width = j.at("width").get<std::size_t>();
    r.bands = j.at("bands").get<std::size_t>();
    r.noise_sigma = j.value("noise_sigma", 0.0);
    r.fill_class = j.value("fill_class", ClassId{0});
    for (const auto& c : j.at("classes")) {
      ClassRecipe cr;
      cr.name = c.at("name").get<std::string>();
      cr.prototype = c.at("prototype").get<std::vector<float>>();
      if (c.contains("blobs")) {
        const auto& b = c.at("blobs");
        cr.blobs.count = b.value("count", std::size_t{0});
        cr.blobs.radius_min = b.value("radius_min", 1.0);
        cr.blobs.radius_max = b.value("radius_max", cr.blobs.radius_min);
        if (b.contains("host") && !b.at("host").is_null()) cr.blobs.host = b.at("host").get<ClassId>();
      }
      r.classes.push_back(cr);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("recipe " + path + ": " + e.what());
  }
  try {
    r.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError("recipe " + path + ": " + e.what());
  }
  return r;
}

inline SceneRecipe make_recipe(const ExperimentConfig& cfg) {
  if (cfg.scene.recipe_file) return load_recipe_file(*cfg.scene.recipe_file, cfg.scene_seed());
  const auto& s = cfg.scene;
  if (s.preset == "mdc") return mdc_recipe(cfg.scene_seed(), s.height, s.width, s.bands, s.noise_sigma);
  return brain_recipe(cfg.scene_seed(), s.height, s.width, s.bands, s.noise_sigma);
}

inline std::size_t configured_class_count(const ExperimentConfig& cfg) { return make_recipe(cfg).classes.size(); }

inline std::vector<Rgb> palette_for(const ExperimentConfig& cfg, std::size_t classes) {
  return cfg.palette ? *cfg.palette : default_palette(classes);
}

}  // namespace hsia
