#pragma once

// The generate -> train -> attack -> report pipeline behind the CLI. Every
// stage is a deterministic function of the config; artifacts land in the
// output directory and a manifest per stage records the config hash and the
// CRC-32 of every file written.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hsia/attacks.hpp"
#include "hsia/config.hpp"
#include "hsia/cube_io.hpp"
#include "hsia/metrics.hpp"
#include "hsia/model_io.hpp"
#include "hsia/patches.hpp"
#include "hsia/pca.hpp"
#include "hsia/train.hpp"

namespace hsia {

namespace fs = std::filesystem;

struct PreparedData {
  PcaModel pca;
  ComponentScaling scaling;
  ReducedScene reduced;
  SplitIndices split;  // pixel indices, row-major
  PatchSet train;
  PatchSet test;
};

/// Stratified pixel split, PCA and scaling fitted on training pixels only,
/// then zero-padded patches for every pixel. Patch i is pixel i, so the
/// split indices address patches directly.
inline PreparedData prepare_data(const HsiScene& scene, const ExperimentConfig& cfg) {
  PreparedData d;
  d.split = stratified_split(scene.labels.labels, cfg.train_fraction, cfg.split_seed());
  d.pca = pca_fit(gather_spectra(scene, d.split.train), cfg.pca_components);
  d.reduced = pca_transform(d.pca, scene);
  d.scaling = fit_scaling(d.reduced, d.split.train);
  d.reduced = apply_scaling(d.scaling, std::move(d.reduced));
  const PatchSet all = extract_patches(d.reduced, cfg.patch_window);
  d.train = all.subset(d.split.train);
  d.test = all.subset(d.split.test);
  return d;
}

inline ModelContract contract_for(const ExperimentConfig& cfg) {
  return {cfg.pca_components, cfg.patch_window, cfg.patch_window};
}

struct Paths {
  fs::path root;

  fs::path scene() const { return root / "scene.hsc"; }
  fs::path ground_truth() const { return root / "ground_truth.ppm"; }
  fs::path model() const { return root / "model.hsam"; }
  fs::path loss_history() const { return root / "loss_history.csv"; }
  fs::path train_log() const { return root / "train_log.json"; }
  fs::path attacks() const { return root / "attacks"; }
  fs::path clean_dir() const { return attacks() / "clean"; }
  fs::path attack_dir(std::size_t index, AttackKind kind) const {
    std::ostringstream name;
    name << std::setw(2) << std::setfill('0') << index << '_' << to_string(kind);
    return attacks() / name.str();
  }
  fs::path results_csv() const { return root / "results.csv"; }
  fs::path summary_txt() const { return root / "summary.txt"; }
  fs::path manifest(const std::string& stage) const { return root / ("manifest_" + stage + ".json"); }
};

inline Paths paths_for(const ExperimentConfig& cfg) { return Paths{fs::path(cfg.output_dir)}; }

namespace detail {

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

inline std::string hex32(std::uint32_t v) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}

/// Records written files and emits the stage manifest.
class Manifest {
 public:
  Manifest(std::string stage, const ExperimentConfig& cfg) : stage_(std::move(stage)), cfg_(cfg) {}

  void write(const fs::path& path, std::span<const std::uint8_t> bytes) {
    write_file_bytes(path.string(), bytes);
    artifacts_[fs::relative(path, paths_for(cfg_).root).generic_string()] = hex32(crc32_of(bytes));
  }

  void write_text(const fs::path& path, const std::string& text) {
    write(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  }

  Json extra = Json::object();

  void finish() {
    Json j;
    j["stage"] = stage_;
    j["config_hash"] = config_hash(cfg_);
    j["config"] = to_json(cfg_);
    j["seeds"] = {{"global", cfg_.seed},
                  {"scene", cfg_.scene_seed()},
                  {"split", cfg_.split_seed()},
                  {"init", cfg_.init_seed()},
                  {"shuffle", cfg_.shuffle_seed()}};
    j["artifacts"] = artifacts_;
    if (!extra.empty()) j["details"] = extra;
    const std::string text = j.dump(2) + "\n";
    write_file_bytes(paths_for(cfg_).manifest(stage_).string(),
                     std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  }

 private:
  std::string stage_;
  const ExperimentConfig& cfg_;
  std::map<std::string, std::string> artifacts_;
};

inline std::string format_double(double v, int digits = 6) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << v;
  return out.str();
}

inline void require_file(const fs::path& p, const char* produced_by) {
  if (!fs::exists(p)) throw IoError("missing " + p.string() + " (run `hsia " + produced_by + "` first)");
}

inline Json confusion_json(const ConfusionMatrix& m) {
  Json rows = Json::array();
  for (std::size_t i = 0; i < m.classes(); ++i) {
    Json row = Json::array();
    for (std::size_t j = 0; j < m.classes(); ++j) row.push_back(m.at(i, j));
    rows.push_back(row);
  }
  return rows;
}

inline ConfusionMatrix confusion_from_json(const Json& rows) {
  const std::size_t c = rows.size();
  std::vector<std::uint64_t> counts;
  for (const auto& row : rows) {
    if (row.size() != c) throw ConfigError("confusion matrix in summary is not square");
    for (const auto& v : row) counts.push_back(v.get<std::uint64_t>());
  }
  return ConfusionMatrix::from_counts(c, std::move(counts));
}

/// Perturbations of N patches ([K, h, w] each) as an .hsc cube with H = N,
/// W = h * w, D = K, one label row per patch.
inline CubeFile perturbation_cube(const std::vector<Perturbation>& perts, const PatchSet& patches,
                                  std::size_t classes, const ModelContract& contract) {
  const std::size_t k = contract.components, hw = contract.height * contract.width;
  CubeFile f{perts.size(), hw, k, classes, std::vector<float>(perts.size() * hw * k), {}};
  f.labels.reserve(perts.size() * hw);
  for (std::size_t n = 0; n < perts.size(); ++n) {
    const Tensor& d = perts[n].delta;
    for (std::size_t p = 0; p < hw; ++p)
      for (std::size_t c = 0; c < k; ++c) f.values[(n * hw + p) * k + c] = d[c * hw + p];
    f.labels.insert(f.labels.end(), hw, patches.labels[n]);
  }
  return f;
}

}  // namespace detail

struct GenerateResult {
  HsiScene scene;
  std::string config_hash;
};

inline GenerateResult cmd_generate(const ExperimentConfig& cfg) {
  const Paths paths = paths_for(cfg);
  detail::ensure_dir(paths.root);
  HsiScene scene = generate_scene(make_recipe(cfg));
  detail::Manifest manifest("generate", cfg);
  manifest.write(paths.scene(), encode_cube(to_cube_file(scene)));
  const std::string hash = config_hash(cfg);
  manifest.write(paths.ground_truth(), render_class_map(scene.labels, palette_for(cfg, scene.num_classes()),
                                                        "hsia ground truth config " + hash));
  std::vector<std::uint64_t> counts(scene.num_classes(), 0);
  for (ClassId l : scene.labels.labels) ++counts[l];
  manifest.extra["class_names"] = scene.class_names;
  manifest.extra["class_pixel_counts"] = counts;
  manifest.finish();
  return {std::move(scene), hash};
}

struct TrainSummary {
  PatchClassifier model;
  std::vector<double> loss_history;
  MetricsReport clean_test;
};

inline TrainSummary cmd_train(const ExperimentConfig& cfg) {
  const Paths paths = paths_for(cfg);
  detail::require_file(paths.scene(), "generate");
  const HsiScene scene = read_cube(paths.scene().string());
  const PreparedData data = prepare_data(scene, cfg);
  PatchClassifier model = make_reference_classifier(contract_for(cfg), scene.num_classes(), cfg.init_seed());
  TrainResult trained = train(std::move(model), data.train, cfg.train);

  std::vector<ClassId> pred;
  for (const auto& p : data.test.patches) pred.push_back(trained.model.predict(p));
  const auto m = confusion(data.test.labels, pred, scene.num_classes());
  MetricsReport report = lesion_report(m, {}, cfg.lesion_class);

  detail::Manifest manifest("train", cfg);
  manifest.write(paths.model(), encode_model(trained.model));
  std::ostringstream csv;
  csv << "epoch,mean_loss\n";
  for (std::size_t e = 0; e < trained.loss_history.size(); ++e) {
    csv << e << ',' << detail::format_double(trained.loss_history[e], 8) << '\n';
  }
  manifest.write_text(paths.loss_history(), csv.str());
  Json log;
  log["config_hash"] = config_hash(cfg);
  log["clean_test"] = {{"oa", report.oa}, {"aa", report.aa}, {"kappa", report.kappa},
                       {"lesion_accuracy", report.lesion_accuracy}, {"confusion", detail::confusion_json(m)}};
  log["train_patches"] = data.train.size();
  log["test_patches"] = data.test.size();
  log["pca_explained_variance"] = std::vector<float>(data.pca.explained_variance.values().begin(),
                                                     data.pca.explained_variance.values().end());
  manifest.write_text(paths.train_log(), log.dump(2) + "\n");
  manifest.finish();
  return {std::move(trained.model), std::move(trained.loss_history), std::move(report)};
}

struct AttackRun {
  std::string name;  // "clean" or the attack kind
  AttackKind kind = AttackKind::None;
  SceneAttackResult result;
  ConfusionMatrix matrix;
};

struct AttackSummary {
  std::vector<AttackRun> runs;  // clean first, then configured attacks in order
  std::vector<std::string> audit_failures;
};

/// Attacks every test patch with each configured attack and writes prediction
/// maps, perturbation cubes and a per-attack summary. Combined attacks also
/// persist both constituents, and the stored sum is re-read and audited.
inline AttackSummary cmd_attack(const ExperimentConfig& cfg) {
  const Paths paths = paths_for(cfg);
  detail::require_file(paths.scene(), "generate");
  detail::require_file(paths.model(), "train");
  const HsiScene scene = read_cube(paths.scene().string());
  const PatchClassifier model = load_model(paths.model().string(), contract_for(cfg), scene.num_classes());
  const PreparedData data = prepare_data(scene, cfg);
  const std::size_t classes = scene.num_classes();
  const auto palette = palette_for(cfg, classes);
  const std::string hash = config_hash(cfg);

  detail::Manifest manifest("attack", cfg);
  AttackSummary summary;

  auto emit = [&](const fs::path& dir, const std::string& name, std::size_t index, AttackKind kind,
                  SceneAttackResult result) {
    detail::ensure_dir(dir);
    const auto m = confusion(result.truth, result.adv_pred, classes);
    manifest.write(dir / "predictions.ppm",
                   render_class_map(result.adv_map, palette, "hsia " + name + " predictions config " + hash));
    if (kind != AttackKind::None) {
      manifest.write(dir / "perturbation.hsc",
                     encode_cube(detail::perturbation_cube(result.perturbations, data.test, classes, model.contract())));
    }
    if (kind == AttackKind::Combined) {
      const fs::path local = dir / "perturbation_local.hsc", multi = dir / "perturbation_multiscale.hsc";
      manifest.write(local, encode_cube(detail::perturbation_cube(result.local, data.test, classes, model.contract())));
      manifest.write(multi,
                     encode_cube(detail::perturbation_cube(result.multiscale, data.test, classes, model.contract())));
      const CubeFile total = read_cube_file((dir / "perturbation.hsc").string());
      const CubeFile a = read_cube_file(local.string()), b = read_cube_file(multi.string());
      for (std::size_t i = 0; i < total.values.size(); ++i) {
        if (total.values[i] != a.values[i] + b.values[i]) {
          summary.audit_failures.push_back(name + ": stored combined perturbation differs from the sum of its parts at value " +
                                           std::to_string(i));
          break;
        }
      }
    }
    Json s;
    s["attack"] = name;
    s["index"] = index;
    s["config_hash"] = hash;
    s["confusion"] = detail::confusion_json(m);
    s["budget"] = {{"l0", result.total.l0}, {"l2", result.total.l2}, {"linf", result.total.linf}};
    s["patches"] = result.truth.size();
    s["failures"] = result.failures;
    manifest.write_text(dir / "summary.json", s.dump(2) + "\n");
    summary.runs.push_back({name, kind, std::move(result), m});
  };

  emit(paths.clean_dir(), "clean", 0,
       AttackKind::None, attack_scene(data.test, scene.height(), scene.width(), model, AttackConfig{}, AttackKind::None));
  for (std::size_t i = 0; i < cfg.attacks.size(); ++i) {
    const auto& a = cfg.attacks[i];
    emit(paths.attack_dir(i + 1, a.kind), to_string(a.kind), i + 1, a.kind,
         attack_scene(data.test, scene.height(), scene.width(), model, a.config, a.kind));
  }
  manifest.extra["audit_failures"] = summary.audit_failures;
  manifest.finish();
  return summary;
}

struct ReportRow {
  std::string attack;
  MetricsReport metrics;
};

/// Reads every attack summary and writes results.csv (one row per run,
/// clean first, then configured order) and a plain-text summary.
inline std::vector<ReportRow> cmd_report(const ExperimentConfig& cfg) {
  const Paths paths = paths_for(cfg);
  std::vector<fs::path> needed{paths.clean_dir() / "summary.json"};
  for (std::size_t i = 0; i < cfg.attacks.size(); ++i) {
    needed.push_back(paths.attack_dir(i + 1, cfg.attacks[i].kind) / "summary.json");
  }
  std::vector<std::string> missing;
  for (const auto& p : needed) {
    if (!fs::exists(p)) missing.push_back(p.string());
  }
  if (!missing.empty()) {
    std::string msg = "missing attack artifacts (run `hsia attack` first):";
    for (const auto& m : missing) msg += "\n  " + m;
    throw IoError(msg);
  }

  const std::string hash = config_hash(cfg);
  std::vector<ReportRow> rows;
  std::vector<std::string> class_names;
  for (const auto& p : needed) {
    std::ifstream in(p);
    const Json s = Json::parse(in);
    const ConfusionMatrix m = detail::confusion_from_json(s.at("confusion"));
    PerturbationBudget b{s.at("budget").at("l0").get<std::uint64_t>(), s.at("budget").at("l2").get<double>(),
                         s.at("budget").at("linf").get<double>()};
    rows.push_back({s.at("attack").get<std::string>(), lesion_report(m, b, cfg.lesion_class)});
    if (class_names.empty()) class_names = default_class_names(m.classes());
  }

  std::ostringstream csv;
  csv << "model,attack,config_hash";
  for (const auto& n : class_names) csv << ',' << n;
  csv << ",OA,AA,KAPPA,L0,L2,LINF,lesion_class,lesion_accuracy\n";
  auto opt = [](const std::optional<double>& v) { return v ? detail::format_double(*v) : std::string("NA"); };
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    csv << "patch_cnn," << r.attack << ',' << hash;
    for (const auto& pc : m.per_class) csv << ',' << opt(pc);
    csv << ',' << detail::format_double(m.oa) << ',' << detail::format_double(m.aa) << ','
        << detail::format_double(m.kappa) << ',' << m.budget.l0 << ',' << detail::format_double(m.budget.l2) << ','
        << detail::format_double(m.budget.linf) << ',' << class_names.at(m.lesion_class) << ','
        << detail::format_double(m.lesion_accuracy) << '\n';
  }

  std::ostringstream txt;
  txt << "config " << hash << "\n";
  txt << "lesion class: " << class_names.at(cfg.lesion_class) << "\n\n";
  const double clean_lesion = rows.front().metrics.lesion_accuracy;
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    txt << std::left << std::setw(10) << r.attack << " OA " << detail::format_double(m.oa, 4) << "  AA "
        << detail::format_double(m.aa, 4) << "  kappa " << detail::format_double(m.kappa, 4) << "  lesion acc "
        << detail::format_double(m.lesion_accuracy, 4) << " (drop "
        << detail::format_double(100.0 * (clean_lesion - m.lesion_accuracy), 1) << " pp)  L0 " << m.budget.l0
        << "  L2 " << detail::format_double(m.budget.l2, 3) << "\n";
  }

  detail::Manifest manifest("report", cfg);
  manifest.write_text(paths.results_csv(), csv.str());
  manifest.write_text(paths.summary_txt(), txt.str());
  manifest.finish();
  return rows;
}

}  // namespace hsia
