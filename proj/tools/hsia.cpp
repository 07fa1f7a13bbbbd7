#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "hsia/hsia.hpp"
#include "hsia/verify.hpp"

namespace {

enum ExitCode { kOk = 0, kValidation = 1, kRuntime = 2, kVerification = 3 };

hsia::ExperimentConfig resolve(const std::string& path, const std::optional<std::string>& out,
                               const std::optional<std::uint64_t>& seed) {
  hsia::ExperimentConfig cfg = path.empty() ? hsia::parse_config(hsia::Json::object()) : hsia::load_config(path);
  if (out) cfg.output_dir = *out;
  if (seed) {
    cfg.seed = *seed;
    cfg.train.seed = cfg.shuffle_seed();
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial attacks on hyperspectral patch classifiers"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("--config", config_path, "experiment config (JSON)");
    if (config_required) opt->required();
    sub->add_option("--out", out_dir, "output directory, overrides output_dir");
    sub->add_option("--seed", seed, "global seed, overrides seed");
  };
  auto* gen = app.add_subcommand("generate", "synthesize the scene and its ground-truth map");
  auto* trn = app.add_subcommand("train", "fit PCA, extract patches and train the classifier");
  auto* atk = app.add_subcommand("attack", "run every configured attack over the test split");
  auto* rep = app.add_subcommand("report", "write results.csv and summary.txt");
  auto* ver = app.add_subcommand("verify", "run the oracle and finite-difference suite");
  for (auto* sub : {gen, trn, atk, rep}) add_common(sub, true);
  add_common(ver, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (ver->parsed()) {
      const auto report = hsia::run_verify(std::cout);
      std::cout << (report.all_passed() ? "all properties passed" : "verification FAILED") << "\n";
      return report.all_passed() ? kOk : kVerification;
    }
    const auto cfg = resolve(config_path, out_dir, seed);
    if (gen->parsed()) {
      const auto r = hsia::cmd_generate(cfg);
      std::cout << "scene " << r.scene.height() << "x" << r.scene.width() << "x" << r.scene.bands() << ", "
                << r.scene.num_classes() << " classes -> " << hsia::paths_for(cfg).scene().string() << "\n";
    } else if (trn->parsed()) {
      const auto r = hsia::cmd_train(cfg);
      std::cout << "final loss " << r.loss_history.back() << ", clean test OA " << r.clean_test.oa << " AA "
                << r.clean_test.aa << " kappa " << r.clean_test.kappa << "\n";
    } else if (atk->parsed()) {
      const auto r = hsia::cmd_attack(cfg);
      for (const auto& run : r.runs) {
        std::cout << run.name << ": OA " << hsia::overall_accuracy(run.matrix) << "\n";
      }
      for (const auto& f : r.audit_failures) std::cerr << "audit: " << f << "\n";
      if (!r.audit_failures.empty()) return kRuntime;
    } else if (rep->parsed()) {
      const auto rows = hsia::cmd_report(cfg);
      std::cout << rows.size() << " rows -> " << hsia::paths_for(cfg).results_csv().string() << "\n";
    }
  } catch (const hsia::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kValidation;
  } catch (const hsia::ArgumentError& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kOk;
}
