// Experiment runner for the adversarial-training lab: dataset generation,
// training with pluggable label strategies, attacks and transfer evaluation,
// ablation and noise-sweep grids, theory checks, and plot-ready exports.

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "sglr/runner.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitMissingInput = 2;
constexpr int kExitDivergence = 3;

sglr::ExperimentConfig load_config(const std::string& path,
                                   const std::vector<std::string>& overrides) {
  sglr::ExperimentConfig cfg =
      path.empty() ? sglr::ExperimentConfig{} : sglr::parse_config_file(path);
  for (const std::string& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("--set expects key=value, got " + kv);
    }
    sglr::apply_config_key(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

std::vector<double> parse_double_list(const std::string& csv) {
  std::vector<double> out;
  for (const std::string& item : sglr::detail::split_list(csv, ',')) {
    out.push_back(std::stod(item));
  }
  if (out.empty()) throw std::invalid_argument("empty list: " + csv);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"self-guided label refinement lab"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string run_dir, source_dir, target_dir, out_path, checkpoint = "final";
  std::string selector = "all";
  std::string r_list = "0.0,0.2,0.4,0.6,0.8";
  std::string t_list = "1.0,1.5,2.0";
  std::string eta_list = "0.0,0.2,0.4";
  std::string strategies = "hard,uniform_ls,sglr";
  std::uint64_t theory_seed = 20240501;
  double eps = 0.05, step = 0.0125;
  int iters = 10;
  bool random_start = false;

  auto add_config_opts = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "config file (key=value or JSON)");
    cmd->add_option("--set", overrides, "override: key=value (repeatable)");
  };

  CLI::App* gen = app.add_subcommand("gen-data", "generate train/test CSVs");
  add_config_opts(gen);

  CLI::App* tr = app.add_subcommand("train", "train one model into out_dir");
  add_config_opts(tr);

  CLI::App* ev = app.add_subcommand("eval", "evaluate a stored checkpoint");
  ev->add_option("--run", run_dir, "run directory")->required();
  ev->add_option("--checkpoint", checkpoint, "best | final");

  CLI::App* at = app.add_subcommand("attack", "craft and export adversarial examples");
  at->add_option("--run", run_dir, "run directory")->required();
  at->add_option("--checkpoint", checkpoint, "best | final");
  at->add_option("--out", out_path, "output CSV path")->required();

  CLI::App* ab = app.add_subcommand("ablate", "smoothing x temperature grid");
  add_config_opts(ab);
  ab->add_option("--r", r_list, "comma list of smoothing levels");
  ab->add_option("--temperature", t_list, "comma list of temperatures");

  CLI::App* ns = app.add_subcommand("noise-sweep", "label-noise sweep per strategy");
  add_config_opts(ns);
  ns->add_option("--eta", eta_list, "comma list of noise rates");
  ns->add_option("--strategies", strategies, "comma list of label strategies");

  CLI::App* tf = app.add_subcommand("transfer", "black-box transfer evaluation");
  tf->add_option("--source", source_dir, "source run directory")->required();
  tf->add_option("--target", target_dir, "target run directory")->required();
  tf->add_option("--eps", eps, "attack radius");
  tf->add_option("--step", step, "attack step size");
  tf->add_option("--iters", iters, "attack iterations");
  tf->add_flag("--random-start", random_start, "random start inside the ball");

  CLI::App* th = app.add_subcommand("theory-check", "numerical identity checks");
  th->add_option("--select", selector,
                 "all | prop1 | prop2 | log_sum | noise_risk | xent | iiw");
  th->add_option("--seed", theory_seed, "trial seed");
  th->add_option("--out", out_path, "write the JSON report here too");

  CLI::App* ex = app.add_subcommand("export-plots", "plot-ready CSVs from a run");
  ex->add_option("--run", run_dir, "run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const sglr::ExperimentConfig cfg = load_config(config_path, overrides);
      sglr::validate(cfg);
      const auto [train_csv, test_csv] = sglr::run_gen_data(cfg);
      std::printf("wrote %s and %s\n", train_csv.c_str(), test_csv.c_str());
    } else if (tr->parsed()) {
      const sglr::ExperimentConfig cfg = load_config(config_path, overrides);
      const sglr::RunOutput out = sglr::run_train(cfg);
      if (out.result.diverged) {
        std::fprintf(stderr, "training diverged: %s\n",
                     out.result.divergence_note.c_str());
        return kExitDivergence;
      }
      const auto& last = out.result.history.rows.back();
      std::printf("run %s: best epoch %d, final clean %.4f, final robust %.4f\n",
                  out.dir.c_str(), out.result.best_epoch, last.test_clean_acc,
                  last.test_robust_acc);
    } else if (ev->parsed()) {
      std::cout << sglr::run_eval(run_dir, checkpoint).dump(2) << "\n";
    } else if (at->parsed()) {
      const auto path = sglr::run_attack_export(run_dir, checkpoint, out_path);
      std::printf("wrote %s\n", path.c_str());
    } else if (ab->parsed()) {
      const sglr::ExperimentConfig cfg = load_config(config_path, overrides);
      const auto summary = sglr::run_ablate(cfg, parse_double_list(r_list),
                                            parse_double_list(t_list));
      std::printf("wrote %s\n", summary.c_str());
    } else if (ns->parsed()) {
      const sglr::ExperimentConfig cfg = load_config(config_path, overrides);
      const auto summary = sglr::run_noise_sweep(
          cfg, parse_double_list(eta_list),
          sglr::detail::split_list(strategies, ','));
      std::printf("wrote %s\n", summary.c_str());
    } else if (tf->parsed()) {
      sglr::AttackConfig attack;
      attack.epsilon = eps;
      attack.step_size = step;
      attack.iters = iters;
      attack.random_start = random_start;
      std::cout << sglr::run_transfer(source_dir, target_dir, attack).dump(2)
                << "\n";
    } else if (th->parsed()) {
      const sglr::json reports = sglr::run_theory_checks(selector, theory_seed);
      const std::string text = reports.dump(2) + "\n";
      std::cout << text;
      if (!out_path.empty()) sglr::write_text(out_path, text);
      for (const auto& report : reports) {
        if (!report.at("pass").get<bool>()) return kExitValidation;
      }
    } else if (ex->parsed()) {
      for (const auto& path : sglr::run_export_plots(run_dir)) {
        std::printf("wrote %s\n", path.c_str());
      }
    }
  } catch (const sglr::MissingInputError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitMissingInput;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  }
  return kExitOk;
}
