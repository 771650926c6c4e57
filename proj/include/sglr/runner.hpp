#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sglr/checkpoint.hpp"
#include "sglr/config.hpp"
#include "sglr/dataset.hpp"
#include "sglr/metrics.hpp"
#include "sglr/theory.hpp"
#include "sglr/train.hpp"

namespace sglr {

namespace fs = std::filesystem;

// Builds the (train, test) pair a config describes: generate or load, split,
// then corrupt the training labels/inputs. The test split stays clean.
inline std::pair<Dataset, Dataset> build_datasets(const ExperimentConfig& cfg) {
  const std::size_t total = cfg.dataset_n + cfg.dataset_test_n;
  Dataset full;
  if (cfg.dataset_kind == "gaussian_mixture") {
    const std::size_t per_class =
        (total + static_cast<std::size_t>(cfg.dataset_k) - 1) /
        static_cast<std::size_t>(cfg.dataset_k);
    full = gen_gaussian_mixture(cfg.dataset_k, per_class, cfg.dataset_dim,
                                cfg.dataset_separation,
                                derive_seed(cfg.seed, "data"));
  } else if (cfg.dataset_kind == "two_moons") {
    full = gen_two_moons(total, cfg.dataset_moon_noise_sd,
                         derive_seed(cfg.seed, "data"));
  } else if (cfg.dataset_kind == "idx") {
    if (cfg.dataset_idx_images.empty() || cfg.dataset_idx_labels.empty()) {
      throw MissingInputError("config: idx dataset needs image and label paths");
    }
    full = load_idx(cfg.dataset_idx_images, cfg.dataset_idx_labels, total);
  } else if (cfg.dataset_kind == "csv") {
    if (cfg.dataset_csv_path.empty()) {
      throw MissingInputError("config: csv dataset needs a path");
    }
    full = read_dataset_csv(cfg.dataset_csv_path);
  } else {
    throw std::invalid_argument("config: unknown dataset.kind " + cfg.dataset_kind);
  }

  if (full.n() < total) {
    throw std::invalid_argument("dataset smaller than n + test_n");
  }
  auto [train_ds, rest] = split_dataset(full, cfg.dataset_n,
                                        derive_seed(cfg.seed, "split"));
  Dataset test_ds;
  if (rest.n() == cfg.dataset_test_n) {
    test_ds = std::move(rest);
  } else {
    test_ds = split_dataset(rest, cfg.dataset_test_n,
                            derive_seed(cfg.seed, "split-rest"))
                  .first;
  }

  if (const auto noise = noise_spec_from(cfg)) {
    const double limit = 1.0 - 1.0 / static_cast<double>(cfg.dataset_k);
    if (noise->rate >= limit) {
      std::fputs("warning: noise rate at or above 1 - 1/K; "
                 "noise-tolerance guarantees do not apply\n",
                 stderr);
    }
    train_ds = inject_label_noise(train_ds, *noise, derive_seed(cfg.seed, "noise"));
  }
  if (cfg.dataset_input_corruption == "gaussian") {
    train_ds = corrupt_inputs(train_ds, InputCorruption::gaussian,
                              cfg.dataset_corruption_amount,
                              derive_seed(cfg.seed, "corruption"));
  } else if (cfg.dataset_input_corruption == "random_pixels") {
    train_ds = corrupt_inputs(train_ds, InputCorruption::random_pixels,
                              cfg.dataset_corruption_amount,
                              derive_seed(cfg.seed, "corruption"));
  }
  return {std::move(train_ds), std::move(test_ds)};
}

struct RunOutput {
  fs::path dir;
  TrainResult result;
};

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

// Runs one training job and lays down the run directory:
//   config.json, metrics.csv, best.ckpt, final.ckpt, summary.json
inline RunOutput run_train(const ExperimentConfig& cfg) {
  validate(cfg);
  auto [train_ds, test_ds] = build_datasets(cfg);
  const MlpSpec spec = mlp_spec_from(cfg, train_ds.dim());
  const TrainConfig tcfg = train_config_from(cfg);

  RunOutput out;
  out.dir = fs::path(cfg.out_dir);
  fs::create_directories(out.dir);
  write_text(out.dir / "config.json", to_json(cfg).dump(2) + "\n");

  out.result = train(tcfg, spec, train_ds, test_ds);

  std::ostringstream metrics;
  out.result.history.write_csv(metrics);
  write_text(out.dir / "metrics.csv", metrics.str());
  save_checkpoint(out.result.best_params, spec, out.dir / "best.ckpt");
  save_checkpoint(out.result.final_params, spec, out.dir / "final.ckpt");

  json summary;
  summary["diverged"] = out.result.diverged;
  summary["divergence_note"] = out.result.divergence_note;
  summary["best_epoch"] = out.result.best_epoch;
  if (!out.result.history.rows.empty()) {
    const auto robust =
        best_final_gap(out.result.history, &EpochRecord::test_robust_acc);
    const auto clean =
        best_final_gap(out.result.history, &EpochRecord::test_clean_acc);
    summary["robust"] = {{"best", robust.best},
                         {"final", robust.final_value},
                         {"diff", robust.diff},
                         {"best_epoch", robust.best_epoch}};
    summary["clean"] = {{"best", clean.best},
                        {"final", clean.final_value},
                        {"diff", clean.diff},
                        {"best_epoch", clean.best_epoch}};
  }
  write_text(out.dir / "summary.json", summary.dump(2) + "\n");
  return out;
}

// Loads a run directory's final (or best) checkpoint.
inline Checkpoint load_run_checkpoint(const fs::path& run_dir,
                                      const std::string& which = "final") {
  const fs::path path = run_dir / (which + ".ckpt");
  if (!fs::exists(path)) {
    throw MissingInputError("no checkpoint found: " + path.string());
  }
  return load_checkpoint(path);
}

inline ExperimentConfig load_run_config(const fs::path& run_dir) {
  const fs::path path = run_dir / "config.json";
  if (!fs::exists(path)) {
    throw MissingInputError("no config found: " + path.string());
  }
  return parse_config_file(path);
}

// Clean + robust evaluation of a stored checkpoint on the config's test set.
inline json run_eval(const fs::path& run_dir, const std::string& which) {
  const ExperimentConfig cfg = load_run_config(run_dir);
  const Checkpoint ckpt = load_run_checkpoint(run_dir, which);
  auto [train_ds, test_ds] = build_datasets(cfg);
  const Classifier model{&ckpt.params, &ckpt.spec, 1.0};
  Rng rng(derive_seed(cfg.seed, "cli-eval"));
  const AttackConfig attack = attack_config_from(cfg);

  const Tensor probs_clean = model.probs(test_ds.features);
  const Tensor adv =
      pgd(model, test_ds.features, one_hot(test_ds.labels, test_ds.classes),
          attack, rng);
  const Tensor probs_adv = model.probs(adv);
  const CalibrationReport calib_clean = ece_binned(probs_clean, test_ds.labels);
  const CalibrationReport calib_adv = ece_binned(probs_adv, test_ds.labels);

  json report;
  report["checkpoint"] = which;
  report["clean_acc"] = accuracy(probs_clean, test_ds.labels);
  report["robust_acc"] = accuracy(probs_adv, test_ds.labels);
  report["ece_clean"] = calib_clean.ece;
  report["ece_adv"] = calib_adv.ece;
  report["mean_conf_correct"] = calib_clean.mean_conf_correct;
  report["mean_conf_incorrect"] = calib_clean.mean_conf_incorrect;
  return report;
}

// Crafts adversarial examples from a stored checkpoint and exports them in
// the dataset CSV schema (labels carried over, features replaced).
inline fs::path run_attack_export(const fs::path& run_dir,
                                  const std::string& which,
                                  const fs::path& out_csv) {
  const ExperimentConfig cfg = load_run_config(run_dir);
  const Checkpoint ckpt = load_run_checkpoint(run_dir, which);
  auto [train_ds, test_ds] = build_datasets(cfg);
  const Classifier model{&ckpt.params, &ckpt.spec, 1.0};
  Rng rng(derive_seed(cfg.seed, "cli-attack"));
  Dataset crafted = test_ds;
  crafted.features =
      pgd(model, test_ds.features, one_hot(test_ds.labels, test_ds.classes),
          attack_config_from(cfg), rng);
  write_dataset_csv(crafted, out_csv);
  return out_csv;
}

// Smoothing-level x temperature grid; each cell is a full run. The summary
// mirrors the standard-accuracy / robust-accuracy ablation layout.
inline fs::path run_ablate(const ExperimentConfig& base,
                           const std::vector<double>& r_values,
                           const std::vector<double>& t_values) {
  const fs::path root(base.out_dir);
  fs::create_directories(root);
  std::ostringstream summary;
  summary << "T,r,standard_acc,robust_acc\n";
  char buf[64];
  for (double temperature : t_values) {
    for (double r : r_values) {
      ExperimentConfig cell = base;
      cell.labels_strategy = "sglr";
      cell.labels_r = r;
      cell.labels_temperature = temperature;
      std::ostringstream name;
      name << "cell_T" << temperature << "_r" << r;
      cell.out_dir = (root / name.str()).string();
      const RunOutput run = run_train(cell);
      const auto& last = run.result.history.rows.back();
      summary << temperature << ',' << r;
      std::snprintf(buf, sizeof buf, "%.17g", last.test_clean_acc);
      summary << ',' << buf;
      std::snprintf(buf, sizeof buf, "%.17g", last.test_robust_acc);
      summary << ',' << buf << "\n";
    }
  }
  const fs::path out = root / "ablation_summary.csv";
  write_text(out, summary.str());
  return out;
}

// Label-noise sweep over strategies; per cell reports the train-accuracy
// split on untouched vs corrupted labels plus the test accuracies.
inline fs::path run_noise_sweep(const ExperimentConfig& base,
                                const std::vector<double>& etas,
                                const std::vector<std::string>& strategies) {
  const fs::path root(base.out_dir);
  fs::create_directories(root);
  std::ostringstream summary;
  summary << "eta,strategy,train_acc_untouched,train_acc_corrupted,"
             "test_clean_acc,test_robust_acc\n";
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    summary << ',' << buf;
  };
  for (double eta : etas) {
    for (const std::string& strategy : strategies) {
      ExperimentConfig cell = base;
      cell.labels_strategy = strategy;
      cell.dataset_noise_mode = eta > 0.0 ? "symmetric_all" : "none";
      cell.dataset_noise_rate = eta;
      std::ostringstream name;
      name << "cell_eta" << eta << "_" << strategy;
      cell.out_dir = (root / name.str()).string();
      const RunOutput run = run_train(cell);
      const auto& last = run.result.history.rows.back();
      summary << eta << ',' << strategy;
      put(last.train_acc_untouched.value_or(last.train_clean_acc));
      put(last.train_acc_corrupted.value_or(0.0));
      put(last.test_clean_acc);
      put(last.test_robust_acc);
      summary << "\n";
    }
  }
  const fs::path out = root / "noise_sweep_summary.csv";
  write_text(out, summary.str());
  return out;
}

// Black-box transfer: source crafts, target answers. Also reports the
// white-box robustness of each model on its own crafted batch for contrast.
inline json run_transfer(const fs::path& source_dir, const fs::path& target_dir,
                         const AttackConfig& attack) {
  const ExperimentConfig src_cfg = load_run_config(source_dir);
  const Checkpoint src = load_run_checkpoint(source_dir, "final");
  const Checkpoint tgt = load_run_checkpoint(target_dir, "final");
  auto [train_ds, test_ds] = build_datasets(src_cfg);
  const Classifier source{&src.params, &src.spec, 1.0};
  const Classifier target{&tgt.params, &tgt.spec, 1.0};

  Rng rng(derive_seed(src_cfg.seed, "transfer"));
  const double transfer_acc = transfer_eval(source, target, test_ds, attack, rng);
  Rng rng2(derive_seed(src_cfg.seed, "transfer"));
  const double source_self = transfer_eval(source, source, test_ds, attack, rng2);
  const double target_clean = accuracy(target.probs(test_ds.features), test_ds.labels);

  json report;
  report["source"] = source_dir.string();
  report["target"] = target_dir.string();
  report["epsilon"] = attack.epsilon;
  report["target_robust_acc_on_transferred"] = transfer_acc;
  report["source_self_robust_acc"] = source_self;
  report["target_clean_acc"] = target_clean;
  return report;
}

inline json theory_report(const theory::TrialSummary& s) {
  json j;
  j["check"] = s.name;
  j["trials"] = s.trials;
  j["max_residual"] = s.max_residual;
  j["mean_residual"] = s.mean_residual;
  j["tolerance"] = s.tolerance;
  j["pass"] = s.pass;
  if (!s.notes.empty()) j["notes"] = s.notes;
  return j;
}

// selector: all | prop1 | prop2 | log_sum | noise_risk | xent | iiw
inline json run_theory_checks(const std::string& selector, std::uint64_t seed) {
  json reports = json::array();
  auto want = [&](const char* name) {
    return selector == "all" || selector == name;
  };
  bool matched = false;
  if (want("prop1")) {
    reports.push_back(theory_report(theory::run_prop1_trials(1000, seed)));
    matched = true;
  }
  if (want("prop2")) {
    reports.push_back(theory_report(theory::run_prop2_trials(1000, seed + 1)));
    matched = true;
  }
  if (want("log_sum")) {
    reports.push_back(theory_report(theory::run_log_sum_trials(10000, seed + 2)));
    matched = true;
  }
  if (want("noise_risk")) {
    reports.push_back(
        theory_report(theory::run_symmetric_decomposition_trials(200, seed + 3)));
    reports.push_back(
        theory_report(theory::run_asymmetric_ordering_cases(50, seed + 4)));
    matched = true;
  }
  if (want("xent")) {
    reports.push_back(
        theory_report(theory::run_xent_decomposition_trials(100, seed + 5)));
    matched = true;
  }
  if (want("iiw")) {
    reports.push_back(theory_report(theory::run_iiw_reduction_check(seed + 6)));
    matched = true;
  }
  if (!matched) {
    throw std::invalid_argument("theory-check: unknown selector " + selector);
  }
  return reports;
}

namespace detail {

struct MetricsTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return static_cast<int>(i);
    }
    return -1;
  }
};

inline MetricsTable read_metrics_csv(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw MissingInputError("no metrics found: " + path.string());
  MetricsTable table;
  std::string line;
  if (!std::getline(is, line)) {
    throw MissingInputError("no metrics found: empty " + path.string());
  }
  std::stringstream hs(line);
  std::string cell;
  while (std::getline(hs, cell, ',')) table.header.push_back(cell);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> row;
    std::stringstream rs(line);
    while (std::getline(rs, cell, ',')) row.push_back(cell);
    table.rows.push_back(std::move(row));
  }
  if (table.rows.empty()) {
    throw MissingInputError("no metrics found: no rows in " + path.string());
  }
  return table;
}

inline void export_columns(const MetricsTable& table, const fs::path& out,
                           const std::vector<std::string>& names) {
  std::ostringstream os;
  std::vector<int> idx;
  for (const std::string& n : names) {
    const int c = table.column(n);
    if (c < 0) throw std::invalid_argument("metrics column missing: " + n);
    idx.push_back(c);
  }
  for (std::size_t i = 0; i < names.size(); ++i) {
    os << (i ? "," : "") << names[i];
  }
  os << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < idx.size(); ++i) {
      os << (i ? "," : "") << row[static_cast<std::size_t>(idx[i])];
    }
    os << "\n";
  }
  write_text(out, os.str());
}

}  // namespace detail

// Plot-ready exports from a finished run: learning curves, the gradient-norm
// trajectory, calibration curves, confidence trajectories, and the
// labeled-class probability density histogram (clean and adversarial).
inline std::vector<fs::path> run_export_plots(const fs::path& run_dir) {
  const fs::path metrics_path = run_dir / "metrics.csv";
  const detail::MetricsTable table = detail::read_metrics_csv(metrics_path);
  const fs::path plots = run_dir / "plots";
  fs::create_directories(plots);

  std::vector<fs::path> written;
  auto emit = [&](const char* file, const std::vector<std::string>& cols) {
    const fs::path out = plots / file;
    detail::export_columns(table, out, cols);
    written.push_back(out);
  };
  emit("learning_curves.csv",
       {"epoch", "lr", "train_clean_acc", "train_robust_acc", "test_clean_acc",
        "test_robust_acc"});
  emit("grad_norm_curve.csv", {"epoch", "grad_norm", "iiw_est"});
  emit("ece_curve.csv", {"epoch", "ece_clean", "ece_adv"});
  emit("confidence_trajectory.csv",
       {"epoch", "test_clean_acc", "test_robust_acc", "mean_conf_correct",
        "mean_conf_incorrect", "mean_conf_correct_adv",
        "mean_conf_incorrect_adv"});
  if (table.column("train_acc_untouched") >= 0) {
    emit("noise_portions.csv",
         {"epoch", "train_clean_acc", "train_acc_untouched",
          "train_acc_corrupted"});
  }

  // Density histogram needs the final model and the test data; both are
  // reproducible from the stored config.
  const ExperimentConfig cfg = load_run_config(run_dir);
  const Checkpoint ckpt = load_run_checkpoint(run_dir, "final");
  auto [train_ds, test_ds] = build_datasets(cfg);
  const Classifier model{&ckpt.params, &ckpt.spec, 1.0};
  Rng rng(derive_seed(cfg.seed, "export-attack"));
  const Tensor probs_clean = model.probs(test_ds.features);
  const Tensor adv =
      pgd(model, test_ds.features, one_hot(test_ds.labels, test_ds.classes),
          attack_config_from(cfg), rng);
  const Tensor probs_adv = model.probs(adv);
  const int bins = 20;
  const auto hist_clean = prediction_density(probs_clean, test_ds.labels, bins);
  const auto hist_adv = prediction_density(probs_adv, test_ds.labels, bins);
  std::ostringstream density;
  density << "bin_lo,bin_hi,count_clean,count_adv\n";
  for (int b = 0; b < bins; ++b) {
    density << static_cast<double>(b) / bins << ','
            << static_cast<double>(b + 1) / bins << ',' << hist_clean[b] << ','
            << hist_adv[b] << "\n";
  }
  const fs::path density_path = plots / "prediction_density.csv";
  write_text(density_path, density.str());
  written.push_back(density_path);

  // Calibration bin table for the final model on clean test data.
  const CalibrationReport calib = ece_binned(probs_clean, test_ds.labels);
  std::ostringstream bins_csv;
  bins_csv << "bin_lo,bin_hi,count,mean_conf,acc\n";
  char buf[64];
  for (const CalibrationBin& bin : calib.bins) {
    bins_csv << bin.lo << ',' << bin.hi << ',' << bin.count;
    std::snprintf(buf, sizeof buf, "%.17g", bin.mean_conf);
    bins_csv << ',' << buf;
    std::snprintf(buf, sizeof buf, "%.17g", bin.acc);
    bins_csv << ',' << buf << "\n";
  }
  const fs::path calib_path = plots / "calibration_bins.csv";
  write_text(calib_path, bins_csv.str());
  written.push_back(calib_path);
  return written;
}

// Writes a generated dataset (train and test CSVs) for external tooling.
inline std::pair<fs::path, fs::path> run_gen_data(const ExperimentConfig& cfg) {
  auto [train_ds, test_ds] = build_datasets(cfg);
  fs::create_directories(cfg.out_dir);
  const fs::path train_path = fs::path(cfg.out_dir) / "train.csv";
  const fs::path test_path = fs::path(cfg.out_dir) / "test.csv";
  write_dataset_csv(train_ds, train_path);
  write_dataset_csv(test_ds, test_path);
  write_text(fs::path(cfg.out_dir) / "config.json", to_json(cfg).dump(2) + "\n");
  return {train_path, test_path};
}

}  // namespace sglr
