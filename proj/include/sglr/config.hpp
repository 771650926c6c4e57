#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sglr/dataset.hpp"
#include "sglr/labels.hpp"
#include "sglr/train.hpp"

namespace sglr {

using nlohmann::json;

class MissingInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Everything a run needs, resolved from a flat key=value file or its JSON
// equivalent. Unknown keys are rejected; all values are validated before a
// run starts.
struct ExperimentConfig {
  // dataset.*
  std::string dataset_kind = "gaussian_mixture";  // | two_moons | idx | csv
  std::size_t dataset_n = 4000;                   // train examples
  std::size_t dataset_test_n = 2000;
  int dataset_k = 4;
  std::size_t dataset_dim = 20;
  double dataset_separation = 3.0;
  double dataset_moon_noise_sd = 0.1;
  std::string dataset_idx_images;
  std::string dataset_idx_labels;
  std::string dataset_csv_path;
  std::string dataset_noise_mode = "none";  // | symmetric_all | symmetric_wrong | asymmetric
  double dataset_noise_rate = 0.0;
  std::string dataset_transition;  // semicolon-separated rows for asymmetric
  std::string dataset_input_corruption = "none";  // | gaussian | random_pixels
  double dataset_corruption_amount = 0.0;

  // model.*
  std::vector<std::size_t> model_hidden = {64, 64};

  // train.*
  int train_epochs = 60;
  std::size_t train_batch = 128;
  double train_lr = 0.1;
  double train_momentum = 0.9;
  double train_weight_decay = 5e-4;
  std::string train_schedule = "piecewise";  // | cosine
  std::vector<int> train_milestones = {30, 45};
  double train_decay_factor = 0.1;
  double train_lr_min = 0.0;
  std::string train_objective = "pgd_at";  // | trades
  double train_beta = 6.0;

  // attack.*
  double attack_eps = 0.05;
  double attack_step = 0.0125;
  int attack_iters = 10;
  bool attack_random_start = true;

  // labels.*
  std::string labels_strategy = "hard";  // | uniform_ls | sglr
  double labels_r = 0.2;
  double labels_alpha = 0.9;
  double labels_lambda = 0.5;
  double labels_temperature = 1.0;
  std::string labels_ema_init = "hard";  // | uniform | zero-renormalized
  std::string labels_loss_form = "composed";  // | alg1

  std::uint64_t seed = 1;
  std::string out_dir = "run";
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::string trim(const std::string& s) {
  const auto from = s.find_first_not_of(" \t\r\n");
  if (from == std::string::npos) return "";
  const auto to = s.find_last_not_of(" \t\r\n");
  return s.substr(from, to - from + 1);
}

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("config: bad boolean for " + key + ": " + v);
}

}  // namespace detail

// Applies one dotted key. Throws std::invalid_argument on unknown keys or
// unparsable values.
inline void apply_config_key(ExperimentConfig& cfg, const std::string& key,
                             const std::string& value) {
  auto as_double = [&] {
    try {
      return std::stod(value);
    } catch (const std::exception&) {
      throw std::invalid_argument("config: bad number for " + key + ": " + value);
    }
  };
  auto as_int = [&] {
    try {
      return std::stoll(value);
    } catch (const std::exception&) {
      throw std::invalid_argument("config: bad integer for " + key + ": " + value);
    }
  };

  if (key == "dataset.kind") cfg.dataset_kind = value;
  else if (key == "dataset.n") cfg.dataset_n = static_cast<std::size_t>(as_int());
  else if (key == "dataset.test_n") cfg.dataset_test_n = static_cast<std::size_t>(as_int());
  else if (key == "dataset.k") cfg.dataset_k = static_cast<int>(as_int());
  else if (key == "dataset.dim") cfg.dataset_dim = static_cast<std::size_t>(as_int());
  else if (key == "dataset.separation") cfg.dataset_separation = as_double();
  else if (key == "dataset.moon_noise_sd") cfg.dataset_moon_noise_sd = as_double();
  else if (key == "dataset.idx_images") cfg.dataset_idx_images = value;
  else if (key == "dataset.idx_labels") cfg.dataset_idx_labels = value;
  else if (key == "dataset.csv_path") cfg.dataset_csv_path = value;
  else if (key == "dataset.noise_mode") cfg.dataset_noise_mode = value;
  else if (key == "dataset.noise_rate") cfg.dataset_noise_rate = as_double();
  else if (key == "dataset.transition") cfg.dataset_transition = value;
  else if (key == "dataset.input_corruption") cfg.dataset_input_corruption = value;
  else if (key == "dataset.corruption_amount") cfg.dataset_corruption_amount = as_double();
  else if (key == "model.hidden") {
    cfg.model_hidden.clear();
    for (const std::string& w : detail::split_list(value, ',')) {
      const long long width = std::stoll(w);
      if (width <= 0) throw std::invalid_argument("config: bad hidden width");
      cfg.model_hidden.push_back(static_cast<std::size_t>(width));
    }
  } else if (key == "train.epochs") cfg.train_epochs = static_cast<int>(as_int());
  else if (key == "train.batch") cfg.train_batch = static_cast<std::size_t>(as_int());
  else if (key == "train.lr") cfg.train_lr = as_double();
  else if (key == "train.momentum") cfg.train_momentum = as_double();
  else if (key == "train.weight_decay") cfg.train_weight_decay = as_double();
  else if (key == "train.schedule") cfg.train_schedule = value;
  else if (key == "train.milestones") {
    cfg.train_milestones.clear();
    for (const std::string& m : detail::split_list(value, ',')) {
      cfg.train_milestones.push_back(static_cast<int>(std::stoll(m)));
    }
  } else if (key == "train.decay_factor") cfg.train_decay_factor = as_double();
  else if (key == "train.lr_min") cfg.train_lr_min = as_double();
  else if (key == "train.objective") cfg.train_objective = value;
  else if (key == "train.beta") cfg.train_beta = as_double();
  else if (key == "attack.eps") cfg.attack_eps = as_double();
  else if (key == "attack.step") cfg.attack_step = as_double();
  else if (key == "attack.iters") cfg.attack_iters = static_cast<int>(as_int());
  else if (key == "attack.random_start") cfg.attack_random_start = detail::parse_bool(value, key);
  else if (key == "labels.strategy") cfg.labels_strategy = value;
  else if (key == "labels.r") cfg.labels_r = as_double();
  else if (key == "labels.alpha") cfg.labels_alpha = as_double();
  else if (key == "labels.lambda") cfg.labels_lambda = as_double();
  else if (key == "labels.temperature") cfg.labels_temperature = as_double();
  else if (key == "labels.ema_init") cfg.labels_ema_init = value;
  else if (key == "labels.loss_form") cfg.labels_loss_form = value;
  else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(as_int());
  else if (key == "out_dir") cfg.out_dir = value;
  else throw std::invalid_argument("config: unknown key " + key);
}

// Flat key=value lines; '#' starts a comment.
inline ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    const std::string stripped = detail::trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config: expected key=value, got: " + stripped);
    }
    apply_config_key(cfg, detail::trim(stripped.substr(0, eq)),
                     detail::trim(stripped.substr(eq + 1)));
  }
  return cfg;
}

// JSON equivalent; nested objects mirror the dotted keys.
inline ExperimentConfig parse_config_json(const json& doc) {
  ExperimentConfig cfg;
  for (const auto& [section, body] : doc.items()) {
    if (section == "seed" || section == "out_dir") {
      apply_config_key(cfg, section,
                       body.is_string() ? body.get<std::string>() : body.dump());
      continue;
    }
    if (section == "derived_seeds") continue;  // informational block
    if (!body.is_object()) {
      throw std::invalid_argument("config: section " + section +
                                  " must be an object");
    }
    for (const auto& [key, value] : body.items()) {
      std::string flat;
      if (value.is_string()) {
        flat = value.get<std::string>();
      } else if (value.is_array()) {
        std::string joined;
        for (const auto& item : value) {
          if (!joined.empty()) joined += ',';
          joined += item.dump();
        }
        flat = joined;
      } else {
        flat = value.dump();
      }
      apply_config_key(cfg, section + "." + key, flat);
    }
  }
  return cfg;
}

inline ExperimentConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw MissingInputError("cannot open config: " + path.string());
  std::stringstream buffer;
  buffer << is.rdbuf();
  const std::string text = buffer.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    return parse_config_json(json::parse(text));
  }
  return parse_config_text(text);
}

inline json to_json(const ExperimentConfig& cfg) {
  json doc;
  doc["dataset"] = {{"kind", cfg.dataset_kind},
                    {"n", cfg.dataset_n},
                    {"test_n", cfg.dataset_test_n},
                    {"k", cfg.dataset_k},
                    {"dim", cfg.dataset_dim},
                    {"separation", cfg.dataset_separation},
                    {"moon_noise_sd", cfg.dataset_moon_noise_sd},
                    {"idx_images", cfg.dataset_idx_images},
                    {"idx_labels", cfg.dataset_idx_labels},
                    {"csv_path", cfg.dataset_csv_path},
                    {"noise_mode", cfg.dataset_noise_mode},
                    {"noise_rate", cfg.dataset_noise_rate},
                    {"transition", cfg.dataset_transition},
                    {"input_corruption", cfg.dataset_input_corruption},
                    {"corruption_amount", cfg.dataset_corruption_amount}};
  doc["model"] = {{"hidden", cfg.model_hidden}};
  doc["train"] = {{"epochs", cfg.train_epochs},
                  {"batch", cfg.train_batch},
                  {"lr", cfg.train_lr},
                  {"momentum", cfg.train_momentum},
                  {"weight_decay", cfg.train_weight_decay},
                  {"schedule", cfg.train_schedule},
                  {"milestones", cfg.train_milestones},
                  {"decay_factor", cfg.train_decay_factor},
                  {"lr_min", cfg.train_lr_min},
                  {"objective", cfg.train_objective},
                  {"beta", cfg.train_beta}};
  doc["attack"] = {{"eps", cfg.attack_eps},
                   {"step", cfg.attack_step},
                   {"iters", cfg.attack_iters},
                   {"random_start", cfg.attack_random_start}};
  doc["labels"] = {{"strategy", cfg.labels_strategy},
                   {"r", cfg.labels_r},
                   {"alpha", cfg.labels_alpha},
                   {"lambda", cfg.labels_lambda},
                   {"temperature", cfg.labels_temperature},
                   {"ema_init", cfg.labels_ema_init},
                   {"loss_form", cfg.labels_loss_form}};
  doc["seed"] = cfg.seed;
  doc["out_dir"] = cfg.out_dir;
  doc["derived_seeds"] = {{"data", derive_seed(cfg.seed, "data")},
                          {"split", derive_seed(cfg.seed, "split")},
                          {"noise", derive_seed(cfg.seed, "noise")},
                          {"corruption", derive_seed(cfg.seed, "corruption")},
                          {"init", derive_seed(cfg.seed, "init")},
                          {"attack", derive_seed(cfg.seed, "attack")},
                          {"eval-attack", derive_seed(cfg.seed, "eval-attack")}};
  return doc;
}

inline LabelParams label_params_from(const ExperimentConfig& cfg) {
  LabelParams p;
  if (cfg.labels_strategy == "hard") p.strategy = LabelStrategy::hard;
  else if (cfg.labels_strategy == "uniform_ls") p.strategy = LabelStrategy::uniform_ls;
  else if (cfg.labels_strategy == "sglr") p.strategy = LabelStrategy::sglr;
  else throw std::invalid_argument("config: unknown labels.strategy " + cfg.labels_strategy);
  p.smooth_level = cfg.labels_r;
  p.ema_coef = cfg.labels_alpha;
  p.clean_mix = cfg.labels_lambda;
  p.temperature = cfg.labels_temperature;
  if (cfg.labels_ema_init == "hard") p.ema_init = EmaInit::hard;
  else if (cfg.labels_ema_init == "uniform") p.ema_init = EmaInit::uniform;
  else if (cfg.labels_ema_init == "zero-renormalized") p.ema_init = EmaInit::zero_renormalized;
  else throw std::invalid_argument("config: unknown labels.ema_init " + cfg.labels_ema_init);
  if (cfg.labels_loss_form == "composed") p.loss_form = LossForm::composed;
  else if (cfg.labels_loss_form == "alg1") p.loss_form = LossForm::alg1;
  else throw std::invalid_argument("config: unknown labels.loss_form " + cfg.labels_loss_form);
  return p;
}

inline AttackConfig attack_config_from(const ExperimentConfig& cfg) {
  AttackConfig a;
  a.epsilon = cfg.attack_eps;
  a.step_size = cfg.attack_step;
  a.iters = cfg.attack_iters;
  a.random_start = cfg.attack_random_start;
  return a;
}

inline TrainConfig train_config_from(const ExperimentConfig& cfg) {
  TrainConfig t;
  t.epochs = cfg.train_epochs;
  t.batch_size = cfg.train_batch;
  t.lr = cfg.train_lr;
  t.momentum = cfg.train_momentum;
  t.weight_decay = cfg.train_weight_decay;
  if (cfg.train_schedule == "piecewise") {
    t.schedule.kind = Schedule::Kind::piecewise;
  } else if (cfg.train_schedule == "cosine") {
    t.schedule.kind = Schedule::Kind::cosine;
  } else {
    throw std::invalid_argument("config: unknown train.schedule " + cfg.train_schedule);
  }
  t.schedule.milestones = cfg.train_milestones;
  t.schedule.factor = cfg.train_decay_factor;
  t.schedule.lr_min = cfg.train_lr_min;
  if (cfg.train_objective == "pgd_at") t.objective = Objective::pgd_at;
  else if (cfg.train_objective == "trades") t.objective = Objective::trades;
  else throw std::invalid_argument("config: unknown train.objective " + cfg.train_objective);
  t.trades_beta = cfg.train_beta;
  t.attack = attack_config_from(cfg);
  t.labels = label_params_from(cfg);
  t.seed = cfg.seed;
  return t;
}

inline MlpSpec mlp_spec_from(const ExperimentConfig& cfg, std::size_t input_dim) {
  MlpSpec spec;
  spec.input_dim = input_dim;
  spec.hidden = cfg.model_hidden;
  spec.classes = static_cast<std::size_t>(cfg.dataset_k);
  return spec;
}

inline std::optional<NoiseSpec> noise_spec_from(const ExperimentConfig& cfg) {
  if (cfg.dataset_noise_mode == "none") {
    if (cfg.dataset_noise_rate != 0.0) {
      throw std::invalid_argument("config: noise_rate set but noise_mode is none");
    }
    return std::nullopt;
  }
  NoiseSpec spec;
  spec.rate = cfg.dataset_noise_rate;
  if (cfg.dataset_noise_mode == "symmetric_all") {
    spec.mode = NoiseSpec::Mode::symmetric_all;
  } else if (cfg.dataset_noise_mode == "symmetric_wrong") {
    spec.mode = NoiseSpec::Mode::symmetric_wrong;
  } else if (cfg.dataset_noise_mode == "asymmetric") {
    spec.mode = NoiseSpec::Mode::asymmetric;
    const auto rows = detail::split_list(cfg.dataset_transition, ';');
    const std::size_t k = static_cast<std::size_t>(cfg.dataset_k);
    if (rows.size() != k) {
      throw std::invalid_argument("config: transition must have k rows");
    }
    Tensor t = Tensor::zeros(k, k);
    for (std::size_t r = 0; r < k; ++r) {
      const auto cells = detail::split_list(rows[r], ',');
      if (cells.size() != k) {
        throw std::invalid_argument("config: transition row needs k entries");
      }
      for (std::size_t c = 0; c < k; ++c) t.at(r, c) = std::stod(cells[c]);
    }
    spec.transition = std::move(t);
  } else {
    throw std::invalid_argument("config: unknown noise_mode " + cfg.dataset_noise_mode);
  }
  return spec;
}

// Full validation pass; throws std::invalid_argument on the first problem.
inline void validate(const ExperimentConfig& cfg) {
  if (cfg.dataset_kind != "gaussian_mixture" && cfg.dataset_kind != "two_moons" &&
      cfg.dataset_kind != "idx" && cfg.dataset_kind != "csv") {
    throw std::invalid_argument("config: unknown dataset.kind " + cfg.dataset_kind);
  }
  if (cfg.dataset_n == 0 || cfg.dataset_test_n == 0) {
    throw std::invalid_argument("config: dataset sizes must be positive");
  }
  if (cfg.dataset_k < 2) throw std::invalid_argument("config: dataset.k >= 2");
  if (cfg.dataset_kind == "gaussian_mixture" && cfg.dataset_dim < 2) {
    throw std::invalid_argument("config: dataset.dim >= 2");
  }
  if (cfg.dataset_input_corruption != "none" &&
      cfg.dataset_input_corruption != "gaussian" &&
      cfg.dataset_input_corruption != "random_pixels") {
    throw std::invalid_argument("config: unknown input_corruption " +
                                cfg.dataset_input_corruption);
  }
  if (cfg.out_dir.empty()) throw std::invalid_argument("config: out_dir empty");
  noise_spec_from(cfg);
  validate(train_config_from(cfg));
}

}  // namespace sglr
