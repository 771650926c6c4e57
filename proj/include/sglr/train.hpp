#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sglr/attack.hpp"
#include "sglr/dataset.hpp"
#include "sglr/labels.hpp"
#include "sglr/metrics.hpp"
#include "sglr/net.hpp"
#include "sglr/rng.hpp"
#include "sglr/tensor.hpp"

namespace sglr {

struct Schedule {
  enum class Kind { piecewise, cosine };
  Kind kind = Kind::piecewise;
  std::vector<int> milestones;  // 1-based epochs; the decay applies at them
  double factor = 0.1;
  double lr_min = 0.0;  // cosine floor
};

inline double lr_at(const Schedule& schedule, double lr0, int epoch,
                    int total_epochs) {
  if (epoch < 1 || epoch > total_epochs) {
    throw std::invalid_argument("lr_at: epoch out of range");
  }
  if (schedule.kind == Schedule::Kind::piecewise) {
    double lr = lr0;
    for (int m : schedule.milestones) {
      if (epoch >= m) lr *= schedule.factor;
    }
    return lr;
  }
  if (total_epochs == 1) return lr0;
  const double t =
      static_cast<double>(epoch - 1) / static_cast<double>(total_epochs - 1);
  return schedule.lr_min +
         (lr0 - schedule.lr_min) * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

enum class Objective { pgd_at, trades };

struct TrainConfig {
  int epochs = 60;
  std::size_t batch_size = 128;
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  Schedule schedule;
  Objective objective = Objective::pgd_at;
  double trades_beta = 6.0;
  AttackConfig attack;
  LabelParams labels;
  std::uint64_t seed = 0;
};

inline void validate(const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw std::invalid_argument("TrainConfig: epochs >= 1");
  if (cfg.batch_size == 0) throw std::invalid_argument("TrainConfig: batch_size > 0");
  if (!(cfg.lr > 0.0)) throw std::invalid_argument("TrainConfig: lr > 0");
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) {
    throw std::invalid_argument("TrainConfig: momentum in [0,1)");
  }
  if (!(cfg.weight_decay >= 0.0)) {
    throw std::invalid_argument("TrainConfig: weight_decay >= 0");
  }
  if (!(cfg.trades_beta >= 0.0)) {
    throw std::invalid_argument("TrainConfig: trades beta >= 0");
  }
  if (cfg.labels.loss_form == LossForm::alg1 &&
      cfg.labels.strategy != LabelStrategy::sglr) {
    throw std::invalid_argument(
        "TrainConfig: the alg1 loss form needs the sglr strategy");
  }
  validate(cfg.attack);
  validate(cfg.labels);
}

// Per-epoch metric row. The first thirteen columns are the stable schema;
// adversarial-confidence columns follow, and the train-accuracy split on
// untouched vs corrupted labels is appended when label noise is active.
struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_clean_acc = 0.0;
  double train_robust_acc = 0.0;
  double test_clean_acc = 0.0;
  double test_robust_acc = 0.0;
  double grad_norm = 0.0;
  double ece_clean = 0.0;
  double ece_adv = 0.0;
  double iiw_est = 0.0;
  double mean_conf_correct = 0.0;
  double mean_conf_incorrect = 0.0;
  double train_loss = 0.0;
  double mean_conf_correct_adv = 0.0;
  double mean_conf_incorrect_adv = 0.0;
  std::optional<double> train_acc_untouched;
  std::optional<double> train_acc_corrupted;
};

struct RunRecord {
  std::vector<EpochRecord> rows;
  bool noise_split = false;

  void write_csv(std::ostream& os) const {
    os << "epoch,lr,train_clean_acc,train_robust_acc,test_clean_acc,"
          "test_robust_acc,grad_norm,ece_clean,ece_adv,iiw_est,"
          "mean_conf_correct,mean_conf_incorrect,train_loss,"
          "mean_conf_correct_adv,mean_conf_incorrect_adv";
    if (noise_split) os << ",train_acc_untouched,train_acc_corrupted";
    os << "\n";
    char buf[64];
    auto put = [&](double v) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      os << ',' << buf;
    };
    for (const EpochRecord& r : rows) {
      os << r.epoch;
      put(r.lr);
      put(r.train_clean_acc);
      put(r.train_robust_acc);
      put(r.test_clean_acc);
      put(r.test_robust_acc);
      put(r.grad_norm);
      put(r.ece_clean);
      put(r.ece_adv);
      put(r.iiw_est);
      put(r.mean_conf_correct);
      put(r.mean_conf_incorrect);
      put(r.train_loss);
      put(r.mean_conf_correct_adv);
      put(r.mean_conf_incorrect_adv);
      if (noise_split) {
        put(r.train_acc_untouched.value_or(0.0));
        put(r.train_acc_corrupted.value_or(0.0));
      }
      os << "\n";
    }
  }

  std::string to_csv() const {
    std::ostringstream ss;
    write_csv(ss);
    return ss.str();
  }
};

// TRADES objective value: CE(f(x), targets) + beta * KL(f(x') || f(x)).
inline double trades_loss(const Classifier& model, const Tensor& x,
                          const Tensor& x_adv, const Tensor& targets,
                          double beta) {
  const Tensor p_clean = model.probs(x);
  const Tensor p_adv = model.probs(x_adv);
  return cross_entropy_soft(targets, p_clean) + beta * kl_div(p_adv, p_clean);
}

struct GapReport {
  double best = 0.0;
  double final_value = 0.0;
  double diff = 0.0;  // best - final
  int best_epoch = 0;
};

inline GapReport best_final_gap(const RunRecord& history,
                                double EpochRecord::*metric) {
  if (history.rows.empty()) {
    throw std::invalid_argument("best_final_gap: empty history");
  }
  GapReport report;
  report.best = history.rows.front().*metric;
  report.best_epoch = history.rows.front().epoch;
  for (const EpochRecord& r : history.rows) {
    if (r.*metric > report.best) {
      report.best = r.*metric;
      report.best_epoch = r.epoch;
    }
  }
  report.final_value = history.rows.back().*metric;
  report.diff = report.best - report.final_value;
  return report;
}

struct TrainResult {
  MlpSpec spec;
  ParamSet init_params;
  ParamSet best_params;
  ParamSet final_params;
  int best_epoch = 0;
  RunRecord history;
  bool diverged = false;
  std::string divergence_note;
};

namespace detail {

// v <- momentum * v + g;  w <- (1 - lr * wd) * w - lr * v
inline void sgd_step(ParamSet& params, const ParamSet& grads,
                     std::vector<Tensor>& velocity, double lr, double momentum,
                     double weight_decay) {
  const double shrink = 1.0 - lr * weight_decay;
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor& w = params.value(t);
    const Tensor& g = grads.value(t);
    Tensor& v = velocity[t];
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = momentum * v[i] + g[i];
      w[i] = shrink * w[i] - lr * v[i];
    }
  }
}

struct TestEval {
  double clean_acc = 0.0;
  double robust_acc = 0.0;
  CalibrationReport calib_clean;
  CalibrationReport calib_adv;
};

inline TestEval evaluate_test(const Classifier& model, const Dataset& test,
                              const AttackConfig& attack, Rng& rng,
                              std::size_t batch_size) {
  TestEval eval;
  const std::size_t k = static_cast<std::size_t>(test.classes);
  Tensor probs_clean = Tensor::zeros(test.n(), k);
  Tensor probs_adv = Tensor::zeros(test.n(), k);
  std::vector<int> labels;
  labels.reserve(test.n());
  std::size_t row = 0;
  for (const Batch& b : batches(test, batch_size, 0)) {
    const Tensor targets = one_hot(b.y, test.classes);
    const Tensor pc = model.probs(b.x);
    const Tensor pa = model.probs(pgd(model, b.x, targets, attack, rng));
    labels.insert(labels.end(), b.y.begin(), b.y.end());
    for (std::size_t i = 0; i < b.ids.size(); ++i, ++row) {
      for (std::size_t c = 0; c < k; ++c) {
        probs_clean.at(row, c) = pc.at(i, c);
        probs_adv.at(row, c) = pa.at(i, c);
      }
    }
  }
  eval.clean_acc = accuracy(probs_clean, labels);
  eval.robust_acc = accuracy(probs_adv, labels);
  eval.calib_clean = ece_binned(probs_clean, labels);
  eval.calib_adv = ece_binned(probs_adv, labels);
  return eval;
}

}  // namespace detail

// The outer minimization. Inner maximization per batch, label assignment,
// SGD with momentum and decoupled weight decay, per-epoch diagnostics, and
// best/final checkpoint tracking (best = highest test robust accuracy under
// the training attack).
inline TrainResult train(const TrainConfig& cfg, const MlpSpec& spec,
                         const Dataset& train_ds, const Dataset& test_ds) {
  validate(cfg);
  validate(spec);
  validate(train_ds);
  validate(test_ds);
  if (train_ds.dim() != spec.input_dim || test_ds.dim() != spec.input_dim) {
    throw std::invalid_argument("train: dataset width does not match the model");
  }

  TrainResult result;
  result.spec = spec;
  ParamSet params = init_mlp_params(spec, derive_seed(cfg.seed, "init"));
  result.init_params = params;

  std::vector<Tensor> velocity;
  for (std::size_t t = 0; t < params.size(); ++t) {
    velocity.emplace_back(params.value(t).shape());
  }

  LabelState label_state(train_ds, cfg.labels);
  Rng attack_rng(derive_seed(cfg.seed, "attack"));
  Rng eval_rng(derive_seed(cfg.seed, "eval-attack"));
  const Classifier model{&params, &spec, 1.0};

  const bool noise_active = train_ds.labels != train_ds.pristine_labels;
  result.history.noise_split = noise_active;

  const std::vector<double> init_flat = params.flatten_values();
  std::deque<std::vector<double>> iiw_window;
  const IiwConfig iiw_cfg;

  double best_robust = -1.0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = lr_at(cfg.schedule, cfg.lr, epoch, cfg.epochs);

    double loss_sum = 0.0, grad_norm_sum = 0.0;
    double clean_hits = 0.0, robust_hits = 0.0;
    double untouched_hits = 0.0, corrupted_hits = 0.0;
    double untouched_n = 0.0, corrupted_n = 0.0;
    std::size_t steps = 0, examples = 0;

    const auto epoch_batches =
        batches(train_ds, cfg.batch_size,
                derive_seed(cfg.seed, "epoch-" + std::to_string(epoch)));
    for (const Batch& b : epoch_batches) {
      const Tensor y_hard = one_hot(b.y, train_ds.classes);

      Tensor x_adv;
      if (cfg.objective == Objective::trades) {
        x_adv = pgd_kl(model, b.x, cfg.attack, attack_rng);
      } else {
        x_adv = pgd(model, b.x, y_hard, cfg.attack, attack_rng);
      }

      const Tensor logits_clean = model.logits(b.x);
      const Tensor logits_adv = model.logits(x_adv);
      const Tensor probs_clean_t =
          softmax_t(logits_clean, cfg.labels.temperature);
      const Tensor probs_adv_t = softmax_t(logits_adv, cfg.labels.temperature);

      clean_hits += accuracy(softmax_t(logits_clean, 1.0), b.y) * b.y.size();
      robust_hits += accuracy(softmax_t(logits_adv, 1.0), b.y) * b.y.size();
      if (noise_active) {
        const std::vector<int> pred = argmax_rows(logits_adv);
        for (std::size_t i = 0; i < b.ids.size(); ++i) {
          const std::size_t src =
              static_cast<std::size_t>(label_state.row_of(b.ids[i]));
          const bool untouched =
              train_ds.labels[src] == train_ds.pristine_labels[src];
          const bool hit = pred[i] == b.y[i];
          if (untouched) {
            untouched_n += 1.0;
            untouched_hits += hit;
          } else {
            corrupted_n += 1.0;
            corrupted_hits += hit;
          }
        }
      }

      const Tensor targets =
          assign_targets(label_state, b.ids, y_hard, probs_clean_t, probs_adv_t);

      MlpGraph g = make_graph(params, spec);
      if (cfg.objective == Objective::trades) {
        const auto clean_var = add_forward(g, b.x);
        const auto adv_var = add_forward(g, x_adv);
        attach_trades_loss(g, clean_var, adv_var, targets, cfg.trades_beta, 1.0);
      } else if (cfg.labels.loss_form == LossForm::alg1) {
        // Clean logits against the raw buffer rows.
        attach_soft_ce_loss(g, add_forward(g, b.x),
                            label_state.buffer_rows(b.ids), 1.0);
      } else {
        attach_soft_ce_loss(g, add_forward(g, x_adv), targets, 1.0);
      }

      ParamSet grads = backward_params(g);
      const double loss = loss_value(g);
      loss_sum += loss;
      grad_norm_sum += grad_norm(grads);
      ++steps;
      examples += b.y.size();

      detail::sgd_step(params, grads, velocity, lr, cfg.momentum,
                       cfg.weight_decay);

      // Divergence gate: non-finite loss, or weight magnitudes past any
      // recoverable scale (they would overflow the next forward pass).
      double max_abs = 0.0;
      for (std::size_t t = 0; t < params.size(); ++t) {
        for (double v : params.value(t).values()) {
          max_abs = std::max(max_abs, std::abs(v));
        }
      }
      if (!std::isfinite(loss) || !(max_abs <= 1e50)) {
        result.diverged = true;
        result.divergence_note = "non-finite or exploding weights at epoch " +
                                 std::to_string(epoch) + ", step " +
                                 std::to_string(steps);
        result.best_params = params;
        result.final_params = params;
        return result;
      }
    }

    EpochRecord row;
    row.epoch = epoch;
    row.lr = lr;
    row.train_loss = loss_sum / static_cast<double>(steps);
    row.grad_norm = grad_norm_sum / static_cast<double>(steps);
    row.train_clean_acc = clean_hits / static_cast<double>(examples);
    row.train_robust_acc = robust_hits / static_cast<double>(examples);
    if (noise_active) {
      row.train_acc_untouched =
          untouched_n > 0 ? untouched_hits / untouched_n : 0.0;
      row.train_acc_corrupted =
          corrupted_n > 0 ? corrupted_hits / corrupted_n : 0.0;
    }

    const detail::TestEval eval = detail::evaluate_test(
        model, test_ds, cfg.attack, eval_rng, cfg.batch_size);
    row.test_clean_acc = eval.clean_acc;
    row.test_robust_acc = eval.robust_acc;
    row.ece_clean = eval.calib_clean.ece;
    row.ece_adv = eval.calib_adv.ece;
    row.mean_conf_correct = eval.calib_clean.mean_conf_correct;
    row.mean_conf_incorrect = eval.calib_clean.mean_conf_incorrect;
    row.mean_conf_correct_adv = eval.calib_adv.mean_conf_correct;
    row.mean_conf_incorrect_adv = eval.calib_adv.mean_conf_incorrect;

    iiw_window.push_back(params.flatten_values());
    while (iiw_window.size() > iiw_cfg.window) iiw_window.pop_front();
    if (iiw_window.size() >= 2) {
      row.iiw_est = estimate_iiw(
          std::vector<std::vector<double>>(iiw_window.begin(), iiw_window.end()),
          init_flat, iiw_cfg);
    }

    result.history.rows.push_back(row);

    if (eval.robust_acc > best_robust) {
      best_robust = eval.robust_acc;
      result.best_params = params;
      result.best_epoch = epoch;
    }
  }

  result.final_params = params;
  return result;
}

}  // namespace sglr
