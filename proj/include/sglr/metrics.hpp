#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "sglr/attack.hpp"
#include "sglr/dataset.hpp"
#include "sglr/net.hpp"
#include "sglr/rng.hpp"
#include "sglr/tensor.hpp"

namespace sglr {

// Per-example confidence: the maximum predicted probability.
inline std::vector<double> confidence(const Tensor& probs) {
  require_simplex_rows(probs, "confidence");
  std::vector<double> out(probs.rows());
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    double best = probs.at(r, 0);
    for (std::size_t c = 1; c < probs.cols(); ++c) {
      best = std::max(best, probs.at(r, c));
    }
    out[r] = best;
  }
  return out;
}

struct CalibrationBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  double mean_conf = 0.0;
  double acc = 0.0;
};

struct CalibrationReport {
  double ece = 0.0;
  std::vector<CalibrationBin> bins;
  double mean_conf_correct = 0.0;
  double mean_conf_incorrect = 0.0;
  std::size_t n = 0;
};

// Equal-width confidence-binned expected calibration error:
//   ece = sum_b (count_b / N) * |acc_b - conf_b|
// Confidence 1.0 lands in the last bin.
inline CalibrationReport ece_binned(const Tensor& probs,
                                    const std::vector<int>& labels,
                                    int bins = 15) {
  if (bins < 1) throw std::invalid_argument("ece_binned: bins >= 1");
  if (probs.rows() != labels.size()) {
    throw std::invalid_argument("ece_binned: label count mismatch");
  }
  const std::vector<double> conf = confidence(probs);
  const std::vector<int> pred = argmax_rows(probs);

  CalibrationReport report;
  report.n = labels.size();
  report.bins.resize(bins);
  std::vector<double> conf_sum(bins, 0.0);
  std::vector<std::size_t> hit_sum(bins, 0);
  for (int b = 0; b < bins; ++b) {
    report.bins[b].lo = static_cast<double>(b) / bins;
    report.bins[b].hi = static_cast<double>(b + 1) / bins;
  }

  double conf_correct = 0.0, conf_incorrect = 0.0;
  std::size_t n_correct = 0, n_incorrect = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    int b = static_cast<int>(conf[i] * bins);
    b = std::clamp(b, 0, bins - 1);
    ++report.bins[b].count;
    conf_sum[b] += conf[i];
    const bool hit = pred[i] == labels[i];
    if (hit) {
      ++hit_sum[b];
      conf_correct += conf[i];
      ++n_correct;
    } else {
      conf_incorrect += conf[i];
      ++n_incorrect;
    }
  }

  double ece = 0.0;
  for (int b = 0; b < bins; ++b) {
    CalibrationBin& bin = report.bins[b];
    if (bin.count == 0) continue;
    bin.mean_conf = conf_sum[b] / static_cast<double>(bin.count);
    bin.acc = static_cast<double>(hit_sum[b]) / static_cast<double>(bin.count);
    ece += (static_cast<double>(bin.count) / static_cast<double>(report.n)) *
           std::abs(bin.acc - bin.mean_conf);
  }
  report.ece = ece;
  report.mean_conf_correct =
      n_correct ? conf_correct / static_cast<double>(n_correct) : 0.0;
  report.mean_conf_incorrect =
      n_incorrect ? conf_incorrect / static_cast<double>(n_incorrect) : 0.0;
  return report;
}

// Mean over batches of the parameter-gradient norm of the adversarial loss.
inline double grad_norm_epoch(const Classifier& model, const Dataset& ds,
                              const AttackConfig& attack, std::uint64_t seed,
                              std::size_t batch_size = 256) {
  Rng rng(seed);
  double total = 0.0;
  std::size_t count = 0;
  for (const Batch& b : batches(ds, batch_size, derive_seed(seed, "order"))) {
    const Tensor targets = one_hot(b.y, ds.classes);
    const Tensor adv = pgd(model, b.x, targets, attack, rng);
    MlpGraph g = make_graph(*model.params, *model.spec);
    attach_soft_ce_loss(g, add_forward(g, adv), targets, model.temperature);
    total += grad_norm(backward_params(g));
    ++count;
  }
  return total / static_cast<double>(count);
}

struct IiwConfig {
  double sigma_prior = 0.1;     // prior stddev around the initial weights
  std::size_t window = 5;       // checkpoints feeding the posterior variance
  double var_floor = 1e-10;     // lower clamp on the empirical variance
};

// Gaussian information-in-weights proxy, in nats: KL between an isotropic
// Gaussian posterior centred at the newest iterate (per-parameter variance
// from the windowed iterate history) and a Gaussian prior centred at the
// initialization with variance sigma_prior^2. A trend metric; its absolute
// scale is not meaningful.
inline double estimate_iiw(const std::vector<std::vector<double>>& window,
                           const std::vector<double>& init,
                           const IiwConfig& cfg = {}) {
  if (window.size() < 2) {
    throw std::logic_error("estimate_iiw: need at least 2 checkpoints");
  }
  const std::size_t dim = init.size();
  for (const auto& w : window) {
    if (w.size() != dim) {
      throw std::invalid_argument("estimate_iiw: checkpoint size mismatch");
    }
  }
  const double var_prior = cfg.sigma_prior * cfg.sigma_prior;
  const std::vector<double>& current = window.back();
  const double n = static_cast<double>(window.size());

  double kl = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    double mean = 0.0;
    for (const auto& w : window) mean += w[i];
    mean /= n;
    double var = 0.0;
    for (const auto& w : window) var += (w[i] - mean) * (w[i] - mean);
    var = std::max(var / n, cfg.var_floor);
    const double shift = current[i] - init[i];
    kl += 0.5 * (std::log(var_prior / var) +
                 (var + shift * shift) / var_prior - 1.0);
  }
  return std::max(kl, 0.0);
}

// Hutchinson trace estimator: mean over Rademacher probes of v' H v, with
// the Hessian-vector product taken by central finite differences of the
// gradient map.
inline double hessian_trace(
    const std::function<std::vector<double>(const std::vector<double>&)>& grad_fn,
    const std::vector<double>& at, int probes, Rng& rng, double step = 1e-4) {
  if (probes < 1) throw std::invalid_argument("hessian_trace: probes >= 1");
  if (!(step > 0.0)) throw std::invalid_argument("hessian_trace: step > 0");
  const std::size_t dim = at.size();
  double total = 0.0;
  std::vector<double> up(dim), down(dim);
  for (int p = 0; p < probes; ++p) {
    std::vector<double> probe(dim);
    for (double& v : probe) v = rng.rademacher();
    for (std::size_t i = 0; i < dim; ++i) {
      up[i] = at[i] + step * probe[i];
      down[i] = at[i] - step * probe[i];
    }
    const std::vector<double> g_up = grad_fn(up);
    const std::vector<double> g_down = grad_fn(down);
    if (g_up.size() != dim || g_down.size() != dim) {
      throw std::invalid_argument("hessian_trace: gradient size mismatch");
    }
    double quad = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      quad += probe[i] * (g_up[i] - g_down[i]) / (2.0 * step);
    }
    total += quad;
  }
  return total / static_cast<double>(probes);
}

// Histogram of the probability mass the model puts on the labeled class.
inline std::vector<std::size_t> prediction_density(const Tensor& probs,
                                                   const std::vector<int>& labels,
                                                   int bins) {
  if (bins < 1) throw std::invalid_argument("prediction_density: bins >= 1");
  require_simplex_rows(probs, "prediction_density");
  if (probs.rows() != labels.size()) {
    throw std::invalid_argument("prediction_density: label count mismatch");
  }
  std::vector<std::size_t> hist(bins, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double mass = probs.at(i, static_cast<std::size_t>(labels[i]));
    int b = static_cast<int>(mass * bins);
    b = std::clamp(b, 0, bins - 1);
    ++hist[b];
  }
  return hist;
}

}  // namespace sglr
