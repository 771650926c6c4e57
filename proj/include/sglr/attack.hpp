#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "sglr/dataset.hpp"
#include "sglr/net.hpp"
#include "sglr/rng.hpp"
#include "sglr/tensor.hpp"

namespace sglr {

// L-infinity threat model: radius, per-iteration step, iteration count and
// the clamp box the data lives in.
struct AttackConfig {
  double epsilon = 0.0;
  double step_size = 0.0;
  int iters = 0;
  bool random_start = false;
  double domain_lo = 0.0;
  double domain_hi = 1.0;
};

inline void validate(const AttackConfig& cfg) {
  if (!(cfg.epsilon >= 0.0)) {
    throw std::invalid_argument("AttackConfig: epsilon must be nonnegative");
  }
  if (cfg.iters < 0) {
    throw std::invalid_argument("AttackConfig: iters must be nonnegative");
  }
  if (cfg.iters > 0 && !(cfg.step_size > 0.0)) {
    throw std::invalid_argument("AttackConfig: step_size must be positive");
  }
  if (!(cfg.domain_lo < cfg.domain_hi)) {
    throw std::invalid_argument("AttackConfig: empty domain box");
  }
}

// Loss oracle for the inner maximization: evaluates the attacked loss at x
// and fills its gradient. Lets the attacks run against toy closed-form
// losses in tests as well as real models.
using LossGrad = std::function<double(const Tensor& x, Tensor& grad_x)>;

namespace detail {

inline void project_box(Tensor& x, const Tensor& center,
                        const AttackConfig& cfg) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lo = std::max(center[i] - cfg.epsilon, cfg.domain_lo);
    const double hi = std::min(center[i] + cfg.epsilon, cfg.domain_hi);
    x[i] = std::clamp(x[i], lo, hi);
  }
}

inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace detail

// Single signed-gradient step of size epsilon, then the domain clamp.
inline Tensor fgsm(const LossGrad& loss, const Tensor& x,
                   const AttackConfig& cfg) {
  validate(cfg);
  Tensor grad(x.shape());
  loss(x, grad);
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::clamp(out[i] + cfg.epsilon * detail::sign(grad[i]),
                        cfg.domain_lo, cfg.domain_hi);
  }
  return out;
}

// Iterated signed-gradient ascent with projection onto the epsilon ball
// intersected with the domain box after every step.
inline Tensor pgd(const LossGrad& loss, const Tensor& x,
                  const AttackConfig& cfg, Rng& rng) {
  validate(cfg);
  if (cfg.epsilon == 0.0) return x;
  Tensor adv = x;
  if (cfg.random_start) {
    for (std::size_t i = 0; i < adv.size(); ++i) {
      adv[i] += rng.uniform(-cfg.epsilon, cfg.epsilon);
    }
    detail::project_box(adv, x, cfg);
  }
  Tensor grad(x.shape());
  for (int it = 0; it < cfg.iters; ++it) {
    loss(adv, grad);
    for (std::size_t i = 0; i < adv.size(); ++i) {
      adv[i] += cfg.step_size * detail::sign(grad[i]);
    }
    detail::project_box(adv, x, cfg);
  }
  return adv;
}

// Loss oracle for cross entropy against fixed soft target rows.
inline LossGrad ce_attack_loss(const Classifier& model, const Tensor& targets) {
  return [&model, targets](const Tensor& x, Tensor& grad_x) {
    MlpGraph g = make_graph(*model.params, *model.spec);
    attach_soft_ce_loss(g, add_forward(g, x), targets, model.temperature);
    grad_x = backward_input(g);
    return loss_value(g);
  };
}

// Loss oracle for KL(f(x') || f(x)) with the clean prediction frozen; the
// inner maximization of the TRADES objective.
inline LossGrad kl_attack_loss(const Classifier& model, const Tensor& x_clean) {
  Tensor ref = model.probs(x_clean);
  return [&model, ref = std::move(ref)](const Tensor& x, Tensor& grad_x) {
    MlpGraph g = make_graph(*model.params, *model.spec);
    attach_kl_to_const_loss(g, add_forward(g, x), ref, model.temperature);
    grad_x = backward_input(g);
    return loss_value(g);
  };
}

inline Tensor fgsm(const Classifier& model, const Tensor& x,
                   const Tensor& y_target, const AttackConfig& cfg) {
  require_simplex_rows(y_target, "fgsm(y_target)");
  return fgsm(ce_attack_loss(model, y_target), x, cfg);
}

inline Tensor pgd(const Classifier& model, const Tensor& x,
                  const Tensor& y_target, const AttackConfig& cfg, Rng& rng) {
  require_simplex_rows(y_target, "pgd(y_target)");
  return pgd(ce_attack_loss(model, y_target), x, cfg, rng);
}

inline Tensor pgd_kl(const Classifier& model, const Tensor& x,
                     const AttackConfig& cfg, Rng& rng) {
  return pgd(kl_attack_loss(model, x), x, cfg, rng);
}

// Black-box transfer: craft on the source model's gradients only, then
// measure the target model's accuracy on the crafted batch. The target is
// never queried while crafting.
inline double transfer_eval(const Classifier& source, const Classifier& target,
                            const Dataset& ds, const AttackConfig& cfg,
                            Rng& rng, std::size_t batch_size = 256) {
  std::size_t hits = 0;
  for (std::size_t start = 0; start < ds.n(); start += batch_size) {
    const std::size_t count = std::min(batch_size, ds.n() - start);
    Tensor x = Tensor::zeros(count, ds.dim());
    std::vector<int> y(count);
    for (std::size_t i = 0; i < count; ++i) {
      y[i] = ds.labels[start + i];
      for (std::size_t c = 0; c < ds.dim(); ++c) {
        x.at(i, c) = ds.features.at(start + i, c);
      }
    }
    const Tensor adv = pgd(source, x, one_hot(y, ds.classes), cfg, rng);
    const std::vector<int> pred = argmax_rows(target.probs(adv));
    for (std::size_t i = 0; i < count; ++i) {
      if (pred[i] == y[i]) ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(ds.n());
}

// Largest |x' - x| entry; tests assert this never exceeds epsilon.
inline double linf_distance(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("linf_distance: shape mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d = std::max(d, std::abs(a[i] - b[i]));
  }
  return d;
}

}  // namespace sglr
