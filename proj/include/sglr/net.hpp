#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sglr/autodiff.hpp"
#include "sglr/rng.hpp"
#include "sglr/tensor.hpp"

namespace sglr {

// Multilayer perceptron layout: input_dim -> hidden... -> classes, with a
// rectifier after every layer except the last.
struct MlpSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden;
  std::size_t classes = 0;
};

inline void validate(const MlpSpec& spec) {
  if (spec.input_dim == 0) {
    throw std::invalid_argument("MlpSpec: input_dim must be positive");
  }
  if (spec.classes < 2) {
    throw std::invalid_argument("MlpSpec: need at least 2 classes");
  }
  for (std::size_t w : spec.hidden) {
    if (w == 0) throw std::invalid_argument("MlpSpec: zero hidden width");
  }
}

inline std::vector<std::size_t> layer_dims(const MlpSpec& spec) {
  std::vector<std::size_t> dims;
  dims.push_back(spec.input_dim);
  dims.insert(dims.end(), spec.hidden.begin(), spec.hidden.end());
  dims.push_back(spec.classes);
  return dims;
}

// Ordered, named collection of tensors with matching gradient slots.
class ParamSet {
 public:
  void add(std::string name, Tensor value) {
    if (index_.count(name)) {
      throw std::invalid_argument("ParamSet: duplicate name " + name);
    }
    index_[name] = names_.size();
    names_.push_back(std::move(name));
    grads_.emplace_back(value.shape());
    values_.push_back(std::move(value));
  }

  std::size_t size() const { return names_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  Tensor& value(std::size_t i) { return values_.at(i); }
  const Tensor& value(std::size_t i) const { return values_.at(i); }
  Tensor& grad(std::size_t i) { return grads_.at(i); }
  const Tensor& grad(std::size_t i) const { return grads_.at(i); }

  std::size_t index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) {
      throw std::invalid_argument("ParamSet: unknown name " + name);
    }
    return it->second;
  }

  void zero_grads() {
    for (Tensor& g : grads_) {
      for (double& v : g.values()) v = 0.0;
    }
  }

  std::size_t value_count() const {
    std::size_t n = 0;
    for (const Tensor& t : values_) n += t.size();
    return n;
  }

  std::vector<double> flatten_values() const {
    std::vector<double> flat;
    flat.reserve(value_count());
    for (const Tensor& t : values_) {
      flat.insert(flat.end(), t.values().begin(), t.values().end());
    }
    return flat;
  }

  void assign_flat(const std::vector<double>& flat) {
    if (flat.size() != value_count()) {
      throw std::invalid_argument("ParamSet: flat size mismatch");
    }
    std::size_t off = 0;
    for (Tensor& t : values_) {
      for (double& v : t.values()) v = flat[off++];
    }
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
  std::vector<Tensor> grads_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Euclidean norm of the flattened concatenation of all tensors in the set.
inline double grad_norm(const ParamSet& grads) {
  double sq = 0.0;
  for (std::size_t i = 0; i < grads.size(); ++i) {
    for (double v : grads.value(i).values()) sq += v * v;
  }
  return std::sqrt(sq);
}

// Fan-in scaled uniform initialization, bound sqrt(6 / fan_in); biases zero.
inline ParamSet init_mlp_params(const MlpSpec& spec, std::uint64_t seed) {
  validate(spec);
  Rng rng(seed);
  ParamSet params;
  const auto dims = layer_dims(spec);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    Tensor w = Tensor::zeros(dims[l], dims[l + 1]);
    const double bound = std::sqrt(6.0 / static_cast<double>(dims[l]));
    for (double& v : w.values()) v = rng.uniform(-bound, bound);
    params.add("w" + std::to_string(l), std::move(w));
    params.add("b" + std::to_string(l), Tensor::zeros(1, dims[l + 1]));
  }
  return params;
}

// Plain forward pass: batch of rows in, logits out. No tape.
inline Tensor mlp_forward(const ParamSet& params, const MlpSpec& spec,
                          const Tensor& x) {
  validate(spec);
  require_matrix(x, "mlp_forward");
  if (x.cols() != spec.input_dim) {
    throw std::invalid_argument("mlp_forward: input width mismatch");
  }
  x.require_finite("mlp_forward");
  const auto dims = layer_dims(spec);
  Tensor h = x;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const Tensor& w = params.value(params.index_of("w" + std::to_string(l)));
    const Tensor& b = params.value(params.index_of("b" + std::to_string(l)));
    Tensor z = matmul(h, w);
    for (std::size_t r = 0; r < z.rows(); ++r) {
      for (std::size_t c = 0; c < z.cols(); ++c) z.at(r, c) += b.at(0, c);
    }
    if (l + 2 < dims.size()) {
      for (double& v : z.values()) v = v > 0.0 ? v : 0.0;
    }
    h = std::move(z);
  }
  return h;
}

// One recorded forward/loss pass. Multiple inputs may be pushed through the
// same parameter leaves (the TRADES objective needs two).
struct MlpGraph {
  ad::Tape tape;
  MlpSpec spec;
  std::vector<ad::VarId> param_vars;
  std::vector<std::string> param_names;
  std::vector<ad::VarId> inputs;
  std::vector<ad::VarId> logits;
  ad::VarId loss = ad::kNoVar;
};

inline MlpGraph make_graph(const ParamSet& params, const MlpSpec& spec) {
  validate(spec);
  MlpGraph g;
  for (std::size_t i = 0; i < params.size(); ++i) {
    g.param_vars.push_back(g.tape.leaf(params.value(i)));
    g.param_names.push_back(params.name(i));
  }
  g.spec = spec;
  return g;
}

// Records a forward pass for x and returns the logits node.
inline ad::VarId add_forward(MlpGraph& g, const Tensor& x) {
  if (x.cols() != g.spec.input_dim) {
    throw std::invalid_argument("add_forward: input width mismatch");
  }
  const auto dims = layer_dims(g.spec);
  ad::VarId h = g.tape.leaf(x);
  g.inputs.push_back(h);
  std::size_t p = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    ad::VarId w = g.param_vars.at(p++);
    ad::VarId b = g.param_vars.at(p++);
    ad::VarId z = g.tape.add_rowvec(g.tape.matmul(h, w), b);
    h = (l + 2 < dims.size()) ? g.tape.relu(z) : z;
  }
  g.logits.push_back(h);
  return h;
}

// loss = mean_rows H(targets, softmax_T(logits))
inline void attach_soft_ce_loss(MlpGraph& g, ad::VarId logits,
                                const Tensor& targets, double temperature) {
  require_simplex_rows(targets, "attach_soft_ce_loss(targets)");
  const double n = static_cast<double>(targets.rows());
  ad::VarId probs = g.tape.softmax_rows(logits, temperature);
  ad::VarId t = g.tape.leaf(targets);
  ad::VarId prod = g.tape.hadamard(t, g.tape.log_clamped(probs));
  g.loss = g.tape.scale(g.tape.sum_all(prod), -1.0 / n);
}

// loss = mean_rows KL(softmax_T(logits) || ref_probs); the reference
// distribution is a constant, which is what the KL-maximizing attack needs.
inline void attach_kl_to_const_loss(MlpGraph& g, ad::VarId logits,
                                    const Tensor& ref_probs,
                                    double temperature) {
  require_simplex_rows(ref_probs, "attach_kl_to_const_loss(ref)");
  const double n = static_cast<double>(ref_probs.rows());
  ad::VarId p = g.tape.softmax_rows(logits, temperature);
  ad::VarId log_p = g.tape.log_clamped(p);
  ad::VarId log_ref = g.tape.log_clamped(g.tape.leaf(ref_probs));
  ad::VarId gap = g.tape.sub(log_p, log_ref);
  g.loss = g.tape.scale(g.tape.sum_all(g.tape.hadamard(p, gap)), 1.0 / n);
}

// loss = H(targets, softmax(clean)) + beta * mean KL(softmax(adv) || softmax(clean))
// with gradients flowing through both logits nodes.
inline void attach_trades_loss(MlpGraph& g, ad::VarId clean_logits,
                               ad::VarId adv_logits, const Tensor& targets,
                               double beta, double temperature) {
  require_simplex_rows(targets, "attach_trades_loss(targets)");
  const double n = static_cast<double>(targets.rows());
  ad::VarId p_clean = g.tape.softmax_rows(clean_logits, temperature);
  ad::VarId log_p_clean = g.tape.log_clamped(p_clean);
  ad::VarId t = g.tape.leaf(targets);
  ad::VarId ce =
      g.tape.scale(g.tape.sum_all(g.tape.hadamard(t, log_p_clean)), -1.0 / n);
  ad::VarId p_adv = g.tape.softmax_rows(adv_logits, temperature);
  ad::VarId gap = g.tape.sub(g.tape.log_clamped(p_adv), log_p_clean);
  ad::VarId kl =
      g.tape.scale(g.tape.sum_all(g.tape.hadamard(p_adv, gap)), 1.0 / n);
  g.loss = g.tape.add(ce, g.tape.scale(kl, beta));
}

inline double loss_value(const MlpGraph& g) {
  if (g.loss == ad::kNoVar) {
    throw std::logic_error("MlpGraph: no loss attached");
  }
  return g.tape.value(g.loss)[0];
}

inline void run_backward(MlpGraph& g) {
  if (g.loss == ad::kNoVar) {
    throw std::logic_error("MlpGraph: no loss recorded");
  }
  if (!g.tape.backward_done()) g.tape.backward(g.loss);
}

// Gradient of the recorded loss with respect to every parameter, returned as
// a ParamSet whose values are the gradients.
inline ParamSet backward_params(MlpGraph& g) {
  run_backward(g);
  ParamSet grads;
  for (std::size_t i = 0; i < g.param_vars.size(); ++i) {
    grads.add(g.param_names[i], g.tape.grad(g.param_vars[i]));
  }
  return grads;
}

// Same, but written into the grad slots of an existing ParamSet.
inline double backward_params_into(MlpGraph& g, ParamSet& params) {
  run_backward(g);
  if (params.size() != g.param_vars.size()) {
    throw std::invalid_argument("backward_params_into: parameter count mismatch");
  }
  for (std::size_t i = 0; i < g.param_vars.size(); ++i) {
    params.grad(i) = g.tape.grad(g.param_vars[i]);
  }
  return loss_value(g);
}

// Gradient with respect to one recorded input batch.
inline Tensor backward_input(MlpGraph& g, std::size_t input_index = 0) {
  if (input_index >= g.inputs.size()) {
    throw std::logic_error("backward_input: no such recorded input");
  }
  run_backward(g);
  return g.tape.grad(g.inputs[input_index]);
}

// A trained (or in-training) classifier bundled with its inference
// temperature. Probabilities are tempered softmax over the logits.
struct Classifier {
  const ParamSet* params = nullptr;
  const MlpSpec* spec = nullptr;
  double temperature = 1.0;

  Tensor logits(const Tensor& x) const { return mlp_forward(*params, *spec, x); }
  Tensor probs(const Tensor& x) const {
    return softmax_t(logits(x), temperature);
  }
};

}  // namespace sglr
