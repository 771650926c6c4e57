#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sglr/tensor.hpp"

namespace sglr::ad {

using VarId = std::size_t;
inline constexpr VarId kNoVar = std::numeric_limits<VarId>::max();

// Reverse-mode tape. Nodes are appended in evaluation order, so walking the
// tape backwards is a valid topological order for backpropagation. The op
// set is exactly what the lab's losses and attacks need; everything else is
// composed from it.
class Tape {
 public:
  VarId leaf(Tensor value) {
    return push(std::move(value), {});
  }

  const Tensor& value(VarId id) const { return nodes_.at(id).value; }

  const Tensor& grad(VarId id) const {
    if (!backward_done_) {
      throw std::logic_error("Tape: no backward pass recorded");
    }
    return nodes_.at(id).grad;
  }

  VarId matmul(VarId a, VarId b) {
    Tensor out = sglr::matmul(value(a), value(b));
    VarId id = push(std::move(out), [this, a, b](const Tensor& g) {
      accumulate(a, matmul_nt(g, nodes_[b].value));
      accumulate(b, matmul_tn(nodes_[a].value, g));
    });
    return id;
  }

  // Broadcast-add a 1xK row vector to every row of an NxK matrix.
  VarId add_rowvec(VarId m, VarId row) {
    const Tensor& mv = value(m);
    const Tensor& rv = value(row);
    if (rv.rows() != 1 || rv.cols() != mv.cols()) {
      throw std::invalid_argument("add_rowvec: row vector shape mismatch");
    }
    Tensor out = mv;
    for (std::size_t r = 0; r < out.rows(); ++r) {
      for (std::size_t c = 0; c < out.cols(); ++c) out.at(r, c) += rv.at(0, c);
    }
    return push(std::move(out), [this, m, row](const Tensor& g) {
      accumulate(m, g);
      Tensor gr = Tensor::zeros(1, g.cols());
      for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t c = 0; c < g.cols(); ++c) gr.at(0, c) += g.at(r, c);
      }
      accumulate(row, gr);
    });
  }

  VarId relu(VarId a) {
    Tensor out = value(a);
    for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
    return push(std::move(out), [this, a](const Tensor& g) {
      Tensor ga = g;
      const Tensor& x = nodes_[a].value;
      for (std::size_t i = 0; i < ga.size(); ++i) {
        if (x[i] <= 0.0) ga[i] = 0.0;
      }
      accumulate(a, ga);
    });
  }

  // Row-wise tempered softmax. The probabilities are captured by the pull
  // closure so the backward rule works off the forward result.
  VarId softmax_rows(VarId a, double temperature) {
    Tensor out = softmax_t(value(a), temperature);
    Tensor probs = out;
    return push(std::move(out),
                [this, a, temperature, probs = std::move(probs)](const Tensor& g) {
      Tensor ga = Tensor::zeros(probs.rows(), probs.cols());
      for (std::size_t r = 0; r < probs.rows(); ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < probs.cols(); ++c) {
          dot += g.at(r, c) * probs.at(r, c);
        }
        for (std::size_t c = 0; c < probs.cols(); ++c) {
          ga.at(r, c) = probs.at(r, c) * (g.at(r, c) - dot) / temperature;
        }
      }
      accumulate(a, ga);
    });
  }

  // log(max(x, kProbClip)); zero slope inside the clamped region.
  VarId log_clamped(VarId a) {
    Tensor out = value(a);
    for (double& v : out.values()) v = clipped_log(v);
    return push(std::move(out), [this, a](const Tensor& g) {
      const Tensor& x = nodes_[a].value;
      Tensor ga = g;
      for (std::size_t i = 0; i < ga.size(); ++i) {
        ga[i] = x[i] > kProbClip ? ga[i] / x[i] : 0.0;
      }
      accumulate(a, ga);
    });
  }

  VarId hadamard(VarId a, VarId b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    if (!av.same_shape(bv)) {
      throw std::invalid_argument("hadamard: shape mismatch");
    }
    Tensor out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    return push(std::move(out), [this, a, b](const Tensor& g) {
      Tensor ga = g;
      Tensor gb = g;
      const Tensor& avv = nodes_[a].value;
      const Tensor& bvv = nodes_[b].value;
      for (std::size_t i = 0; i < g.size(); ++i) {
        ga[i] *= bvv[i];
        gb[i] *= avv[i];
      }
      accumulate(a, ga);
      accumulate(b, gb);
    });
  }

  VarId add(VarId a, VarId b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    if (!av.same_shape(bv)) throw std::invalid_argument("add: shape mismatch");
    Tensor out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    return push(std::move(out), [this, a, b](const Tensor& g) {
      accumulate(a, g);
      accumulate(b, g);
    });
  }

  VarId sub(VarId a, VarId b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    if (!av.same_shape(bv)) throw std::invalid_argument("sub: shape mismatch");
    Tensor out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
    return push(std::move(out), [this, a, b](const Tensor& g) {
      accumulate(a, g);
      Tensor gb = g;
      for (double& v : gb.values()) v = -v;
      accumulate(b, gb);
    });
  }

  VarId scale(VarId a, double s) {
    Tensor out = value(a);
    for (double& v : out.values()) v *= s;
    return push(std::move(out), [this, a, s](const Tensor& g) {
      Tensor ga = g;
      for (double& v : ga.values()) v *= s;
      accumulate(a, ga);
    });
  }

  // Sum of all entries as a 1x1 tensor.
  VarId sum_all(VarId a) {
    double total = 0.0;
    for (double v : value(a).values()) total += v;
    Tensor out({1, 1}, {total});
    return push(std::move(out), [this, a](const Tensor& g) {
      Tensor ga = Tensor::full(nodes_[a].value.shape(), g[0]);
      accumulate(a, ga);
    });
  }

  // Seeds d(loss)/d(loss) = 1 and pulls gradients back through the tape.
  void backward(VarId loss) {
    if (loss >= nodes_.size()) {
      throw std::logic_error("Tape: backward on unknown node");
    }
    if (value(loss).size() != 1) {
      throw std::invalid_argument("Tape: backward requires a scalar loss");
    }
    for (Node& n : nodes_) {
      n.grad = Tensor(n.value.shape());
      n.has_grad = false;
    }
    nodes_[loss].grad[0] = 1.0;
    nodes_[loss].has_grad = true;
    for (std::size_t i = nodes_.size(); i-- > 0;) {
      Node& n = nodes_[i];
      if (n.has_grad && n.pull) n.pull(n.grad);
    }
    backward_done_ = true;
  }

  bool backward_done() const { return backward_done_; }
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(const Tensor&)> pull;  // empty for leaves
    bool has_grad = false;
  };

  VarId push(Tensor value, std::function<void(const Tensor&)> pull) {
    value.require_finite("Tape op");
    Node n;
    n.value = std::move(value);
    n.pull = std::move(pull);
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
  }

  void accumulate(VarId id, const Tensor& g) {
    Node& n = nodes_[id];
    if (!n.grad.same_shape(g)) {
      throw std::logic_error("Tape: gradient shape mismatch");
    }
    for (std::size_t i = 0; i < g.size(); ++i) n.grad[i] += g[i];
    n.has_grad = true;
  }

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace sglr::ad
