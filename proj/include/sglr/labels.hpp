#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "sglr/dataset.hpp"
#include "sglr/tensor.hpp"

namespace sglr {

// The label-assignment family: plain one-hot targets, uniform label
// smoothing, and self-guided label refinement backed by a per-example
// exponential moving average of the model's own predictions.
enum class LabelStrategy { hard, uniform_ls, sglr };

enum class EmaInit { hard, uniform, zero_renormalized };

// Which loss the trainer builds from the refined labels: `composed` trains
// adversarial logits against the smoothing blend of buffer and hard label;
// `alg1` trains clean logits against the raw buffer.
enum class LossForm { composed, alg1 };

struct LabelParams {
  LabelStrategy strategy = LabelStrategy::hard;
  double smooth_level = 0.0;   // weight of the refined/uniform part
  double ema_coef = 0.9;       // weight of the buffer history
  double clean_mix = 0.5;      // weight of the clean prediction in the blend
  double temperature = 1.0;    // softmax temperature for refined targets
  EmaInit ema_init = EmaInit::hard;
  LossForm loss_form = LossForm::composed;
};

inline void validate(const LabelParams& p) {
  if (!(p.smooth_level >= 0.0 && p.smooth_level <= 1.0)) {
    throw std::invalid_argument("LabelParams: smooth level must be in [0,1]");
  }
  if (!(p.ema_coef >= 0.0 && p.ema_coef <= 1.0)) {
    throw std::invalid_argument("LabelParams: EMA coefficient must be in [0,1]");
  }
  if (!(p.clean_mix >= 0.0 && p.clean_mix <= 1.0)) {
    throw std::invalid_argument("LabelParams: clean mix must be in [0,1]");
  }
  if (!(p.temperature > 0.0)) {
    throw std::invalid_argument("LabelParams: temperature must be positive");
  }
}

// y = (r/K) * 1 + (1 - r) * y_hard
inline Tensor uniform_ls(const Tensor& y_hard, double smooth_level) {
  require_simplex_rows(y_hard, "uniform_ls");
  if (!(smooth_level >= 0.0 && smooth_level <= 1.0)) {
    throw std::invalid_argument("uniform_ls: smooth level must be in [0,1]");
  }
  const double k = static_cast<double>(y_hard.cols());
  Tensor out = y_hard;
  for (double& v : out.values()) {
    v = smooth_level / k + (1.0 - smooth_level) * v;
  }
  return out;
}

// y = r * probs + (1 - r) * y_hard
inline Tensor self_refine(const Tensor& y_hard, const Tensor& probs_adv,
                          double smooth_level) {
  require_simplex_rows(y_hard, "self_refine(y_hard)");
  require_simplex_rows(probs_adv, "self_refine(probs)");
  if (!y_hard.same_shape(probs_adv)) {
    throw std::invalid_argument("self_refine: shape mismatch");
  }
  if (!(smooth_level >= 0.0 && smooth_level <= 1.0)) {
    throw std::invalid_argument("self_refine: smooth level must be in [0,1]");
  }
  Tensor out = y_hard;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = smooth_level * probs_adv[i] + (1.0 - smooth_level) * out[i];
  }
  return out;
}

// blended = lambda * probs_clean + (1 - lambda) * probs_adv
inline Tensor blend_clean_adv(const Tensor& probs_clean, const Tensor& probs_adv,
                              double clean_mix) {
  require_simplex_rows(probs_clean, "blend_clean_adv(clean)");
  require_simplex_rows(probs_adv, "blend_clean_adv(adv)");
  if (!probs_clean.same_shape(probs_adv)) {
    throw std::invalid_argument("blend_clean_adv: shape mismatch");
  }
  if (!(clean_mix >= 0.0 && clean_mix <= 1.0)) {
    throw std::invalid_argument("blend_clean_adv: mix must be in [0,1]");
  }
  Tensor out = probs_adv;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = clean_mix * probs_clean[i] + (1.0 - clean_mix) * out[i];
  }
  return out;
}

// Per-example soft-label buffer plus the strategy hyperparameters. Owned by
// one training loop; snapshots can be exported at epoch boundaries.
class LabelState {
 public:
  LabelState(const Dataset& ds, const LabelParams& params)
      : params_(params),
        buffer_(Tensor::zeros(ds.n(), static_cast<std::size_t>(ds.classes))),
        initialized_(ds.n(), params.ema_init != EmaInit::zero_renormalized) {
    validate(params_);
    for (std::size_t i = 0; i < ds.n(); ++i) {
      row_of_id_[ds.ids[i]] = i;
      switch (params_.ema_init) {
        case EmaInit::hard:
          buffer_.at(i, static_cast<std::size_t>(ds.labels[i])) = 1.0;
          break;
        case EmaInit::uniform:
          for (std::size_t c = 0; c < buffer_.cols(); ++c) {
            buffer_.at(i, c) = 1.0 / static_cast<double>(ds.classes);
          }
          break;
        case EmaInit::zero_renormalized:
          break;  // stays zero until the first update overwrites it
      }
    }
  }

  const LabelParams& params() const { return params_; }
  std::size_t classes() const { return buffer_.cols(); }

  std::size_t row_of(std::int64_t id) const {
    auto it = row_of_id_.find(id);
    if (it == row_of_id_.end()) {
      throw std::invalid_argument("LabelState: unknown example id");
    }
    return it->second;
  }

  Tensor buffer_rows(const std::vector<std::int64_t>& ids) const {
    Tensor out = Tensor::zeros(ids.size(), buffer_.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const std::size_t r = row_of(ids[i]);
      for (std::size_t c = 0; c < buffer_.cols(); ++c) {
        out.at(i, c) = buffer_.at(r, c);
      }
    }
    return out;
  }

  // buffer <- alpha * buffer + (1 - alpha) * blended. In the
  // zero-renormalized mode the first visit overwrites the empty row, which
  // equals renormalizing (1 - alpha) * blended.
  void ema_update(const std::vector<std::int64_t>& ids, const Tensor& blended) {
    require_simplex_rows(blended, "ema_update");
    if (blended.rows() != ids.size() || blended.cols() != buffer_.cols()) {
      throw std::invalid_argument("ema_update: shape mismatch");
    }
    const double alpha = params_.ema_coef;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const std::size_t r = row_of(ids[i]);
      if (!initialized_[r]) {
        for (std::size_t c = 0; c < buffer_.cols(); ++c) {
          buffer_.at(r, c) = blended.at(i, c);
        }
        initialized_[r] = true;
        continue;
      }
      for (std::size_t c = 0; c < buffer_.cols(); ++c) {
        buffer_.at(r, c) =
            alpha * buffer_.at(r, c) + (1.0 - alpha) * blended.at(i, c);
      }
    }
  }

  // target = r * buffer + (1 - r) * y_hard; rows not yet visited in the
  // zero-renormalized mode fall back to the hard label.
  Tensor compose_target(const std::vector<std::int64_t>& ids,
                        const Tensor& y_hard) const {
    require_simplex_rows(y_hard, "compose_target(y_hard)");
    if (y_hard.rows() != ids.size() || y_hard.cols() != buffer_.cols()) {
      throw std::invalid_argument("compose_target: shape mismatch");
    }
    const double r_mix = params_.smooth_level;
    Tensor out = y_hard;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const std::size_t row = row_of(ids[i]);
      if (!initialized_[row]) continue;
      for (std::size_t c = 0; c < y_hard.cols(); ++c) {
        out.at(i, c) =
            r_mix * buffer_.at(row, c) + (1.0 - r_mix) * y_hard.at(i, c);
      }
    }
    return out;
  }

  // CSV snapshot: id,p0..p{K-1}
  void write_csv(const std::filesystem::path& path) const {
    std::ofstream os(path);
    if (!os) {
      throw std::runtime_error("LabelState: cannot open " + path.string());
    }
    os << "id";
    for (std::size_t c = 0; c < buffer_.cols(); ++c) os << ",p" << c;
    os << "\n";
    std::vector<std::pair<std::int64_t, std::size_t>> ordered(row_of_id_.begin(),
                                                              row_of_id_.end());
    std::sort(ordered.begin(), ordered.end());
    char buf[64];
    for (const auto& [id, r] : ordered) {
      os << id;
      for (std::size_t c = 0; c < buffer_.cols(); ++c) {
        std::snprintf(buf, sizeof buf, "%.17g", buffer_.at(r, c));
        os << ',' << buf;
      }
      os << "\n";
    }
  }

 private:
  LabelParams params_;
  Tensor buffer_;
  std::vector<char> initialized_;
  std::unordered_map<std::int64_t, std::size_t> row_of_id_;
};

// Dispatcher producing the per-batch training targets. For the SGLR strategy
// this also advances the EMA buffer (the per-epoch update happens at the
// batch where an example is visited), with the target composed from the
// freshly updated buffer.
inline Tensor assign_targets(LabelState& state,
                             const std::vector<std::int64_t>& ids,
                             const Tensor& y_hard, const Tensor& probs_clean,
                             const Tensor& probs_adv) {
  switch (state.params().strategy) {
    case LabelStrategy::hard:
      return y_hard;
    case LabelStrategy::uniform_ls:
      return uniform_ls(y_hard, state.params().smooth_level);
    case LabelStrategy::sglr: {
      const Tensor blended =
          blend_clean_adv(probs_clean, probs_adv, state.params().clean_mix);
      state.ema_update(ids, blended);
      return state.compose_target(ids, y_hard);
    }
  }
  throw std::logic_error("assign_targets: unknown strategy");
}

}  // namespace sglr
