#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sglr {

// Lower clamp applied inside every log of a probability. Keeps the entropy /
// KL identities valid to the tolerances the test suite asserts while making
// log(0) impossible.
inline constexpr double kProbClip = 1e-12;

// Dense row-major tensor of 64-bit reals. The universal value type for
// inputs, logits, labels and gradients. Public operations keep every entry
// finite; shape mismatches throw std::invalid_argument.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape)
      : shape_(std::move(shape)), values_(count(shape_), 0.0) {
    check_shape();
  }

  Tensor(std::vector<std::size_t> shape, std::vector<double> values)
      : shape_(std::move(shape)), values_(std::move(values)) {
    check_shape();
    if (values_.size() != count(shape_)) {
      throw std::invalid_argument("Tensor: value count does not match shape");
    }
  }

  static Tensor zeros(std::size_t rows, std::size_t cols) {
    return Tensor({rows, cols});
  }

  static Tensor full(std::vector<std::size_t> shape, double value) {
    Tensor t(std::move(shape));
    for (double& v : t.values_) v = value;
    return t;
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return values_.size(); }

  // 2-d accessors; rank is checked once where it matters, not per call.
  std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const { return shape_.size() < 2 ? 1 : shape_[1]; }

  double& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const {
    return values_[r * cols() + c];
  }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  bool all_finite() const {
    for (double v : values_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  void require_finite(const char* context) const {
    if (!all_finite()) {
      throw std::invalid_argument(std::string(context) +
                                  ": tensor contains non-finite entries");
    }
  }

 private:
  static std::size_t count(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           std::multiplies<>());
  }

  void check_shape() const {
    for (std::size_t d : shape_) {
      if (d == 0) throw std::invalid_argument("Tensor: zero dimension");
    }
  }

  std::vector<std::size_t> shape_;
  std::vector<double> values_;
};

namespace detail {
using EigenRowMajor =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapConst = Eigen::Map<const EigenRowMajor>;
using Map = Eigen::Map<EigenRowMajor>;

inline MapConst as_eigen(const Tensor& t) {
  return MapConst(t.data(), static_cast<Eigen::Index>(t.rows()),
                  static_cast<Eigen::Index>(t.cols()));
}

inline Map as_eigen(Tensor& t) {
  return Map(t.data(), static_cast<Eigen::Index>(t.rows()),
             static_cast<Eigen::Index>(t.cols()));
}
}  // namespace detail

inline void require_matrix(const Tensor& t, const char* context) {
  if (t.rank() != 2) {
    throw std::invalid_argument(std::string(context) + ": expected a matrix");
  }
}

// C = A * B
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: inner dimensions do not match");
  }
  Tensor c = Tensor::zeros(a.rows(), b.cols());
  detail::as_eigen(c).noalias() = detail::as_eigen(a) * detail::as_eigen(b);
  return c;
}

// C = A^T * B
inline Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_tn");
  require_matrix(b, "matmul_tn");
  if (a.rows() != b.rows()) {
    throw std::invalid_argument("matmul_tn: row counts do not match");
  }
  Tensor c = Tensor::zeros(a.cols(), b.cols());
  detail::as_eigen(c).noalias() =
      detail::as_eigen(a).transpose() * detail::as_eigen(b);
  return c;
}

// C = A * B^T
inline Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("matmul_nt: column counts do not match");
  }
  Tensor c = Tensor::zeros(a.rows(), b.rows());
  detail::as_eigen(c).noalias() =
      detail::as_eigen(a) * detail::as_eigen(b).transpose();
  return c;
}

inline double clipped_log(double p) { return std::log(std::max(p, kProbClip)); }

// Throws unless every row is nonnegative and sums to one within tol.
inline void require_simplex_rows(const Tensor& t, const char* context,
                                 double tol = 1e-9) {
  require_matrix(t, context);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < t.cols(); ++c) {
      const double v = t.at(r, c);
      if (!(v >= 0.0)) {
        throw std::invalid_argument(std::string(context) +
                                    ": negative or NaN probability entry");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > tol) {
      throw std::invalid_argument(std::string(context) +
                                  ": row does not sum to one");
    }
  }
}

// Row-wise tempered softmax: exp(z_i / T) normalized per row. Shift-invariant
// in the logits; rows sum to one up to rounding.
inline Tensor softmax_t(const Tensor& logits, double temperature) {
  require_matrix(logits, "softmax_t");
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("softmax_t: temperature must be positive");
  }
  logits.require_finite("softmax_t");
  Tensor out = Tensor::zeros(logits.rows(), logits.cols());
  const std::size_t k = logits.cols();
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    double max_z = logits.at(r, 0);
    for (std::size_t c = 1; c < k; ++c) max_z = std::max(max_z, logits.at(r, c));
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      const double e = std::exp((logits.at(r, c) - max_z) / temperature);
      out.at(r, c) = e;
      sum += e;
    }
    for (std::size_t c = 0; c < k; ++c) out.at(r, c) /= sum;
  }
  return out;
}

// Mean soft-target cross entropy H(target, probs) over rows, logs clamped
// below by kProbClip.
inline double cross_entropy_soft(const Tensor& target, const Tensor& probs) {
  require_simplex_rows(target, "cross_entropy_soft(target)");
  require_simplex_rows(probs, "cross_entropy_soft(probs)");
  if (!target.same_shape(probs)) {
    throw std::invalid_argument("cross_entropy_soft: shape mismatch");
  }
  double total = 0.0;
  for (std::size_t r = 0; r < target.rows(); ++r) {
    for (std::size_t c = 0; c < target.cols(); ++c) {
      total -= target.at(r, c) * clipped_log(probs.at(r, c));
    }
  }
  return total / static_cast<double>(target.rows());
}

// Mean KL(p || q) over rows with the 0*log 0 = 0 convention.
inline double kl_div(const Tensor& p, const Tensor& q) {
  require_simplex_rows(p, "kl_div(p)");
  require_simplex_rows(q, "kl_div(q)");
  if (!p.same_shape(q)) {
    throw std::invalid_argument("kl_div: shape mismatch");
  }
  double total = 0.0;
  for (std::size_t r = 0; r < p.rows(); ++r) {
    for (std::size_t c = 0; c < p.cols(); ++c) {
      const double pv = p.at(r, c);
      if (pv > 0.0) {
        total += pv * (clipped_log(pv) - clipped_log(q.at(r, c)));
      }
    }
  }
  return total / static_cast<double>(p.rows());
}

// Mean Shannon entropy over rows, 0*log 0 = 0.
inline double entropy(const Tensor& p) {
  require_simplex_rows(p, "entropy");
  double total = 0.0;
  for (std::size_t r = 0; r < p.rows(); ++r) {
    for (std::size_t c = 0; c < p.cols(); ++c) {
      const double pv = p.at(r, c);
      if (pv > 0.0) total -= pv * clipped_log(pv);
    }
  }
  return total / static_cast<double>(p.rows());
}

inline Tensor one_hot(const std::vector<int>& labels, int classes) {
  if (classes < 2) throw std::invalid_argument("one_hot: need at least 2 classes");
  Tensor out = Tensor::zeros(labels.size(), static_cast<std::size_t>(classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes) {
      throw std::invalid_argument("one_hot: label out of range");
    }
    out.at(i, static_cast<std::size_t>(labels[i])) = 1.0;
  }
  return out;
}

inline std::vector<int> argmax_rows(const Tensor& t) {
  require_matrix(t, "argmax_rows");
  std::vector<int> out(t.rows());
  for (std::size_t r = 0; r < t.rows(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < t.cols(); ++c) {
      if (t.at(r, c) > t.at(r, best)) best = c;
    }
    out[r] = static_cast<int>(best);
  }
  return out;
}

inline double accuracy(const Tensor& probs, const std::vector<int>& labels) {
  if (probs.rows() != labels.size()) {
    throw std::invalid_argument("accuracy: row count does not match labels");
  }
  const std::vector<int> pred = argmax_rows(probs);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (pred[i] == labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

}  // namespace sglr
