#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sglr/checkpoint.hpp"
#include "sglr/rng.hpp"
#include "sglr/tensor.hpp"

namespace sglr {

// Feature matrix in [0,1], hard labels, the pre-noise labels, and a stable
// id per example. Immutable once built; noise and corruption return copies.
struct Dataset {
  Tensor features;  // N x d
  std::vector<int> labels;
  std::vector<int> pristine_labels;
  std::vector<std::int64_t> ids;
  int classes = 0;

  std::size_t n() const { return labels.size(); }
  std::size_t dim() const { return features.cols(); }
};

inline void validate(const Dataset& ds) {
  if (ds.classes < 2) throw std::invalid_argument("Dataset: classes < 2");
  if (ds.features.rows() != ds.n() || ds.pristine_labels.size() != ds.n() ||
      ds.ids.size() != ds.n()) {
    throw std::invalid_argument("Dataset: field lengths disagree");
  }
  for (std::size_t i = 0; i < ds.n(); ++i) {
    if (ds.labels[i] < 0 || ds.labels[i] >= ds.classes ||
        ds.pristine_labels[i] < 0 || ds.pristine_labels[i] >= ds.classes) {
      throw std::invalid_argument("Dataset: label out of range");
    }
  }
  for (double v : ds.features.values()) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument("Dataset: feature outside [0,1]");
    }
  }
  std::vector<std::int64_t> sorted = ds.ids;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw std::invalid_argument("Dataset: duplicate ids");
  }
}

namespace detail {

// Per-feature min-max rescale into [0,1]; constant columns map to 0.5.
inline void rescale_unit_box(Tensor& features) {
  const std::size_t n = features.rows(), d = features.cols();
  for (std::size_t c = 0; c < d; ++c) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t r = 0; r < n; ++r) {
      lo = std::min(lo, features.at(r, c));
      hi = std::max(hi, features.at(r, c));
    }
    const double span = hi - lo;
    for (std::size_t r = 0; r < n; ++r) {
      features.at(r, c) =
          span > 0.0 ? (features.at(r, c) - lo) / span : 0.5;
    }
  }
}

}  // namespace detail

// Isotropic Gaussian blobs with class means laid out on a circle of radius
// `separation` in the first two feature dimensions; remaining dimensions are
// pure noise. Features are min-max rescaled into the unit box.
inline Dataset gen_gaussian_mixture(int classes, std::size_t n_per_class,
                                    std::size_t dim, double separation,
                                    std::uint64_t seed) {
  if (classes < 2) throw std::invalid_argument("gen_gaussian_mixture: K >= 2");
  if (dim < 2) throw std::invalid_argument("gen_gaussian_mixture: dim >= 2");
  if (!(separation >= 0.0)) {
    throw std::invalid_argument("gen_gaussian_mixture: separation >= 0");
  }
  Rng rng(seed);
  const std::size_t n = n_per_class * static_cast<std::size_t>(classes);
  Dataset ds;
  ds.classes = classes;
  ds.features = Tensor::zeros(n, dim);
  ds.labels.resize(n);
  ds.ids.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int k = static_cast<int>(i % static_cast<std::size_t>(classes));
    const double angle =
        2.0 * std::numbers::pi * static_cast<double>(k) / classes;
    ds.labels[i] = k;
    ds.ids[i] = static_cast<std::int64_t>(i);
    for (std::size_t c = 0; c < dim; ++c) {
      double mean = 0.0;
      if (c == 0) mean = separation * std::cos(angle);
      if (c == 1) mean = separation * std::sin(angle);
      ds.features.at(i, c) = rng.normal(mean, 1.0);
    }
  }
  ds.pristine_labels = ds.labels;
  detail::rescale_unit_box(ds.features);
  return ds;
}

// Two interleaved half-circles, K = 2, two features.
inline Dataset gen_two_moons(std::size_t n, double noise_sd,
                             std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("gen_two_moons: n >= 2");
  if (!(noise_sd >= 0.0)) {
    throw std::invalid_argument("gen_two_moons: noise_sd >= 0");
  }
  Rng rng(seed);
  Dataset ds;
  ds.classes = 2;
  ds.features = Tensor::zeros(n, 2);
  ds.labels.resize(n);
  ds.ids.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int k = static_cast<int>(i % 2);
    const double t = std::numbers::pi * rng.uniform();
    double fx, fy;
    if (k == 0) {
      fx = std::cos(t);
      fy = std::sin(t);
    } else {
      fx = 1.0 - std::cos(t);
      fy = 0.5 - std::sin(t);
    }
    ds.features.at(i, 0) = fx + rng.normal(0.0, noise_sd);
    ds.features.at(i, 1) = fy + rng.normal(0.0, noise_sd);
    ds.labels[i] = k;
    ds.ids[i] = static_cast<std::int64_t>(i);
  }
  ds.pristine_labels = ds.labels;
  detail::rescale_unit_box(ds.features);
  return ds;
}

// IDX ingestion (big-endian), magic 0x803 for images and 0x801 for labels.
// Pixels are scaled by 1/255. limit = 0 loads everything.
inline Dataset load_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path,
                        std::size_t limit = 0) {
  auto read_u32be = [](std::istream& is, const char* what) -> std::uint32_t {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) {
      throw FormatError(std::string("IDX truncated reading ") + what);
    }
    return (static_cast<std::uint32_t>(b[0]) << 24) |
           (static_cast<std::uint32_t>(b[1]) << 16) |
           (static_cast<std::uint32_t>(b[2]) << 8) |
           static_cast<std::uint32_t>(b[3]);
  };

  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw FormatError("cannot open IDX images: " + images_path.string());
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw FormatError("cannot open IDX labels: " + labels_path.string());

  if (read_u32be(img, "image magic") != 0x00000803u) {
    throw FormatError("IDX image magic mismatch");
  }
  if (read_u32be(lab, "label magic") != 0x00000801u) {
    throw FormatError("IDX label magic mismatch");
  }
  const std::uint32_t n_img = read_u32be(img, "image count");
  const std::uint32_t rows = read_u32be(img, "rows");
  const std::uint32_t cols = read_u32be(img, "cols");
  const std::uint32_t n_lab = read_u32be(lab, "label count");
  if (n_img != n_lab) {
    throw FormatError("IDX image/label count mismatch");
  }
  const std::size_t take =
      limit == 0 ? n_img : std::min<std::size_t>(limit, n_img);
  const std::size_t d = static_cast<std::size_t>(rows) * cols;

  Dataset ds;
  ds.features = Tensor::zeros(take, d);
  ds.labels.resize(take);
  ds.ids.resize(take);
  std::vector<unsigned char> pixel(d);
  int max_label = 0;
  for (std::size_t i = 0; i < take; ++i) {
    if (!img.read(reinterpret_cast<char*>(pixel.data()),
                  static_cast<std::streamsize>(d))) {
      throw FormatError("IDX truncated reading pixels");
    }
    for (std::size_t c = 0; c < d; ++c) {
      ds.features.at(i, c) = static_cast<double>(pixel[c]) / 255.0;
    }
    char y;
    if (!lab.read(&y, 1)) throw FormatError("IDX truncated reading labels");
    ds.labels[i] = static_cast<unsigned char>(y);
    max_label = std::max(max_label, ds.labels[i]);
    ds.ids[i] = static_cast<std::int64_t>(i);
  }
  ds.classes = std::max(max_label + 1, 2);
  ds.pristine_labels = ds.labels;
  return ds;
}

// Label corruption. symmetric_all resamples uniformly over all classes with
// probability rate (expected corrupted fraction rate*(K-1)/K); symmetric_wrong
// flips to a uniformly chosen wrong class with probability rate; asymmetric
// samples the new label from the transition-matrix row of the current label.
struct NoiseSpec {
  enum class Mode { symmetric_all, symmetric_wrong, asymmetric };
  Mode mode = Mode::symmetric_all;
  double rate = 0.0;
  std::optional<Tensor> transition;  // K x K row-stochastic, asymmetric mode
};

inline void validate(const NoiseSpec& spec, int classes) {
  if (!(spec.rate >= 0.0 && spec.rate < 1.0)) {
    throw std::invalid_argument("NoiseSpec: rate must be in [0,1)");
  }
  if (spec.mode == NoiseSpec::Mode::asymmetric) {
    if (!spec.transition.has_value()) {
      throw std::invalid_argument("NoiseSpec: asymmetric mode needs a transition matrix");
    }
    const Tensor& t = *spec.transition;
    if (t.rank() != 2 || t.rows() != static_cast<std::size_t>(classes) ||
        t.cols() != static_cast<std::size_t>(classes)) {
      throw std::invalid_argument("NoiseSpec: transition must be K x K");
    }
    for (std::size_t r = 0; r < t.rows(); ++r) {
      double sum = 0.0;
      for (std::size_t c = 0; c < t.cols(); ++c) {
        if (!(t.at(r, c) >= 0.0)) {
          throw std::invalid_argument("NoiseSpec: negative transition entry");
        }
        sum += t.at(r, c);
      }
      if (std::abs(sum - 1.0) > 1e-9) {
        throw std::invalid_argument("NoiseSpec: transition row does not sum to 1");
      }
      for (std::size_t c = 0; c < t.cols(); ++c) {
        if (c != r && !(t.at(r, c) < t.at(r, r))) {
          throw std::invalid_argument(
              "NoiseSpec: off-diagonal rate must stay below the diagonal");
        }
      }
    }
  }
}

inline Dataset inject_label_noise(const Dataset& ds, const NoiseSpec& spec,
                                  std::uint64_t seed) {
  validate(spec, ds.classes);
  Dataset out = ds;
  Rng rng(seed);
  const int k = ds.classes;
  for (std::size_t i = 0; i < out.n(); ++i) {
    switch (spec.mode) {
      case NoiseSpec::Mode::symmetric_all:
        if (rng.uniform() < spec.rate) {
          out.labels[i] = static_cast<int>(rng.index(k));
        }
        break;
      case NoiseSpec::Mode::symmetric_wrong:
        if (rng.uniform() < spec.rate) {
          const int offset = 1 + static_cast<int>(rng.index(k - 1));
          out.labels[i] = (out.labels[i] + offset) % k;
        }
        break;
      case NoiseSpec::Mode::asymmetric: {
        const Tensor& t = *spec.transition;
        double u = rng.uniform();
        int picked = k - 1;
        double acc = 0.0;
        for (int c = 0; c < k; ++c) {
          acc += t.at(static_cast<std::size_t>(out.labels[i]), c);
          if (u < acc) {
            picked = c;
            break;
          }
        }
        out.labels[i] = picked;
        break;
      }
    }
  }
  return out;
}

enum class InputCorruption { gaussian, random_pixels };

// gaussian adds N(0, amount^2) and clamps back to the unit box;
// random_pixels replaces each feature entry with U[0,1] with probability
// amount.
inline Dataset corrupt_inputs(const Dataset& ds, InputCorruption kind,
                              double amount, std::uint64_t seed) {
  if (!(amount >= 0.0)) {
    throw std::invalid_argument("corrupt_inputs: amount must be nonnegative");
  }
  if (kind == InputCorruption::random_pixels && amount > 1.0) {
    throw std::invalid_argument("corrupt_inputs: fraction must be <= 1");
  }
  Dataset out = ds;
  Rng rng(seed);
  for (double& v : out.features.values()) {
    if (kind == InputCorruption::gaussian) {
      v = std::clamp(v + rng.normal(0.0, amount), 0.0, 1.0);
    } else if (rng.uniform() < amount) {
      v = rng.uniform();
    }
  }
  return out;
}

struct Batch {
  std::vector<std::int64_t> ids;
  Tensor x;
  std::vector<int> y;
};

// Seeded permutation of the dataset split into batches; every example
// appears exactly once per epoch and ids ride along for label-state lookups.
inline std::vector<Batch> batches(const Dataset& ds, std::size_t batch_size,
                                  std::uint64_t epoch_seed) {
  if (batch_size == 0) throw std::invalid_argument("batches: batch_size > 0");
  Rng rng(epoch_seed);
  const std::vector<std::size_t> order = rng.permutation(ds.n());
  std::vector<Batch> out;
  for (std::size_t start = 0; start < ds.n(); start += batch_size) {
    const std::size_t count = std::min(batch_size, ds.n() - start);
    Batch b;
    b.ids.resize(count);
    b.y.resize(count);
    b.x = Tensor::zeros(count, ds.dim());
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t src = order[start + i];
      b.ids[i] = ds.ids[src];
      b.y[i] = ds.labels[src];
      for (std::size_t c = 0; c < ds.dim(); ++c) {
        b.x.at(i, c) = ds.features.at(src, c);
      }
    }
    out.push_back(std::move(b));
  }
  return out;
}

// Deterministic shuffled split into (first n_train, rest).
inline std::pair<Dataset, Dataset> split_dataset(const Dataset& ds,
                                                 std::size_t n_train,
                                                 std::uint64_t seed) {
  if (n_train == 0 || n_train >= ds.n()) {
    throw std::invalid_argument("split_dataset: n_train must leave both sides nonempty");
  }
  Rng rng(seed);
  const std::vector<std::size_t> order = rng.permutation(ds.n());
  auto take = [&](std::size_t begin, std::size_t end) {
    Dataset part;
    part.classes = ds.classes;
    part.features = Tensor::zeros(end - begin, ds.dim());
    for (std::size_t i = begin; i < end; ++i) {
      const std::size_t src = order[i];
      part.labels.push_back(ds.labels[src]);
      part.pristine_labels.push_back(ds.pristine_labels[src]);
      part.ids.push_back(ds.ids[src]);
      for (std::size_t c = 0; c < ds.dim(); ++c) {
        part.features.at(i - begin, c) = ds.features.at(src, c);
      }
    }
    return part;
  };
  return {take(0, n_train), take(n_train, ds.n())};
}

// CSV schema: id,label,pristine_label,f0..f{d-1}
inline void write_dataset_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open dataset CSV for writing: " + path.string());
  os << "id,label,pristine_label";
  for (std::size_t c = 0; c < ds.dim(); ++c) os << ",f" << c;
  os << "\n";
  char buf[64];
  for (std::size_t i = 0; i < ds.n(); ++i) {
    os << ds.ids[i] << ',' << ds.labels[i] << ',' << ds.pristine_labels[i];
    for (std::size_t c = 0; c < ds.dim(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", ds.features.at(i, c));
      os << ',' << buf;
    }
    os << "\n";
  }
}

inline Dataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open dataset CSV: " + path.string());
  std::string header;
  if (!std::getline(is, header) ||
      header.rfind("id,label,pristine_label", 0) != 0) {
    throw FormatError("dataset CSV header mismatch: " + path.string());
  }
  std::size_t dim = 0;
  for (char c : header) {
    if (c == ',') ++dim;
  }
  if (dim < 3) throw FormatError("dataset CSV has no feature columns");
  dim -= 2;

  std::vector<double> values;
  Dataset ds;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != dim + 3) {
      throw FormatError("dataset CSV row has wrong column count");
    }
    ds.ids.push_back(std::stoll(cells[0]));
    ds.labels.push_back(std::stoi(cells[1]));
    ds.pristine_labels.push_back(std::stoi(cells[2]));
    for (std::size_t c = 0; c < dim; ++c) {
      values.push_back(std::stod(cells[3 + c]));
    }
  }
  if (ds.ids.empty()) throw FormatError("dataset CSV has no rows");
  ds.features = Tensor({ds.ids.size(), dim}, std::move(values));
  int max_label = 1;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    max_label = std::max({max_label, ds.labels[i], ds.pristine_labels[i]});
  }
  ds.classes = max_label + 1;
  validate(ds);
  return ds;
}

// Fraction of labels that differ from the pristine labels.
inline double corrupted_fraction(const Dataset& ds) {
  std::size_t corrupted = 0;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    if (ds.labels[i] != ds.pristine_labels[i]) ++corrupted;
  }
  return static_cast<double>(corrupted) / static_cast<double>(ds.n());
}

}  // namespace sglr
