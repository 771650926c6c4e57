#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sglr/net.hpp"
#include "sglr/tensor.hpp"

namespace sglr {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_f64(std::ostream& os, double d) {
  const std::uint64_t v = std::bit_cast<std::uint64_t>(d);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint32_t get_u32(std::istream& is, const char* what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) {
    throw FormatError(std::string("checkpoint truncated reading ") + what);
  }
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline double get_f64(std::istream& is, const char* what) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) {
    throw FormatError(std::string("checkpoint truncated reading ") + what);
  }
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

}  // namespace detail

inline constexpr char kCheckpointMagic[4] = {'S', 'G', 'L', 'R'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout: magic "SGLR", u32 version, u32 input_dim, u32 hidden count,
// hidden widths (u32 each), u32 classes, then for each tensor: u32 name
// length, the UTF-8 name, u32 rank, dims (u32 each), values as 64-bit
// little-endian reals. Tensors run to end of file.
inline void save_checkpoint(const ParamSet& params, const MlpSpec& spec,
                            const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open checkpoint for writing: " + path.string());
  os.write(kCheckpointMagic, 4);
  detail::put_u32(os, kCheckpointVersion);
  detail::put_u32(os, static_cast<std::uint32_t>(spec.input_dim));
  detail::put_u32(os, static_cast<std::uint32_t>(spec.hidden.size()));
  for (std::size_t w : spec.hidden) {
    detail::put_u32(os, static_cast<std::uint32_t>(w));
  }
  detail::put_u32(os, static_cast<std::uint32_t>(spec.classes));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string& name = params.name(i);
    detail::put_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    const Tensor& t = params.value(i);
    detail::put_u32(os, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) {
      detail::put_u32(os, static_cast<std::uint32_t>(d));
    }
    for (double v : t.values()) detail::put_f64(os, v);
  }
  if (!os) throw FormatError("checkpoint write failed: " + path.string());
}

struct Checkpoint {
  ParamSet params;
  MlpSpec spec;
};

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open checkpoint: " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != std::string(kCheckpointMagic, 4)) {
    throw FormatError("bad checkpoint magic: " + path.string());
  }
  const std::uint32_t version = detail::get_u32(is, "version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.spec.input_dim = detail::get_u32(is, "input_dim");
  const std::uint32_t n_hidden = detail::get_u32(is, "hidden count");
  for (std::uint32_t i = 0; i < n_hidden; ++i) {
    ckpt.spec.hidden.push_back(detail::get_u32(is, "hidden width"));
  }
  ckpt.spec.classes = detail::get_u32(is, "classes");
  validate(ckpt.spec);
  while (true) {
    is.peek();
    if (is.eof()) break;
    const std::uint32_t name_len = detail::get_u32(is, "name length");
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) {
      throw FormatError("checkpoint truncated reading tensor name");
    }
    const std::uint32_t rank = detail::get_u32(is, "rank");
    std::vector<std::size_t> shape;
    std::size_t count = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const std::uint32_t dim = detail::get_u32(is, "dim");
      if (dim == 0) throw FormatError("checkpoint has zero tensor dimension");
      shape.push_back(dim);
      count *= dim;
    }
    std::vector<double> values(count);
    for (std::size_t i = 0; i < count; ++i) {
      values[i] = detail::get_f64(is, "tensor values");
    }
    ckpt.params.add(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  return ckpt;
}

}  // namespace sglr
