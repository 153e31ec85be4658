#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "oodkit/common.hpp"
#include "oodkit/io_util.hpp"
#include "oodkit/train.hpp"

namespace oodkit {

// Little-endian binary model container. Layout after the 8-byte magic and the
// u32 format version: u64 K, u8 has_abstention, f64 temperature, f64
// dropout_p, u64 layer count, u64 dims..., then per layer the row-major f64
// weights followed by the f64 biases. Doubles travel as IEEE-754 bit
// patterns, so save/load round-trips are bit-exact.

namespace detail {

constexpr char kModelMagic[8] = {'O', 'O', 'D', 'K', 'M', 'D', 'L', '\0'};
constexpr std::uint32_t kModelVersion = 1;

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

struct ByteReader {
  const std::string& data;
  std::size_t pos = 0;
  const std::string& path;

  void need(std::size_t n) const {
    if (pos + n > data.size())
      throw FormatError(path + ": truncated at byte " + std::to_string(pos));
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(data[pos++]);
  }
  double f64() { return std::bit_cast<double>(u64()); }
};

}  // namespace detail

inline void save_model(const std::filesystem::path& path, const MlpModel& model) {
  model.params.validate();
  std::string out;
  out.append(detail::kModelMagic, 8);
  detail::put_u32(out, detail::kModelVersion);
  detail::put_u64(out, model.num_known_classes);
  out.push_back(model.has_abstention ? 1 : 0);
  detail::put_f64(out, model.temperature);
  detail::put_f64(out, model.dropout_p);
  detail::put_u64(out, model.params.layer_dims.size());
  for (std::size_t d : model.params.layer_dims) detail::put_u64(out, d);
  for (std::size_t l = 0; l < model.params.weights.size(); ++l) {
    for (double v : model.params.weights[l].values) detail::put_f64(out, v);
    for (double v : model.params.biases[l]) detail::put_f64(out, v);
  }
  write_file_atomic(path, out);
}

inline MlpModel load_model(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  const std::string path_str = path.string();
  detail::ByteReader r{data, 0, path_str};
  r.need(8);
  if (std::memcmp(data.data(), detail::kModelMagic, 8) != 0)
    throw FormatError(path_str + ": bad magic at byte 0 (not a model file)");
  r.pos = 8;
  const std::uint32_t version = r.u32();
  if (version != detail::kModelVersion)
    throw FormatError(path_str + ": unsupported format version " + std::to_string(version) +
                      " at byte 8 (expected " + std::to_string(detail::kModelVersion) + ")");

  MlpModel m;
  m.num_known_classes = r.u64();
  m.has_abstention = r.u8() != 0;
  m.temperature = r.f64();
  m.dropout_p = r.f64();
  const std::uint64_t n_dims = r.u64();
  if (n_dims < 2 || n_dims > 64)
    throw FormatError(path_str + ": implausible layer count " + std::to_string(n_dims) +
                      " at byte " + std::to_string(r.pos - 8));
  m.params.layer_dims.resize(n_dims);
  for (std::uint64_t i = 0; i < n_dims; ++i) m.params.layer_dims[i] = r.u64();
  for (std::uint64_t l = 0; l + 1 < n_dims; ++l) {
    const std::size_t rows = m.params.layer_dims[l];
    const std::size_t cols = m.params.layer_dims[l + 1];
    Matrix w(rows, cols);
    for (double& v : w.values) v = r.f64();
    m.params.weights.push_back(std::move(w));
    std::vector<double> b(cols);
    for (double& v : b) v = r.f64();
    m.params.biases.push_back(std::move(b));
  }
  if (r.pos != data.size())
    throw FormatError(path_str + ": " + std::to_string(data.size() - r.pos) +
                      " trailing bytes at byte " + std::to_string(r.pos));
  m.params.validate();
  if (m.num_known_classes + (m.has_abstention ? 1 : 0) != m.params.layer_dims.back())
    throw FormatError(path_str + ": class count does not match output width");
  return m;
}

}  // namespace oodkit
