#pragma once

// Binary checkpoint layout (all integers little-endian u32, floats
// little-endian IEEE-754 binary64):
//
//   "BLPR" u8 version=1
//   input channels, height, width; class count; layer count
//   per layer:            kind (0 conv, 1 pool, 2 dense), size, kernel,
//                         sigmoid flag, f64 dropout rate
//   per parametric layer: weight rank, dims..., f64 weights...,
//                         bias count, f64 biases...
//   label count, per label: byte length, UTF-8 bytes

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "blprs/dataset.hpp"
#include "blprs/network.hpp"

namespace blprs {

class CheckpointError : public Error {
 public:
  enum class Kind { Io, BadMagic, UnsupportedVersion, Truncated, ShapeMismatch, InvalidConfig };

  CheckpointError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

inline constexpr std::string_view kCheckpointMagic = "BLPR";
inline constexpr std::uint8_t kCheckpointVersion = 1;

namespace detail {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::size_t v) {
    if (v > UINT32_MAX) throw CheckpointError(CheckpointError::Kind::ShapeMismatch, "count exceeds 32 bits");
    u32(static_cast<std::uint32_t>(v));
  }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  void raw(std::string_view s) { bytes_.append(s); }
  const std::string& bytes() const { return bytes_; }

 private:
  std::string bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  std::string_view take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw CheckpointError(CheckpointError::Kind::Truncated, std::string("checkpoint truncated while reading ") + what);
    }
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint8_t u8(const char* what) { return static_cast<std::uint8_t>(take(1, what)[0]); }
  std::uint32_t u32(const char* what) {
    auto s = take(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{static_cast<std::uint8_t>(s[i])} << (8 * i);
    return v;
  }
  double f64(const char* what) {
    auto s = take(8, what);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= std::uint64_t{static_cast<std::uint8_t>(s[i])} << (8 * i);
    return std::bit_cast<double>(bits);
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

inline std::uint32_t kind_code(LayerKind k) {
  switch (k) {
    case LayerKind::Convolution: return 0;
    case LayerKind::MaxPool: return 1;
    case LayerKind::FullyConnected: return 2;
  }
  return 3;
}

}  // namespace detail

inline std::string encode_checkpoint(const Network& net, const LabelMap& labels) {
  net.config.shape_chain();
  detail::ByteWriter w;
  w.raw(kCheckpointMagic);
  w.u8(kCheckpointVersion);
  for (std::size_t d : net.config.input_shape) w.u32(d);
  w.u32(net.config.class_count);
  w.u32(net.config.layers.size());
  for (const LayerSpec& spec : net.config.layers) {
    w.u32(detail::kind_code(spec.kind));
    w.u32(spec.size);
    w.u32(spec.kernel_size);
    w.u32(std::uint32_t{spec.apply_sigmoid ? 1u : 0u});
    w.f64(spec.dropout_rate);
  }
  for (const LayerState& s : net.states) {
    if (!s.weights) continue;
    w.u32(s.weights->rank());
    for (std::size_t d : s.weights->shape()) w.u32(d);
    for (double v : s.weights->data()) w.f64(v);
    w.u32(s.biases.size());
    for (double v : s.biases) w.f64(v);
  }
  w.u32(labels.size());
  for (const auto& l : labels.labels()) {
    w.u32(l.size());
    w.raw(l);
  }
  return w.bytes();
}

struct Checkpoint {
  Network network;
  LabelMap labels;
};

inline Checkpoint decode_checkpoint(std::string_view bytes) {
  using K = CheckpointError::Kind;
  detail::ByteReader r(bytes);
  if (bytes.size() < kCheckpointMagic.size() || bytes.substr(0, kCheckpointMagic.size()) != kCheckpointMagic) {
    throw CheckpointError(K::BadMagic, "not a checkpoint file (bad magic)");
  }
  r.take(kCheckpointMagic.size(), "magic");
  const std::uint8_t version = r.u8("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError(K::UnsupportedVersion, "unsupported checkpoint version " + std::to_string(version));
  }

  NetworkConfig cfg;
  cfg.input_shape = {r.u32("input shape"), r.u32("input shape"), r.u32("input shape")};
  cfg.class_count = r.u32("class count");
  const std::uint32_t n_layers = r.u32("layer count");
  if (n_layers == 0 || n_layers > 1024) throw CheckpointError(K::InvalidConfig, "implausible layer count");
  cfg.layers.clear();
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    LayerSpec spec;
    const std::uint32_t kind = r.u32("layer kind");
    if (kind > 2) throw CheckpointError(K::InvalidConfig, "unknown layer kind " + std::to_string(kind));
    spec.kind = kind == 0 ? LayerKind::Convolution : kind == 1 ? LayerKind::MaxPool : LayerKind::FullyConnected;
    spec.size = r.u32("layer size");
    spec.kernel_size = r.u32("kernel size");
    const std::uint32_t sig = r.u32("sigmoid flag");
    if (sig > 1) throw CheckpointError(K::InvalidConfig, "invalid sigmoid flag");
    spec.apply_sigmoid = sig == 1;
    spec.dropout_rate = r.f64("dropout rate");
    cfg.layers.push_back(spec);
  }

  std::vector<Shape> chain;
  try {
    chain = cfg.shape_chain();
  } catch (const Error& e) {
    throw CheckpointError(K::InvalidConfig, std::string("checkpoint config is inconsistent: ") + e.what());
  }

  Network net{cfg, {}};
  for (std::size_t i = 0; i < cfg.layers.size(); ++i) {
    const LayerSpec& spec = cfg.layers[i];
    if (!spec.has_parameters()) {
      net.states.emplace_back();
      continue;
    }
    const Shape expected = layer_weight_shape(spec, chain[i]);
    const std::uint32_t rank = r.u32("weight rank");
    if (rank != expected.size()) throw CheckpointError(K::ShapeMismatch, "weight rank does not match config");
    Shape shape;
    for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(r.u32("weight shape"));
    if (shape != expected) {
      throw CheckpointError(K::ShapeMismatch, "layer " + std::to_string(i) + " weights declared " + to_string(shape) +
                                                  ", config implies " + to_string(expected));
    }
    std::vector<double> w(element_count(shape));
    for (double& v : w) v = r.f64("weights");
    const std::uint32_t n_bias = r.u32("bias count");
    if (n_bias != spec.size) throw CheckpointError(K::ShapeMismatch, "bias count does not match config");
    std::vector<double> b(n_bias);
    for (double& v : b) v = r.f64("biases");
    net.states.push_back(LayerState{Tensor(shape, std::move(w)), std::move(b)});
  }

  const std::uint32_t n_labels = r.u32("label count");
  if (n_labels != cfg.class_count) throw CheckpointError(K::ShapeMismatch, "label count does not match class count");
  std::vector<std::string> labels;
  for (std::uint32_t i = 0; i < n_labels; ++i) {
    const std::uint32_t len = r.u32("label length");
    labels.emplace_back(r.take(len, "label"));
  }
  if (!r.at_end()) throw CheckpointError(K::ShapeMismatch, "checkpoint has trailing bytes after declared payload");
  try {
    return {std::move(net), LabelMap(std::move(labels))};
  } catch (const DatasetError& e) {
    throw CheckpointError(K::InvalidConfig, std::string("checkpoint labels invalid: ") + e.what());
  }
}

inline void save_checkpoint(const Network& net, const LabelMap& labels, const std::filesystem::path& path) {
  try {
    write_file_atomic(path, encode_checkpoint(net, labels));
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(CheckpointError::Kind::Io, std::string("cannot save checkpoint: ") + e.what());
  }
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointError::Kind::Io, "cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace blprs
