#pragma once

// The six-layer character classifier: C1 conv 6@5x5, S1 pool, C2 conv 12@5x5,
// S2 pool, F1 300 units with dropout, F2 16 class units.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "blprs/layers.hpp"

namespace blprs {

inline constexpr std::size_t kClassCount = 16;
inline constexpr std::size_t kImageSide = 32;

struct NetworkConfig {
  Shape input_shape{1, kImageSide, kImageSide};
  std::vector<LayerSpec> layers;
  std::size_t class_count = kClassCount;

  static NetworkConfig standard(double dropout_rate = 0.5) {
    NetworkConfig cfg;
    cfg.layers = {
        LayerSpec::convolution(6, 5),
        LayerSpec::max_pool(),
        LayerSpec::convolution(12, 5),
        LayerSpec::max_pool(),
        LayerSpec::fully_connected(300, true, dropout_rate),
        LayerSpec::fully_connected(kClassCount, true),
    };
    return cfg;
  }

  /// Input shape followed by every layer's output shape. Throws if the chain
  /// is inconsistent or does not end in `class_count` units.
  std::vector<Shape> shape_chain() const {
    if (layers.empty()) throw Error("network needs at least one layer");
    if (input_shape.size() != 3 || element_count(input_shape) == 0) {
      throw ShapeError("network input must be a positive CxHxW shape, got " + to_string(input_shape));
    }
    std::vector<Shape> chain{input_shape};
    for (const LayerSpec& spec : layers) chain.push_back(layer_output_shape(spec, chain.back()));
    if (chain.back() != Shape{class_count}) {
      throw ShapeError("network output " + to_string(chain.back()) + " does not match class count " +
                       std::to_string(class_count));
    }
    if (layers.back().kind != LayerKind::FullyConnected) throw Error("last layer must be fully connected");
    return chain;
  }

  /// Sets the dropout rate of every hidden fully-connected layer.
  void set_hidden_dropout(double rate) {
    for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
      if (layers[i].kind == LayerKind::FullyConnected) layers[i].dropout_rate = rate;
    }
  }

  /// Conventional names: C1, S1, C2, ... F1, F2.
  std::vector<std::string> layer_names() const {
    std::vector<std::string> names;
    std::size_t conv = 0, pool = 0, fc = 0;
    for (const LayerSpec& spec : layers) {
      switch (spec.kind) {
        case LayerKind::Convolution: names.push_back("C" + std::to_string(++conv)); break;
        case LayerKind::MaxPool: names.push_back("S" + std::to_string(++pool)); break;
        case LayerKind::FullyConnected: names.push_back("F" + std::to_string(++fc)); break;
      }
    }
    return names;
  }

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

struct Network {
  NetworkConfig config;
  std::vector<LayerState> states;

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const LayerState& s : states) n += s.parameter_count();
    return n;
  }

  friend bool operator==(const Network&, const Network&) = default;
};

/// Glorot-uniform weights, zero biases, deterministic in `seed`.
inline Network build_network(const NetworkConfig& config, std::uint64_t seed) {
  const auto chain = config.shape_chain();
  Network net{config, {}};
  Rng rng(seed);
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const LayerSpec& spec = config.layers[i];
    if (!spec.has_parameters()) {
      net.states.emplace_back();
      continue;
    }
    const Shape wshape = layer_weight_shape(spec, chain[i]);
    double fan_in, fan_out;
    if (spec.kind == LayerKind::Convolution) {
      const double area = static_cast<double>(spec.kernel_size * spec.kernel_size);
      fan_in = static_cast<double>(wshape[1]) * area;
      fan_out = static_cast<double>(wshape[0]) * area;
    } else {
      fan_in = static_cast<double>(wshape[1]);
      fan_out = static_cast<double>(wshape[0]);
    }
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Tensor w(wshape);
    for (double& v : w.data()) v = dist(rng);
    net.states.push_back(LayerState{std::move(w), std::vector<double>(spec.size, 0.0)});
  }
  return net;
}

struct ForwardPass {
  Tensor scores;
  std::vector<ForwardTrace> traces;
};

inline ForwardPass network_forward(const Network& net, const Tensor& image, Mode mode, Rng* rng = nullptr) {
  if (image.shape() != net.config.input_shape) {
    throw ShapeError("network expects input " + to_string(net.config.input_shape) + ", got " +
                     to_string(image.shape()));
  }
  if (net.states.size() != net.config.layers.size()) throw Error("network state count does not match its config");
  std::vector<ForwardTrace> traces;
  traces.reserve(net.config.layers.size());
  Tensor x = image;
  for (std::size_t i = 0; i < net.config.layers.size(); ++i) {
    auto out = layer_forward(net.config.layers[i], net.states[i], x, mode, rng);
    traces.push_back(std::move(out.trace));
    x = std::move(out.output);
  }
  return {std::move(x), std::move(traces)};
}

struct NetworkGradients {
  double loss = 0.0;
  std::vector<LayerState> layers;
};

/// Gradients of mse_loss(scores, target) for every weight and bias.
inline NetworkGradients network_backward(const Network& net, const ForwardPass& pass, const Tensor& target) {
  if (pass.traces.size() != net.config.layers.size()) throw Error("trace count does not match the network");
  if (target.size() != net.config.class_count) {
    throw ShapeError("target has " + std::to_string(target.size()) + " entries, expected " +
                     std::to_string(net.config.class_count));
  }
  auto loss = mse_loss(pass.scores, target);
  NetworkGradients grads{loss.value, std::vector<LayerState>(net.config.layers.size())};
  Tensor g = std::move(loss.gradient);
  for (std::size_t i = net.config.layers.size(); i-- > 0;) {
    auto lg = layer_backward(net.config.layers[i], net.states[i], pass.traces[i], g);
    grads.layers[i] = std::move(lg.params);
    g = std::move(lg.input);
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Parameter accounting
// ---------------------------------------------------------------------------

enum class Convention { Paper, Standard };

inline std::string to_string(Convention c) { return c == Convention::Paper ? "paper" : "standard"; }

struct LayerParamCount {
  std::string name;
  LayerKind kind;
  Shape output_shape;
  std::size_t kernel_size;
  std::size_t count;
};

struct ParamCountReport {
  Convention convention;
  std::vector<LayerParamCount> layers;
  std::size_t total;
};

/// Per-layer parameter counts.
///
/// Standard counts the tensors the network actually trains. Paper reproduces the
/// historical table's arithmetic: a convolution counts (k*k+1) per input
/// map per output map, and the first fully-connected layer after the
/// convolutions counts units * maps * (k*k+1) using the last convolution's
/// maps and kernel. Later fully-connected layers count out * (in + 1).
inline ParamCountReport count_parameters(const NetworkConfig& config, Convention convention) {
  const auto chain = config.shape_chain();
  const auto names = config.layer_names();
  ParamCountReport report{convention, {}, 0};
  const LayerSpec* last_conv = nullptr;
  bool seen_fc = false;

  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const LayerSpec& spec = config.layers[i];
    const Shape& in = chain[i];
    std::size_t n = 0;
    switch (spec.kind) {
      case LayerKind::Convolution: {
        const std::size_t kk = spec.kernel_size * spec.kernel_size;
        n = convention == Convention::Standard ? (kk * in[0] + 1) * spec.size : (kk + 1) * in[0] * spec.size;
        last_conv = &spec;
        break;
      }
      case LayerKind::MaxPool: break;
      case LayerKind::FullyConnected: {
        const std::size_t fan_in = element_count(in);
        if (convention == Convention::Paper && !seen_fc && last_conv != nullptr) {
          n = spec.size * last_conv->size * (last_conv->kernel_size * last_conv->kernel_size + 1);
        } else {
          n = (fan_in + 1) * spec.size;
        }
        seen_fc = true;
        break;
      }
    }
    report.layers.push_back({names[i], spec.kind, chain[i + 1], spec.kernel_size, n});
    report.total += n;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Prediction
// ---------------------------------------------------------------------------

struct Prediction {
  std::size_t class_index;
  Tensor scores;
};

/// Index of the largest score; ties resolve to the lowest index.
inline std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

inline Prediction predict(const Network& net, const Tensor& image) {
  auto pass = network_forward(net, image, Mode::Eval);
  const std::size_t cls = argmax(pass.scores.data());
  return {cls, std::move(pass.scores)};
}

}  // namespace blprs
