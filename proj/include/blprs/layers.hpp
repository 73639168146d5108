#pragma once

#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "blprs/kernels.hpp"
#include "blprs/tensor.hpp"

namespace blprs {

using Rng = std::mt19937_64;

enum class LayerKind { Convolution, MaxPool, FullyConnected };
enum class Mode { Train, Eval };

inline std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Convolution: return "Convolution";
    case LayerKind::MaxPool: return "Max-Pooling";
    case LayerKind::FullyConnected: return "Fully-Connected";
  }
  return "?";
}

/// Declarative description of one layer.
struct LayerSpec {
  LayerKind kind = LayerKind::MaxPool;
  std::size_t size = 0;         // output maps (convolution) or units (fully connected)
  std::size_t kernel_size = 0;  // convolution only
  bool apply_sigmoid = false;
  double dropout_rate = 0.0;

  static LayerSpec convolution(std::size_t maps, std::size_t kernel, bool sigmoid = true) {
    return {LayerKind::Convolution, maps, kernel, sigmoid, 0.0};
  }
  static LayerSpec max_pool() { return {LayerKind::MaxPool, 0, 0, false, 0.0}; }
  static LayerSpec fully_connected(std::size_t units, bool sigmoid = true, double dropout = 0.0) {
    return {LayerKind::FullyConnected, units, 0, sigmoid, dropout};
  }

  bool has_parameters() const { return kind != LayerKind::MaxPool; }

  void validate() const {
    if (kind == LayerKind::Convolution && (size == 0 || kernel_size == 0)) {
      throw Error("convolution layer needs positive map count and kernel size");
    }
    if (kind != LayerKind::Convolution && kernel_size != 0) throw Error("kernel size is only valid for convolution");
    if (kind == LayerKind::FullyConnected && size == 0) throw Error("fully-connected layer needs positive unit count");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
      throw Error("dropout rate must lie in [0, 1), got " + std::to_string(dropout_rate));
    }
  }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Output shape of a layer for a given input shape; throws on inconsistency.
inline Shape layer_output_shape(const LayerSpec& spec, const Shape& in) {
  spec.validate();
  switch (spec.kind) {
    case LayerKind::Convolution:
      if (in.size() != 3) throw ShapeError("convolution needs a CxHxW input, got " + to_string(in));
      if (spec.kernel_size > in[1] || spec.kernel_size > in[2]) {
        throw ShapeError("kernel " + std::to_string(spec.kernel_size) + " larger than input " + to_string(in));
      }
      return {spec.size, in[1] - spec.kernel_size + 1, in[2] - spec.kernel_size + 1};
    case LayerKind::MaxPool:
      if (in.size() != 3) throw ShapeError("pooling needs a CxHxW input, got " + to_string(in));
      if (in[1] % 2 != 0 || in[2] % 2 != 0) throw ShapeError("pooling reached odd spatial size " + to_string(in));
      return {in[0], in[1] / 2, in[2] / 2};
    case LayerKind::FullyConnected:
      return {spec.size};
  }
  throw Error("unknown layer kind");
}

/// Shape of the weight tensor for a parametric layer.
inline Shape layer_weight_shape(const LayerSpec& spec, const Shape& in) {
  switch (spec.kind) {
    case LayerKind::Convolution: return {spec.size, in.at(0), spec.kernel_size, spec.kernel_size};
    case LayerKind::FullyConnected: return {spec.size, element_count(in)};
    case LayerKind::MaxPool: break;
  }
  throw Error("pooling layers have no weights");
}

/// Trainable state. Pooling layers carry neither weights nor biases. The same
/// type holds parameter gradients.
struct LayerState {
  std::optional<Tensor> weights;
  std::vector<double> biases;

  std::size_t parameter_count() const { return (weights ? weights->size() : 0) + biases.size(); }

  friend bool operator==(const LayerState&, const LayerState&) = default;
};

/// What a forward call recorded for its backward call.
struct ForwardTrace {
  Shape input_shape;
  std::optional<Tensor> input;       // convolution and fully connected
  std::optional<Tensor> activation;  // sigmoid output before dropout
  std::optional<ArgmaxMask> pool_mask;
  std::optional<Tensor> dropout_mask;
};

struct LayerOutput {
  Tensor output;
  ForwardTrace trace;
};

inline void check_state(const LayerSpec& spec, const LayerState& state, const Shape& in) {
  if (!spec.has_parameters()) {
    if (state.weights || !state.biases.empty()) throw ShapeError("pooling layer must not carry parameters");
    return;
  }
  const Shape expected = layer_weight_shape(spec, in);
  if (!state.weights || state.weights->shape() != expected) {
    throw ShapeError("layer weights should have shape " + to_string(expected) + " for input " + to_string(in));
  }
  if (state.biases.size() != spec.size) throw ShapeError("layer bias count does not match its spec");
}

/// Inverted-dropout mask: 0 with probability `rate`, otherwise 1/(1-rate).
inline Tensor dropout_mask(const Shape& shape, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw Error("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  Tensor mask(shape, 1.0);
  if (rate == 0.0) return mask;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::bernoulli_distribution drop(rate);
  for (double& v : mask.data()) v = drop(rng) ? 0.0 : keep_scale;
  return mask;
}

inline LayerOutput layer_forward(const LayerSpec& spec, const LayerState& state, const Tensor& input, Mode mode,
                                 Rng* rng) {
  const Shape out_shape = layer_output_shape(spec, input.shape());
  check_state(spec, state, input.shape());

  ForwardTrace trace;
  trace.input_shape = input.shape();

  if (spec.kind == LayerKind::MaxPool) {
    auto pooled = maxpool2x2(input);
    trace.pool_mask = std::move(pooled.mask);
    return {std::move(pooled.output), std::move(trace)};
  }

  Tensor z = spec.kind == LayerKind::Convolution
                 ? conv2d_valid(input, *state.weights, state.biases)
                 : Tensor(out_shape, 0.0);
  if (spec.kind == LayerKind::FullyConnected) {
    const Tensor& w = *state.weights;
    const std::size_t n_in = input.size();
    const double* x = input.data().data();
    for (std::size_t u = 0; u < spec.size; ++u) {
      const double* row = w.data().data() + u * n_in;
      double acc = state.biases[u];
      for (std::size_t i = 0; i < n_in; ++i) acc += row[i] * x[i];
      z[u] = acc;
    }
  }
  trace.input = input;

  Tensor y = spec.apply_sigmoid ? sigmoid_map(z) : std::move(z);
  if (spec.apply_sigmoid) trace.activation = y;

  if (mode == Mode::Train && spec.dropout_rate > 0.0) {
    if (rng == nullptr) throw Error("train-mode dropout needs a random stream");
    Tensor mask = dropout_mask(y.shape(), spec.dropout_rate, *rng);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] *= mask[i];
    trace.dropout_mask = std::move(mask);
  }
  return {std::move(y), std::move(trace)};
}

struct LayerGradient {
  Tensor input;
  LayerState params;
};

inline LayerGradient layer_backward(const LayerSpec& spec, const LayerState& state, const ForwardTrace& trace,
                                    const Tensor& grad_out) {
  const Shape out_shape = layer_output_shape(spec, trace.input_shape);
  if (grad_out.shape() != out_shape) {
    throw ShapeError("layer gradient has shape " + to_string(grad_out.shape()) + ", expected " + to_string(out_shape));
  }

  if (spec.kind == LayerKind::MaxPool) {
    if (!trace.pool_mask) throw Error("pooling trace is missing its argmax mask");
    return {maxpool2x2_backward(grad_out, *trace.pool_mask, trace.input_shape), LayerState{}};
  }

  if (!trace.input) throw Error("layer trace is missing its input");
  if (spec.apply_sigmoid != trace.activation.has_value()) throw Error("layer trace does not match its spec");
  check_state(spec, state, trace.input_shape);

  // Back through dropout and sigmoid to the pre-activation gradient.
  Tensor dz = grad_out;
  if (trace.dropout_mask) {
    if (trace.dropout_mask->shape() != out_shape) throw ShapeError("dropout mask shape mismatch");
    for (std::size_t i = 0; i < dz.size(); ++i) dz[i] *= (*trace.dropout_mask)[i];
  }
  if (trace.activation) {
    for (std::size_t i = 0; i < dz.size(); ++i) dz[i] *= sigmoid_derivative_from_output((*trace.activation)[i]);
  }

  if (spec.kind == LayerKind::Convolution) {
    auto g = conv2d_backward(*trace.input, *state.weights, dz);
    return {std::move(g.input), LayerState{std::move(g.kernels), std::move(g.biases)}};
  }

  const Tensor& x = *trace.input;
  const Tensor& w = *state.weights;
  const std::size_t n_in = x.size();
  Tensor grad_in(trace.input_shape, 0.0);
  Tensor grad_w(w.shape(), 0.0);
  std::vector<double> grad_b(spec.size);
  for (std::size_t u = 0; u < spec.size; ++u) {
    const double d = dz[u];
    grad_b[u] = d;
    const double* row = w.data().data() + u * n_in;
    double* grow = grad_w.data().data() + u * n_in;
    for (std::size_t i = 0; i < n_in; ++i) {
      grow[i] = d * x[i];
      grad_in[i] += d * row[i];
    }
  }
  return {std::move(grad_in), LayerState{std::move(grad_w), std::move(grad_b)}};
}

struct Loss {
  double value;
  Tensor gradient;
};

/// Half sum of squared differences and its gradient with respect to `output`.
inline Loss mse_loss(const Tensor& output, const Tensor& target) {
  if (output.size() != target.size()) {
    throw ShapeError("loss needs equal lengths, got " + std::to_string(output.size()) + " and " +
                     std::to_string(target.size()));
  }
  Tensor grad(output.shape());
  double sum = 0.0;
  for (std::size_t k = 0; k < output.size(); ++k) {
    const double d = output[k] - target[k];
    grad[k] = d;
    sum += d * d;
  }
  return {0.5 * sum, std::move(grad)};
}

}  // namespace blprs
