#pragma once

// Raw numeric kernels: valid convolution, 2x2 max-pooling and the logistic
// sigmoid. All functions are pure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "blprs/tensor.hpp"

namespace blprs {

// ---------------------------------------------------------------------------
// Valid convolution, stride 1, dense input-channel summation.
// ---------------------------------------------------------------------------

inline void check_conv_shapes(const Tensor& input, const Tensor& kernels, std::size_t bias_count) {
  if (input.rank() != 3) throw ShapeError("convolution input must be rank 3, got " + to_string(input.shape()));
  if (kernels.rank() != 4) throw ShapeError("convolution kernels must be rank 4, got " + to_string(kernels.shape()));
  if (kernels.dim(1) != input.dim(0)) {
    throw ShapeError("convolution channel mismatch: input " + to_string(input.shape()) + ", kernels " +
                     to_string(kernels.shape()));
  }
  if (kernels.dim(2) > input.dim(1) || kernels.dim(3) > input.dim(2)) {
    throw ShapeError("convolution kernel " + to_string(kernels.shape()) + " larger than input " +
                     to_string(input.shape()));
  }
  if (bias_count != kernels.dim(0)) {
    throw ShapeError("convolution expects " + std::to_string(kernels.dim(0)) + " biases, got " +
                     std::to_string(bias_count));
  }
}

/// out[o,y,x] = bias[o] + sum_{c,dy,dx} input[c,y+dy,x+dx] * kernels[o,c,dy,dx]
inline Tensor conv2d_valid(const Tensor& input, const Tensor& kernels, std::span<const double> biases) {
  check_conv_shapes(input, kernels, biases.size());
  const std::size_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t cout = kernels.dim(0), kh = kernels.dim(2), kw = kernels.dim(3);
  const std::size_t oh = h - kh + 1, ow = w - kw + 1;

  Tensor out({cout, oh, ow});
  const double* in = input.data().data();
  const double* k = kernels.data().data();
  double* o = out.data().data();

  for (std::size_t m = 0; m < cout; ++m) {
    double* omap = o + m * oh * ow;
    std::fill(omap, omap + oh * ow, biases[m]);
    for (std::size_t c = 0; c < cin; ++c) {
      const double* imap = in + c * h * w;
      const double* kmap = k + (m * cin + c) * kh * kw;
      for (std::size_t dy = 0; dy < kh; ++dy) {
        for (std::size_t dx = 0; dx < kw; ++dx) {
          const double kv = kmap[dy * kw + dx];
          for (std::size_t y = 0; y < oh; ++y) {
            const double* irow = imap + (y + dy) * w + dx;
            double* orow = omap + y * ow;
            for (std::size_t x = 0; x < ow; ++x) orow[x] += kv * irow[x];
          }
        }
      }
    }
  }
  return out;
}

struct ConvGradients {
  Tensor input;
  Tensor kernels;
  std::vector<double> biases;
};

/// Exact gradients of conv2d_valid with respect to input, kernels and biases.
inline ConvGradients conv2d_backward(const Tensor& input, const Tensor& kernels, const Tensor& grad_out) {
  check_conv_shapes(input, kernels, kernels.rank() == 4 ? kernels.dim(0) : 0);
  const std::size_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t cout = kernels.dim(0), kh = kernels.dim(2), kw = kernels.dim(3);
  const std::size_t oh = h - kh + 1, ow = w - kw + 1;
  if (grad_out.shape() != Shape{cout, oh, ow}) {
    throw ShapeError("convolution gradient has shape " + to_string(grad_out.shape()) + ", expected " +
                     to_string(Shape{cout, oh, ow}));
  }

  ConvGradients g{Tensor(input.shape()), Tensor(kernels.shape()), std::vector<double>(cout, 0.0)};
  const double* in = input.data().data();
  const double* k = kernels.data().data();
  const double* go = grad_out.data().data();
  double* gin = g.input.data().data();
  double* gk = g.kernels.data().data();

  for (std::size_t m = 0; m < cout; ++m) {
    const double* gmap = go + m * oh * ow;
    double bias_sum = 0.0;
    for (std::size_t i = 0; i < oh * ow; ++i) bias_sum += gmap[i];
    g.biases[m] = bias_sum;

    for (std::size_t c = 0; c < cin; ++c) {
      const double* imap = in + c * h * w;
      double* gimap = gin + c * h * w;
      const double* kmap = k + (m * cin + c) * kh * kw;
      double* gkmap = gk + (m * cin + c) * kh * kw;
      for (std::size_t dy = 0; dy < kh; ++dy) {
        for (std::size_t dx = 0; dx < kw; ++dx) {
          const double kv = kmap[dy * kw + dx];
          double acc = 0.0;
          for (std::size_t y = 0; y < oh; ++y) {
            const double* irow = imap + (y + dy) * w + dx;
            double* girow = gimap + (y + dy) * w + dx;
            const double* grow = gmap + y * ow;
            for (std::size_t x = 0; x < ow; ++x) {
              acc += grow[x] * irow[x];
              girow[x] += grow[x] * kv;
            }
          }
          gkmap[dy * kw + dx] = acc;
        }
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// 2x2 max-pooling
// ---------------------------------------------------------------------------

/// Winning offset inside each 2x2 window, one entry per pooled output cell.
class ArgmaxMask {
 public:
  ArgmaxMask(Shape shape, std::vector<std::uint8_t> offsets) : shape_(std::move(shape)), offsets_(std::move(offsets)) {
    if (offsets_.size() != element_count(shape_)) throw ShapeError("argmax mask size does not match its shape");
    for (std::uint8_t o : offsets_) {
      if (o > 3) throw ShapeError("argmax offset outside the 2x2 window");
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return offsets_.size(); }
  std::size_t row(std::size_t i) const { return offsets_[i] >> 1; }
  std::size_t col(std::size_t i) const { return offsets_[i] & 1; }

  friend bool operator==(const ArgmaxMask&, const ArgmaxMask&) = default;

 private:
  Shape shape_;
  std::vector<std::uint8_t> offsets_;  // row * 2 + col
};

struct PoolResult {
  Tensor output;
  ArgmaxMask mask;
};

/// Max over disjoint 2x2 windows. Ties go to the first maximum in row-major
/// window order.
inline PoolResult maxpool2x2(const Tensor& input) {
  if (input.rank() != 3) throw ShapeError("pooling input must be rank 3, got " + to_string(input.shape()));
  const std::size_t ch = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (h % 2 != 0 || w % 2 != 0) {
    throw ShapeError("pooling needs even spatial dimensions, got " + to_string(input.shape()));
  }
  const Shape out_shape{ch, h / 2, w / 2};
  Tensor out(out_shape);
  std::vector<std::uint8_t> offsets(out.size());

  std::size_t i = 0;
  for (std::size_t c = 0; c < ch; ++c) {
    for (std::size_t y = 0; y < h / 2; ++y) {
      for (std::size_t x = 0; x < w / 2; ++x, ++i) {
        double best = input(c, 2 * y, 2 * x);
        std::uint8_t arg = 0;
        for (std::uint8_t o = 1; o < 4; ++o) {
          const double v = input(c, 2 * y + (o >> 1), 2 * x + (o & 1));
          if (v > best) {
            best = v;
            arg = o;
          }
        }
        out[i] = best;
        offsets[i] = arg;
      }
    }
  }
  return {std::move(out), ArgmaxMask(out_shape, std::move(offsets))};
}

/// Routes each pooled gradient back to the recorded argmax position.
inline Tensor maxpool2x2_backward(const Tensor& grad_out, const ArgmaxMask& mask, const Shape& input_shape) {
  if (grad_out.shape() != mask.shape()) {
    throw ShapeError("pooling gradient " + to_string(grad_out.shape()) + " does not match mask " +
                     to_string(mask.shape()));
  }
  if (input_shape.size() != 3 || input_shape[0] != mask.shape()[0] || input_shape[1] != 2 * mask.shape()[1] ||
      input_shape[2] != 2 * mask.shape()[2]) {
    throw ShapeError("pooling input shape " + to_string(input_shape) + " inconsistent with mask " +
                     to_string(mask.shape()));
  }
  Tensor grad(input_shape);
  const std::size_t ch = mask.shape()[0], oh = mask.shape()[1], ow = mask.shape()[2];
  std::size_t i = 0;
  for (std::size_t c = 0; c < ch; ++c) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x, ++i) {
        grad(c, 2 * y + mask.row(i), 2 * x + mask.col(i)) += grad_out[i];
      }
    }
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Sigmoid
// ---------------------------------------------------------------------------

/// Logistic function, kept strictly inside (0, 1) for every finite input.
inline double sigmoid(double x) {
  double y;
  if (x >= 0.0) {
    y = 1.0 / (1.0 + std::exp(-x));
  } else {
    const double e = std::exp(x);
    y = e / (1.0 + e);
  }
  constexpr double lo = std::numeric_limits<double>::denorm_min();
  constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
  return std::clamp(y, lo, hi);
}

/// Derivative expressed through the sigmoid output y.
inline double sigmoid_derivative_from_output(double y) { return y * (1.0 - y); }

inline Tensor sigmoid_map(const Tensor& t) {
  Tensor out(t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = sigmoid(t[i]);
  return out;
}

}  // namespace blprs
