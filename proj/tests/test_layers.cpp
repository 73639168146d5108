#include <gtest/gtest.h>

#include <random>

#include "blprs/layers.hpp"
#include "oracles.hpp"

using namespace blprs;

namespace {

LayerState random_state(const LayerSpec& spec, const Shape& in, std::mt19937_64& rng) {
  if (!spec.has_parameters()) return {};
  return {oracle::random_tensor(layer_weight_shape(spec, in), rng), oracle::random_tensor({spec.size}, rng).values()};
}

// Checks every gradient of one layer against central differences, with the
// dropout mask held fixed by replaying the same seed on each evaluation.
void expect_layer_gradients(const LayerSpec& spec, const Shape& in_shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  LayerState state = random_state(spec, in_shape, rng);
  Tensor input = oracle::random_tensor(in_shape, rng, -2.0, 2.0);
  const Shape out_shape = layer_output_shape(spec, in_shape);
  const Tensor proj = oracle::random_tensor(out_shape, rng);
  const std::uint64_t mask_seed = seed * 7919 + 1;

  auto run = [&] {
    Rng r(mask_seed);
    return layer_forward(spec, state, input, Mode::Train, &r);
  };
  if (spec.kind == LayerKind::MaxPool) ASSERT_GT(oracle::min_window_gap(input), 1e-3);
  auto loss = [&] { return oracle::project(run().output, proj); };

  const auto fwd = run();
  const auto g = layer_backward(spec, state, fwd.trace, proj);
  ASSERT_EQ(g.input.shape(), in_shape);
  EXPECT_LE(oracle::max_relative_error(g.input.data(), oracle::central_difference(input.data(), loss)), 1e-5);
  if (spec.has_parameters()) {
    ASSERT_EQ(g.params.weights->shape(), state.weights->shape());
    EXPECT_LE(oracle::max_relative_error(g.params.weights->data(),
                                         oracle::central_difference(state.weights->data(), loss)),
              1e-5);
    EXPECT_LE(oracle::max_relative_error(g.params.biases, oracle::central_difference(state.biases, loss)), 1e-5);
  }
}

}  // namespace

TEST(LayerForward, ZeroDenseLayerOutputsHalf) {
  const auto spec = LayerSpec::fully_connected(5);
  const LayerState state{Tensor({5, 12}, 0.0), std::vector<double>(5, 0.0)};
  std::mt19937_64 rng(1);
  const auto out = layer_forward(spec, state, oracle::random_tensor({3, 2, 2}, rng), Mode::Eval, nullptr);
  for (double v : out.output.data()) EXPECT_EQ(v, 0.5);
}

TEST(LayerForward, ConvolutionShape) {
  const auto spec = LayerSpec::convolution(6, 5);
  std::mt19937_64 rng(2);
  const auto state = random_state(spec, {1, 32, 32}, rng);
  EXPECT_EQ(layer_forward(spec, state, Tensor({1, 32, 32}), Mode::Eval, nullptr).output.shape(), (Shape{6, 28, 28}));
}

TEST(LayerForward, EvalDropoutEqualsNoDropout) {
  std::mt19937_64 rng(3);
  auto with = LayerSpec::fully_connected(20, true, 0.5);
  auto without = LayerSpec::fully_connected(20, true, 0.0);
  const auto state = random_state(with, {30}, rng);
  const Tensor x = oracle::random_tensor({30}, rng);
  Rng r(5);
  const auto a = layer_forward(with, state, x, Mode::Eval, nullptr);
  const auto b = layer_forward(without, state, x, Mode::Train, &r);
  EXPECT_EQ(a.output, b.output);
  EXPECT_FALSE(a.trace.dropout_mask.has_value());
}

TEST(LayerForward, TrainDropoutNeedsRng) {
  const auto spec = LayerSpec::fully_connected(4, true, 0.5);
  const LayerState state{Tensor({4, 4}), std::vector<double>(4)};
  EXPECT_THROW(layer_forward(spec, state, Tensor({4}), Mode::Train, nullptr), Error);
}

TEST(LayerForward, RejectsInconsistentInput) {
  const auto spec = LayerSpec::convolution(2, 3);
  const LayerState state{Tensor({2, 1, 3, 3}), std::vector<double>(2)};
  EXPECT_THROW(layer_forward(spec, state, Tensor({2, 5, 5}), Mode::Eval, nullptr), ShapeError);
  EXPECT_THROW(layer_forward(spec, state, Tensor({1, 2, 2}), Mode::Eval, nullptr), ShapeError);
  EXPECT_THROW(layer_forward(LayerSpec::max_pool(), {}, Tensor({1, 3, 3}), Mode::Eval, nullptr), ShapeError);
}

TEST(LayerForward, DeterministicGivenSeed) {
  std::mt19937_64 rng(4);
  const auto spec = LayerSpec::fully_connected(50, true, 0.3);
  const auto state = random_state(spec, {40}, rng);
  const Tensor x = oracle::random_tensor({40}, rng);
  Rng r1(9), r2(9);
  EXPECT_EQ(layer_forward(spec, state, x, Mode::Train, &r1).output, layer_forward(spec, state, x, Mode::Train, &r2).output);
}

TEST(LayerForward, DropoutAveragesToEvalOutput) {
  std::mt19937_64 rng(5);
  const auto spec = LayerSpec::fully_connected(40, true, 0.5);
  const auto state = random_state(spec, {30}, rng);
  const Tensor x = oracle::random_tensor({30}, rng);
  const Tensor eval = layer_forward(spec, state, x, Mode::Eval, nullptr).output;
  Tensor mean(eval.shape(), 0.0);
  Rng r(123);
  constexpr int trials = 20000;
  for (int t = 0; t < trials; ++t) {
    const Tensor y = layer_forward(spec, state, x, Mode::Train, &r).output;
    for (std::size_t i = 0; i < y.size(); ++i) mean[i] += y[i] / trials;
  }
  for (std::size_t i = 0; i < eval.size(); ++i) {
    if (std::abs(eval[i]) >= 0.1) EXPECT_NEAR(mean[i], eval[i], 0.05 * std::abs(eval[i])) << i;
  }
}

TEST(LayerBackward, ZeroGradientGivesZeros) {
  std::mt19937_64 rng(6);
  for (const auto& [spec, in] : std::vector<std::pair<LayerSpec, Shape>>{
           {LayerSpec::convolution(3, 3), {2, 6, 6}},
           {LayerSpec::max_pool(), {2, 4, 4}},
           {LayerSpec::fully_connected(5, true, 0.5), {2, 3, 3}}}) {
    const auto state = random_state(spec, in, rng);
    Rng r(1);
    const auto fwd = layer_forward(spec, state, oracle::random_tensor(in, rng), Mode::Train, &r);
    const auto g = layer_backward(spec, state, fwd.trace, Tensor(fwd.output.shape(), 0.0));
    for (double v : g.input.data()) EXPECT_EQ(v, 0.0);
    if (g.params.weights) {
      for (double v : g.params.weights->data()) EXPECT_EQ(v, 0.0);
    }
    for (double v : g.params.biases) EXPECT_EQ(v, 0.0);
  }
}

TEST(LayerBackward, ConvolutionMatchesFiniteDifferences) {
  for (std::uint64_t s = 0; s < 20; ++s) expect_layer_gradients(LayerSpec::convolution(1 + s % 3, 1 + s % 3), {1 + s % 2, 5, 6}, s);
}

TEST(LayerBackward, ConvolutionWithoutSigmoid) {
  expect_layer_gradients(LayerSpec::convolution(2, 3, false), {2, 5, 5}, 99);
}

TEST(LayerBackward, PoolingMatchesFiniteDifferences) {
  for (std::uint64_t s = 0; s < 20; ++s) expect_layer_gradients(LayerSpec::max_pool(), {2, 4, 6}, 100 + s);
}

TEST(LayerBackward, DenseWithDropoutMatchesFiniteDifferences) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    expect_layer_gradients(LayerSpec::fully_connected(4 + s % 5, true, s % 2 ? 0.5 : 0.0), {2, 3, 2}, 200 + s);
  }
}

TEST(LayerBackward, RejectsWrongGradientShape) {
  const auto spec = LayerSpec::fully_connected(3);
  const LayerState state{Tensor({3, 4}), std::vector<double>(3)};
  const auto fwd = layer_forward(spec, state, Tensor({4}), Mode::Eval, nullptr);
  EXPECT_THROW(layer_backward(spec, state, fwd.trace, Tensor({4})), ShapeError);
  EXPECT_THROW(layer_backward(LayerSpec::fully_connected(3, false), state, fwd.trace, Tensor({3})), Error);
}

TEST(DropoutMask, ZeroRateKeepsEverything) {
  Rng r(1);
  const Tensor m = dropout_mask({100}, 0.0, r);
  for (double v : m.data()) EXPECT_EQ(v, 1.0);
}

TEST(DropoutMask, KeptFractionNearHalf) {
  Rng r(2024);
  const Tensor m = dropout_mask({10000}, 0.5, r);
  std::size_t kept = 0;
  for (double v : m.data()) {
    EXPECT_TRUE(v == 0.0 || v == 2.0);
    kept += v != 0.0;
  }
  const double frac = kept / 10000.0;
  EXPECT_GE(frac, 0.48);
  EXPECT_LE(frac, 0.52);
}

TEST(DropoutMask, SameSeedSameMask) {
  Rng a(77), b(77);
  EXPECT_EQ(dropout_mask({8, 9}, 0.3, a), dropout_mask({8, 9}, 0.3, b));
}

TEST(DropoutMask, RejectsInvalidRate) {
  Rng r(1);
  EXPECT_THROW(dropout_mask({4}, 1.0, r), Error);
  EXPECT_THROW(dropout_mask({4}, -0.1, r), Error);
}

TEST(MseLoss, ZeroAtTarget) {
  const Tensor t({3}, std::vector<double>{0.2, 0.4, 0.9});
  const auto l = mse_loss(t, t);
  EXPECT_EQ(l.value, 0.0);
  for (double v : l.gradient.data()) EXPECT_EQ(v, 0.0);
}

TEST(MseLoss, HalfSumOfSquares) {
  const auto l = mse_loss(Tensor({2}, std::vector<double>{1, 0}), Tensor({2}, std::vector<double>{0, 0}));
  EXPECT_EQ(l.value, 0.5);
  EXPECT_EQ(l.gradient.values(), (std::vector<double>{1, 0}));
}

TEST(MseLoss, MatchesElementwiseOracle) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor a = oracle::random_tensor({16}, rng), b = oracle::random_tensor({16}, rng);
    double ref = 0.0;
    for (std::size_t k = 0; k < 16; ++k) ref += (a[k] - b[k]) * (a[k] - b[k]);
    const auto l = mse_loss(a, b);
    EXPECT_NEAR(l.value, ref / 2.0, 1e-12);
    EXPECT_GT(l.value, 0.0);
  }
}

TEST(MseLoss, RejectsLengthMismatch) { EXPECT_THROW(mse_loss(Tensor({3}), Tensor({4})), ShapeError); }
