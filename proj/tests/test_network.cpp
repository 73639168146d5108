#include <gtest/gtest.h>

#include <random>

#include "blprs/network.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace blprs;

namespace {

Network zero_network() {
  Network net = build_network(NetworkConfig::standard(), 1);
  for (auto& s : net.states) {
    if (s.weights) {
      for (double& v : s.weights->data()) v = 0.0;
    }
    for (double& b : s.biases) b = 0.0;
  }
  return net;
}

Tensor random_image(std::mt19937_64& rng) { return oracle::random_tensor({1, 32, 32}, rng, 0.0, 1.0); }

}  // namespace

TEST(NetworkConfig, StandardShapeChain) {
  const auto chain = NetworkConfig::standard().shape_chain();
  const std::vector<Shape> expected{{1, 32, 32}, {6, 28, 28}, {6, 14, 14}, {12, 10, 10}, {12, 5, 5}, {300}, {16}};
  EXPECT_EQ(chain, expected);
  EXPECT_EQ(element_count(chain[4]), 300u);
}

TEST(NetworkConfig, LayerNames) {
  EXPECT_EQ(NetworkConfig::standard().layer_names(), (std::vector<std::string>{"C1", "S1", "C2", "S2", "F1", "F2"}));
}

TEST(NetworkConfig, RejectsOddSizeAtPool) {
  NetworkConfig cfg = NetworkConfig::standard();
  cfg.input_shape = {1, 31, 32};
  EXPECT_THROW(build_network(cfg, 1), ShapeError);
}

TEST(NetworkConfig, RejectsWrongClassCount) {
  NetworkConfig cfg = NetworkConfig::standard();
  cfg.class_count = 10;
  EXPECT_THROW(cfg.shape_chain(), ShapeError);
}

TEST(BuildNetwork, ForwardShapesFollowTable) {
  const Network net = build_network(NetworkConfig::standard(), 3);
  std::mt19937_64 rng(3);
  const auto pass = network_forward(net, random_image(rng), Mode::Eval);
  const std::vector<Shape> expected{{1, 32, 32}, {6, 28, 28}, {6, 14, 14}, {12, 10, 10}, {12, 5, 5}, {300}};
  ASSERT_EQ(pass.traces.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(pass.traces[i].input_shape, expected[i]) << i;
  EXPECT_EQ(pass.scores.shape(), Shape{16});
}

TEST(BuildNetwork, SameSeedSameWeights) {
  EXPECT_EQ(build_network(NetworkConfig::standard(), 42), build_network(NetworkConfig::standard(), 42));
  EXPECT_NE(build_network(NetworkConfig::standard(), 42), build_network(NetworkConfig::standard(), 43));
}

TEST(BuildNetwork, GlorotBoundsAndZeroBiases) {
  const Network net = build_network(NetworkConfig::standard(), 5);
  const std::vector<double> limits{std::sqrt(6.0 / (25 + 150)), 0, std::sqrt(6.0 / (150 + 300)), 0,
                                   std::sqrt(6.0 / (300 + 300)), std::sqrt(6.0 / (300 + 16))};
  for (std::size_t i = 0; i < net.states.size(); ++i) {
    const auto& s = net.states[i];
    if (!s.weights) continue;
    for (double v : s.weights->data()) ASSERT_LE(std::abs(v), limits[i]);
    for (double b : s.biases) ASSERT_EQ(b, 0.0);
  }
}

TEST(BuildNetwork, StandardParameterTotal) {
  EXPECT_EQ(build_network(NetworkConfig::standard(), 1).parameter_count(), 97084u);
}

TEST(CountParameters, PaperConvention) {
  const auto r = count_parameters(NetworkConfig::standard(), Convention::Paper);
  std::vector<std::size_t> counts;
  for (const auto& l : r.layers) counts.push_back(l.count);
  EXPECT_EQ(counts, (std::vector<std::size_t>{156, 0, 1872, 0, 93600, 4816}));
  EXPECT_EQ(r.total, 100444u);
}

TEST(CountParameters, StandardConventionMatchesTensors) {
  const auto cfg = NetworkConfig::standard();
  const auto r = count_parameters(cfg, Convention::Standard);
  std::vector<std::size_t> counts;
  for (const auto& l : r.layers) counts.push_back(l.count);
  EXPECT_EQ(counts, (std::vector<std::size_t>{156, 0, 1812, 0, 90300, 4816}));
  EXPECT_EQ(r.total, 97084u);

  const Network net = build_network(cfg, 9);
  for (std::size_t i = 0; i < net.states.size(); ++i) EXPECT_EQ(r.layers[i].count, net.states[i].parameter_count());
}

TEST(CountParameters, TotalIsSumOfLayers) {
  for (auto conv : {Convention::Paper, Convention::Standard}) {
    for (const auto& cfg : {NetworkConfig::standard(), gradcheck::reduced_config_8(), gradcheck::reduced_config_12()}) {
      const auto r = count_parameters(cfg, conv);
      std::size_t sum = 0;
      for (const auto& l : r.layers) sum += l.count;
      EXPECT_EQ(sum, r.total);
    }
  }
}

TEST(NetworkForward, ZeroWeightsGiveHalfScores) {
  const Network net = zero_network();
  std::mt19937_64 rng(1);
  const Tensor scores = network_forward(net, random_image(rng), Mode::Eval).scores;
  for (double v : scores.data()) EXPECT_EQ(v, 0.5);
}

TEST(NetworkForward, EvalIsDeterministic) {
  const Network net = build_network(NetworkConfig::standard(), 11);
  std::mt19937_64 rng(2);
  const Tensor img = random_image(rng);
  EXPECT_EQ(network_forward(net, img, Mode::Eval).scores, network_forward(net, img, Mode::Eval).scores);
}

TEST(NetworkForward, ScoresStrictlyInsideUnitInterval) {
  const Network net = build_network(NetworkConfig::standard(), 12);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 10; ++i) {
    for (double v : predict(net, random_image(rng)).scores.values()) {
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 1.0);
    }
  }
}

TEST(NetworkForward, RejectsWrongInputShape) {
  const Network net = build_network(NetworkConfig::standard(), 1);
  EXPECT_THROW(network_forward(net, Tensor({1, 28, 28}), Mode::Eval), ShapeError);
  EXPECT_THROW(predict(net, Tensor({3, 32, 32})), ShapeError);
}

TEST(NetworkBackward, TargetEqualToScoresGivesZeroGradients) {
  const Network net = build_network(NetworkConfig::standard(), 13);
  std::mt19937_64 rng(4);
  Rng r(1);
  const auto pass = network_forward(net, random_image(rng), Mode::Train, &r);
  const auto g = network_backward(net, pass, pass.scores);
  EXPECT_EQ(g.loss, 0.0);
  for (const auto& l : g.layers) {
    if (l.weights) {
      for (double v : l.weights->data()) ASSERT_EQ(v, 0.0);
    }
    for (double v : l.biases) ASSERT_EQ(v, 0.0);
  }
}

TEST(NetworkBackward, RejectsBadTarget) {
  const Network net = build_network(NetworkConfig::standard(), 1);
  const auto pass = network_forward(net, Tensor({1, 32, 32}), Mode::Eval);
  EXPECT_THROW(network_backward(net, pass, Tensor({10})), ShapeError);
}

TEST(NetworkBackward, ReducedNetworksMatchFiniteDifferences) {
  int checked = 0;
  for (std::uint64_t seed = 1; checked < 20; ++seed) {
    const auto& cfg = seed % 2 ? gradcheck::reduced_config_8() : gradcheck::reduced_config_12();
    const auto res = gradcheck::check(cfg, seed);
    if (!res) continue;
    EXPECT_TRUE(res->shapes_match);
    EXPECT_LE(res->parameters, 2000u);
    EXPECT_LE(res->max_rel_error, 1e-5) << "seed " << seed;
    ++checked;
  }
}

TEST(Predict, TieBreaksToLowestIndex) {
  const Network net = zero_network();
  EXPECT_EQ(predict(net, Tensor({1, 32, 32}, 0.3)).class_index, 0u);
  EXPECT_EQ(argmax(std::vector<double>{0.5, 0.5, 0.5}), 0u);
}

TEST(Predict, UniqueArgmax) {
  std::vector<double> scores(16, 0.05);
  scores[0] = 0.1;
  scores[1] = 0.9;
  scores[2] = 0.2;
  EXPECT_EQ(argmax(scores), 1u);
}

TEST(Predict, PureFunction) {
  const Network net = build_network(NetworkConfig::standard(), 21);
  std::mt19937_64 rng(5);
  const Tensor img = random_image(rng);
  const auto a = predict(net, img), b = predict(net, img);
  EXPECT_EQ(a.class_index, b.class_index);
  EXPECT_EQ(a.scores, b.scores);
}
