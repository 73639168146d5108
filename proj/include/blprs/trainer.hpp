#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "blprs/dataset.hpp"
#include "blprs/network.hpp"

namespace blprs {

struct TrainConfig {
  std::size_t epochs = 1000;
  double learning_rate = 0.5;
  std::size_t batch_size = 1;  // plain per-sample SGD; larger batches stall on the sigmoid plateau
  double dropout_rate = 0.5;
  std::uint64_t seed = 42;
  double split_fraction = 0.9;

  void validate() const {
    if (epochs == 0) throw Error("epochs must be positive");
    if (!(learning_rate > 0.0)) throw Error("learning rate must be positive");
    if (batch_size == 0) throw Error("batch size must be positive");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw Error("dropout rate must lie in [0, 1)");
    if (!(split_fraction > 0.0 && split_fraction < 1.0)) throw Error("split fraction must lie in (0, 1)");
  }
};

struct TrainingReport {
  std::vector<double> per_epoch_error;  // mean per-sample loss
  std::vector<double> per_epoch_seconds;
  double total_seconds = 0.0;
  double avg_seconds_per_epoch = 0.0;
  double final_train_error = 0.0;
};

struct EvalReport {
  double accuracy_percent = 0.0;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  std::size_t sample_count = 0;

  std::size_t correct() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < confusion.size(); ++i) n += confusion[i][i];
    return n;
  }
};

inline double accuracy_percent(std::size_t correct, std::size_t total) {
  return 100.0 * static_cast<double>(correct) / static_cast<double>(total);
}

// ---------------------------------------------------------------------------

struct Split {
  Dataset train;
  Dataset test;
};

/// Stratified split: each class is shuffled and round(n * fraction) samples
/// (half rounds up) go to train, clamped so both sides keep at least one.
inline Split split_dataset(const Dataset& ds, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw Error("split fraction must lie in (0, 1)");
  std::vector<std::vector<std::size_t>> by_class(ds.labels.size());
  for (std::size_t i = 0; i < ds.samples.size(); ++i) by_class.at(ds.samples[i].class_index).push_back(i);

  Rng rng(seed);
  Split out{{{}, ds.labels}, {{}, ds.labels}};
  for (std::size_t cls = 0; cls < by_class.size(); ++cls) {
    auto& idx = by_class[cls];
    if (idx.empty()) continue;
    if (idx.size() < 2) throw Error("class '" + ds.labels[cls] + "' has fewer than 2 samples");
    std::shuffle(idx.begin(), idx.end(), rng);
    auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(idx.size()) * train_fraction + 0.5));
    n_train = std::clamp<std::size_t>(n_train, 1, idx.size() - 1);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      (k < n_train ? out.train : out.test).samples.push_back(ds.samples[idx[k]]);
    }
  }
  return out;
}

/// w <- w - lr * g for every weight and bias.
inline void sgd_update(Network& net, const std::vector<LayerState>& grads, double learning_rate) {
  if (grads.size() != net.states.size()) throw ShapeError("gradient layer count does not match the network");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    LayerState& s = net.states[i];
    const LayerState& g = grads[i];
    if (s.weights.has_value() != g.weights.has_value() || s.biases.size() != g.biases.size() ||
        (s.weights && s.weights->shape() != g.weights->shape())) {
      throw ShapeError("gradient shape does not match layer " + std::to_string(i));
    }
    if (s.weights) {
      auto w = s.weights->data();
      auto gw = g.weights->data();
      for (std::size_t k = 0; k < w.size(); ++k) w[k] -= learning_rate * gw[k];
    }
    for (std::size_t k = 0; k < s.biases.size(); ++k) s.biases[k] -= learning_rate * g.biases[k];
  }
}

namespace detail {

inline std::vector<LayerState> zero_gradients(const Network& net) {
  std::vector<LayerState> z;
  z.reserve(net.states.size());
  for (const auto& s : net.states) {
    LayerState g;
    if (s.weights) g.weights = Tensor(s.weights->shape(), 0.0);
    g.biases.assign(s.biases.size(), 0.0);
    z.push_back(std::move(g));
  }
  return z;
}

inline void accumulate(std::vector<LayerState>& acc, const std::vector<LayerState>& g, double scale) {
  for (std::size_t i = 0; i < acc.size(); ++i) {
    if (acc[i].weights) {
      auto a = acc[i].weights->data();
      auto b = g[i].weights->data();
      for (std::size_t k = 0; k < a.size(); ++k) a[k] += scale * b[k];
    }
    for (std::size_t k = 0; k < acc[i].biases.size(); ++k) acc[i].biases[k] += scale * g[i].biases[k];
  }
}

}  // namespace detail

struct TrainResult {
  Network network;
  TrainingReport report;
};

/// Called after each epoch with (epoch number from 1, mean error, seconds).
using EpochCallback = std::function<void(std::size_t, double, double)>;

/// Mini-batch SGD on the mean squared error against one-hot targets. The
/// last batch of an epoch may be smaller than `batch_size`.
inline TrainResult train(Network net, const Dataset& train_set, const TrainConfig& config,
                         const EpochCallback& on_epoch = {}) {
  config.validate();
  if (train_set.empty()) throw Error("training set is empty");
  if (config.batch_size > train_set.size()) {
    throw Error("batch size " + std::to_string(config.batch_size) + " exceeds training set size " +
                std::to_string(train_set.size()));
  }
  for (const auto& s : train_set.samples) check_sample(s, net.config.class_count);
  net.config.set_hidden_dropout(config.dropout_rate);

  std::vector<Tensor> targets;
  for (std::size_t c = 0; c < net.config.class_count; ++c) targets.push_back(one_hot(c, net.config.class_count));

  TrainResult result{std::move(net), {}};
  Network& model = result.network;
  TrainingReport& report = result.report;
  Rng order_rng(config.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  using clock = std::chrono::steady_clock;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto start = clock::now();
    std::shuffle(order.begin(), order.end(), order_rng);
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const double scale = 1.0 / static_cast<double>(end - begin);
      auto batch_grad = detail::zero_gradients(model);
      for (std::size_t k = begin; k < end; ++k) {
        const Sample& s = train_set.samples[order[k]];
        // Per-sample dropout stream, independent of batching and evaluation order.
        std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                          static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(k)};
        Rng rng(seq);
        auto pass = network_forward(model, s.image, Mode::Train, &rng);
        auto g = network_backward(model, pass, targets[s.class_index]);
        loss_sum += g.loss;
        detail::accumulate(batch_grad, g.layers, scale);
      }
      sgd_update(model, batch_grad, config.learning_rate);
    }
    const double seconds = std::chrono::duration<double>(clock::now() - start).count();
    const double err = loss_sum / static_cast<double>(order.size());
    report.per_epoch_error.push_back(err);
    report.per_epoch_seconds.push_back(seconds);
    report.total_seconds += seconds;
    if (on_epoch) on_epoch(epoch + 1, err, seconds);
  }
  report.avg_seconds_per_epoch = report.total_seconds / static_cast<double>(config.epochs);
  report.final_train_error = report.per_epoch_error.back();
  return result;
}

/// Accuracy and confusion matrix (rows = true class, columns = predicted)
/// for any image -> class index classifier.
template <typename Classifier>
EvalReport evaluate_with(Classifier&& classify, const Dataset& test_set, std::size_t class_count) {
  if (test_set.empty()) throw Error("test set is empty");
  EvalReport report;
  report.confusion.assign(class_count, std::vector<std::size_t>(class_count, 0));
  for (const auto& s : test_set.samples) {
    const std::size_t predicted = classify(s.image);
    if (s.class_index >= class_count || predicted >= class_count) throw Error("class index out of range");
    ++report.confusion[s.class_index][predicted];
  }
  report.sample_count = test_set.size();
  report.accuracy_percent = accuracy_percent(report.correct(), report.sample_count);
  return report;
}

inline EvalReport evaluate(const Network& net, const Dataset& test_set) {
  return evaluate_with([&](const Tensor& image) { return predict(net, image).class_index; }, test_set,
                       net.config.class_count);
}

}  // namespace blprs
