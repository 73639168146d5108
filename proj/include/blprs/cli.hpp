#pragma once

// Command-line workflows: train, eval, predict, inspect, synth.

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "blprs/checkpoint.hpp"
#include "blprs/dataset.hpp"
#include "blprs/network.hpp"
#include "blprs/synth.hpp"
#include "blprs/trainer.hpp"

namespace blprs {

/// Shortest round-trip decimal, never in exponent notation.
inline std::string plain_decimal(double v) {
  char buf[512];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed);
  if (ec != std::errc{}) throw Error("cannot format number");
  return std::string(buf, end);
}

inline std::string curve_csv(const TrainingReport& report) {
  if (report.per_epoch_error.empty()) throw Error("training report is empty");
  if (report.per_epoch_seconds.size() != report.per_epoch_error.size()) throw Error("training report is inconsistent");
  std::string out = "epoch,mean_error,seconds\n";
  for (std::size_t i = 0; i < report.per_epoch_error.size(); ++i) {
    out += std::to_string(i + 1) + "," + plain_decimal(report.per_epoch_error[i]) + "," +
           plain_decimal(report.per_epoch_seconds[i]) + "\n";
  }
  return out;
}

inline void export_curve_csv(const TrainingReport& report, const std::filesystem::path& path) {
  write_file_atomic(path, curve_csv(report));
}

inline std::string format_parameter_table(const NetworkConfig& config, Convention convention) {
  const auto report = count_parameters(config, convention);
  std::ostringstream out;
  out << "Parameter count (" << to_string(convention) << " convention)\n";
  out << std::left << std::setw(7) << "Layer" << std::setw(17) << "Operation" << std::setw(14) << "Feature maps"
      << std::setw(10) << "Map size" << std::setw(8) << "Window" << "Parameters\n";
  for (const auto& l : report.layers) {
    const Shape& s = l.output_shape;
    const std::size_t maps = s[0];
    const std::string size = s.size() == 3 ? std::to_string(s[1]) + "x" + std::to_string(s[2]) : "1x1";
    std::string window = "N/A";
    if (l.kind == LayerKind::Convolution) window = std::to_string(l.kernel_size) + "x" + std::to_string(l.kernel_size);
    if (l.kind == LayerKind::MaxPool) window = "2x2";
    out << std::setw(7) << l.name << std::setw(17) << to_string(l.kind) << std::setw(14) << maps << std::setw(10)
        << size << std::setw(8) << window << l.count << "\n";
  }
  out << "Total" << std::string(51, ' ') << report.total << "\n";
  return out.str();
}

inline void print_confusion(std::ostream& out, const EvalReport& report, const LabelMap& labels) {
  out << "confusion (rows = true, columns = predicted):\n";
  out << std::setw(6) << "";
  for (std::size_t j = 0; j < report.confusion.size(); ++j) out << std::setw(5) << j;
  out << "\n";
  for (std::size_t i = 0; i < report.confusion.size(); ++i) {
    out << std::setw(3) << i << "   ";
    for (std::size_t v : report.confusion[i]) out << std::setw(5) << v;
    out << "   " << labels[i] << "\n";
  }
}

namespace detail {

struct CliOptions {
  // train / eval / predict
  std::string data, model, image, out = "model.blpr", curve;
  std::size_t epochs = 1000, batch = 1;
  double lr = 0.5, dropout = 0.5, split = 0.9;
  std::uint64_t seed = 42;
  bool progress = false;
  // inspect
  std::string convention = "paper";
  // synth
  std::string synth_out, labels_file;
  std::size_t per_class = 100;
  double rotation = 15.0, scale_min = 0.85, scale_max = 1.15, translate = 3.0, shear = 0.15, noise = 0.05;
};

inline int cmd_train(const CliOptions& o, std::ostream& out, std::ostream& err) {
  TrainConfig cfg{o.epochs, o.lr, o.batch, o.dropout, o.seed, o.split};
  cfg.validate();
  const Dataset all = load_dataset_dir(o.data);
  auto [train_set, test_set] = split_dataset(all, cfg.split_fraction, cfg.seed);
  out << "data: " << all.size() << " samples, " << train_set.size() << " train / " << test_set.size() << " test\n";

  Network net = build_network(NetworkConfig::standard(cfg.dropout_rate), cfg.seed);
  EpochCallback cb;
  if (o.progress) {
    cb = [&](std::size_t epoch, double e, double s) {
      err << "epoch " << epoch << "/" << cfg.epochs << " error " << e << " (" << s << " s)\n";
    };
  }
  auto result = train(std::move(net), train_set, cfg, cb);
  const EvalReport eval = evaluate(result.network, test_set);

  save_checkpoint(result.network, all.labels, o.out);
  if (!o.curve.empty()) export_curve_csv(result.report, o.curve);

  out << "final train error: " << plain_decimal(result.report.final_train_error) << "\n";
  out << "test accuracy: " << plain_decimal(eval.accuracy_percent) << " % (" << eval.correct() << "/"
      << eval.sample_count << ")\n";
  out << "total seconds: " << plain_decimal(result.report.total_seconds) << "\n";
  out << "avg seconds/epoch: " << plain_decimal(result.report.avg_seconds_per_epoch) << "\n";
  out << "checkpoint: " << o.out << "\n";
  return 0;
}

inline int cmd_eval(const CliOptions& o, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(o.model);
  const Dataset ds = load_dataset_dir(o.data, ckpt.labels);
  const EvalReport report = evaluate(ckpt.network, ds);
  out << "accuracy: " << plain_decimal(report.accuracy_percent) << " % (" << report.correct() << "/"
      << report.sample_count << ")\n";
  print_confusion(out, report, ckpt.labels);
  return 0;
}

inline int cmd_predict(const CliOptions& o, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(o.model);
  const Tensor image = normalize_image(read_pnm(o.image));
  const Prediction p = predict(ckpt.network, image);
  out << "predicted: " << ckpt.labels[p.class_index] << " (class " << p.class_index << ")\n";
  for (std::size_t i = 0; i < p.scores.size(); ++i) {
    out << std::setw(2) << i << " " << ckpt.labels[i] << " " << plain_decimal(p.scores[i]) << "\n";
  }
  return 0;
}

inline int cmd_inspect(const CliOptions& o, std::ostream& out) {
  if (o.convention != "paper" && o.convention != "standard") {
    throw Error("unknown convention '" + o.convention + "' (expected paper or standard)");
  }
  out << format_parameter_table(NetworkConfig::standard(),
                                o.convention == "paper" ? Convention::Paper : Convention::Standard);
  return 0;
}

inline int cmd_synth(const CliOptions& o, std::ostream& out) {
  SynthSpec spec;
  spec.per_class_count = o.per_class;
  spec.rotation_deg = {-o.rotation, o.rotation};
  spec.scale = {o.scale_min, o.scale_max};
  spec.translate_px = {-o.translate, o.translate};
  spec.shear = {-o.shear, o.shear};
  spec.noise_stddev = o.noise;
  spec.seed = o.seed;
  const LabelMap labels = o.labels_file.empty() ? LabelMap::bangla_default() : read_labels_file(o.labels_file);
  const Dataset ds = generate_synthetic(spec, labels);
  write_dataset_dir(ds, o.synth_out);
  out << "wrote " << ds.size() << " samples to " << o.synth_out << "\n";
  return 0;
}

}  // namespace detail

/// Runs one invocation; `args` excludes the program name. Returns the exit status.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Character recognizer for Bangla license plates"};
  app.require_subcommand(1);
  detail::CliOptions o;

  auto* train = app.add_subcommand("train", "train a network on a dataset directory");
  train->add_option("--data", o.data, "dataset directory")->required();
  train->add_option("--epochs", o.epochs, "training epochs")->capture_default_str()->check(CLI::PositiveNumber);
  train->add_option("--lr", o.lr, "learning rate")->capture_default_str();
  train->add_option("--batch", o.batch, "mini-batch size")->capture_default_str()->check(CLI::PositiveNumber);
  train->add_option("--dropout", o.dropout, "dropout rate of the hidden layer")->capture_default_str();
  train->add_option("--split", o.split, "fraction of each class used for training")->capture_default_str();
  train->add_option("--seed", o.seed, "random seed")->capture_default_str();
  train->add_option("--out", o.out, "checkpoint path")->capture_default_str();
  train->add_option("--curve", o.curve, "write the per-epoch error curve as CSV");
  train->add_flag("--progress", o.progress, "print per-epoch progress to stderr");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset directory");
  eval->add_option("--model", o.model, "checkpoint path")->required();
  eval->add_option("--data", o.data, "dataset directory")->required();

  auto* pred = app.add_subcommand("predict", "classify one image");
  pred->add_option("--model", o.model, "checkpoint path")->required();
  pred->add_option("--image", o.image, "PGM/PPM image")->required();

  auto* inspect = app.add_subcommand("inspect", "print the per-layer parameter table");
  inspect->add_option("--convention", o.convention, "paper or standard")
      ->capture_default_str()
      ->check(CLI::IsMember({"paper", "standard"}));

  auto* synth = app.add_subcommand("synth", "write a synthetic dataset tree");
  synth->add_option("--out", o.synth_out, "output directory")->required();
  synth->add_option("--per-class", o.per_class, "samples per class")->capture_default_str()->check(CLI::PositiveNumber);
  synth->add_option("--seed", o.seed, "random seed")->capture_default_str();
  synth->add_option("--rotation", o.rotation, "max rotation in degrees (symmetric)")->capture_default_str();
  synth->add_option("--scale-min", o.scale_min, "minimum scale")->capture_default_str();
  synth->add_option("--scale-max", o.scale_max, "maximum scale")->capture_default_str();
  synth->add_option("--translate", o.translate, "max translation in pixels (symmetric)")->capture_default_str();
  synth->add_option("--shear", o.shear, "max shear (symmetric)")->capture_default_str();
  synth->add_option("--noise", o.noise, "Gaussian noise standard deviation")->capture_default_str();
  synth->add_option("--labels", o.labels_file, "labels.txt to use instead of the defaults");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*train) return detail::cmd_train(o, out, err);
    if (*eval) return detail::cmd_eval(o, out);
    if (*pred) return detail::cmd_predict(o, out);
    if (*inspect) return detail::cmd_inspect(o, out);
    if (*synth) return detail::cmd_synth(o, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace blprs
