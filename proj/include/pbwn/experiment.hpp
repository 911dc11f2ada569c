#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pbwn/matrix.hpp"
#include "pbwn/mnist.hpp"
#include "pbwn/optim.hpp"

// Experiment orchestration: one training run parameterized by an
// ExperimentConfig, logged as one metrics CSV. Runs are fully deterministic
// given (config, seed): reruns produce byte-identical CSVs.

namespace pbwn::harness {

struct ExperimentConfig {
  /// Layer widths including input and output, e.g. {784, 256, 128, 10}.
  std::vector<std::size_t> arch = {784, 256, 128, 10};
  bool use_bn = false;
  optim::Method method = optim::Method::kNormal;
  double learning_rate = 0.3;
  double momentum = 0.0;
  double weight_decay = 0.0;
  int interval = 1;
  enum class IntervalUnit { kIteration, kEpoch };
  IntervalUnit interval_unit = IntervalUnit::kIteration;
  std::size_t batch_size = 256;
  int epochs = 5;
  std::uint64_t seed = 1;
  std::size_t train_subset = 0;  // 0 means the whole training split
  std::string data_dir = "data/mnist";
  std::string out_path = "metrics.csv";
  std::string weights_out;  // optional final-parameters dump
  /// Real elapsed milliseconds in the wall_ms column. Off by default: the
  /// CSV is byte-reproducible across reruns, so the column holds 0 unless
  /// timing is explicitly requested. Timing always goes to the log stream.
  bool timing = false;

  void validate() const;
};

struct MetricsRecord {
  int epoch = 0;
  long iteration = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  std::optional<double> test_loss;
  std::optional<double> test_accuracy;
  double max_row_norm_deviation = 0.0;
  std::int64_t wall_ms = 0;
};

inline constexpr const char* kCsvHeader =
    "epoch,iteration,train_loss,train_acc,test_loss,test_acc,max_row_norm_dev,wall_ms";

/// Fisher-Yates permutation of {0, ..., n-1} drawn from rng.
std::vector<std::size_t> seeded_permutation(SeededRng& rng, std::size_t n);

/// Trains per the config and writes one MetricsRecord per epoch (the final
/// row also carries test metrics) to cfg.out_path, flushing row by row.
/// A degenerate-row failure aborts the run with the partial CSV on disk and
/// the error rethrown. Returns cfg.out_path. Progress lines go to log when
/// non-null.
std::string run_experiment(const ExperimentConfig& cfg, std::ostream* log = nullptr);

/// Parses a metrics CSV back into records; malformed rows raise FormatError
/// naming the line number.
std::vector<MetricsRecord> parse_metrics_csv(const std::string& path);

/// Writes the (epoch, train_loss) columns of a metrics CSV as plain
/// two-column text with 9 significant digits, one line per record. An
/// empty (header-only) CSV produces an empty file.
void emit_plot_data(const std::string& csv_path, const std::string& out_path);

}  // namespace pbwn::harness
