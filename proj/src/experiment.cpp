#include "pbwn/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "pbwn/manifold.hpp"
#include "pbwn/nn.hpp"
#include "pbwn/tensor.hpp"

namespace pbwn::harness {

void ExperimentConfig::validate() const {
  if (arch.size() < 2) {
    throw ConfigError("ExperimentConfig: arch needs input and output widths");
  }
  for (std::size_t w : arch) {
    if (w == 0) throw ConfigError("ExperimentConfig: zero layer width");
  }
  if (batch_size < 1) throw ConfigError("ExperimentConfig: batch size must be >= 1");
  if (epochs < 1) throw ConfigError("ExperimentConfig: epochs must be >= 1");
  if (out_path.empty()) throw ConfigError("ExperimentConfig: out path is empty");
  optim::OptimizerConfig ocfg;
  ocfg.method = method;
  ocfg.learning_rate = learning_rate;
  ocfg.momentum = momentum;
  ocfg.weight_decay = weight_decay;
  ocfg.interval = interval;
  ocfg.validate();
}

std::vector<std::size_t> seeded_permutation(SeededRng& rng, std::size_t n) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.next_below(i);
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string csv_row(const MetricsRecord& r) {
  std::string row = std::to_string(r.epoch) + "," + std::to_string(r.iteration) + "," +
                    fmt_double(r.train_loss) + "," + fmt_double(r.train_accuracy) + ",";
  if (r.test_loss) row += fmt_double(*r.test_loss);
  row += ",";
  if (r.test_accuracy) row += fmt_double(*r.test_accuracy);
  row += "," + fmt_double(r.max_row_norm_deviation) + "," + std::to_string(r.wall_ms);
  return row;
}

nn::Batch gather_batch(const Dataset& data, const std::vector<std::size_t>& indices,
                       std::size_t begin, std::size_t end) {
  const std::size_t dim = data.images.cols();
  Matrix inputs(end - begin, dim);
  std::vector<int> targets(end - begin);
  for (std::size_t r = begin; r < end; ++r) {
    const std::size_t src = indices[r];
    const double* from = data.images.row(src);
    std::copy(from, from + dim, inputs.row(r - begin));
    targets[r - begin] = data.labels[src];
  }
  return {std::move(inputs), std::move(targets)};
}

struct EvalMetrics {
  double loss;
  double accuracy;
};

EvalMetrics evaluate(nn::Network& net, const Dataset& data, std::size_t batch_size) {
  const std::size_t n = data.images.rows();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  double loss_sum = 0.0;
  double acc_sum = 0.0;
  for (std::size_t begin = 0; begin < n; begin += batch_size) {
    const std::size_t end = std::min(n, begin + batch_size);
    const auto batch = gather_batch(data, order, begin, end);
    const auto result = net.forward(batch, nn::Mode::kEval);
    const double w = static_cast<double>(end - begin);
    loss_sum += result.loss * w;
    acc_sum += nn::accuracy(result.logits, batch.targets) * w;
  }
  return {loss_sum / static_cast<double>(n), acc_sum / static_cast<double>(n)};
}

double constrained_row_norm_deviation(nn::Network& net) {
  double dev = 0.0;
  for (const auto& slot : net.params()) {
    if (slot.constrained) {
      dev = std::max(dev, manifold::max_row_norm_deviation(*slot.value));
    }
  }
  return dev;
}

}  // namespace

std::string run_experiment(const ExperimentConfig& cfg, std::ostream* log) {
  cfg.validate();
  const auto t_start = std::chrono::steady_clock::now();

  const MnistData data = load_mnist_idx(cfg.data_dir);
  if (data.train.images.cols() != cfg.arch.front()) {
    throw ConfigError("run_experiment: arch input width " +
                      std::to_string(cfg.arch.front()) + " does not match data dim " +
                      std::to_string(data.train.images.cols()));
  }
  for (int label : data.train.labels) {
    if (static_cast<std::size_t>(label) >= cfg.arch.back()) {
      throw ConfigError("run_experiment: label " + std::to_string(label) +
                        " outside arch output width " + std::to_string(cfg.arch.back()));
    }
  }

  const std::size_t n_train =
      cfg.train_subset == 0
          ? data.train.images.rows()
          : std::min<std::size_t>(cfg.train_subset, data.train.images.rows());

  SeededRng rng(cfg.seed);
  nn::Network net = nn::make_mlp(cfg.arch, cfg.use_bn, rng);

  // The tangent-gradient method needs an on-manifold base point from the
  // first step onward, so its run starts from projected weights.
  if (cfg.method == optim::Method::kPbwnRiem) {
    for (auto& slot : net.params()) {
      if (slot.constrained) manifold::project_rows_inplace(*slot.value);
    }
  }

  const std::size_t iters_per_epoch = (n_train + cfg.batch_size - 1) / cfg.batch_size;
  optim::OptimizerConfig ocfg;
  ocfg.method = cfg.method;
  ocfg.learning_rate = cfg.learning_rate;
  ocfg.momentum = cfg.momentum;
  ocfg.weight_decay = cfg.weight_decay;
  ocfg.interval = cfg.interval_unit == ExperimentConfig::IntervalUnit::kEpoch
                      ? cfg.interval * static_cast<int>(iters_per_epoch)
                      : cfg.interval;
  optim::OptimizerState state;

  std::ofstream csv(cfg.out_path);
  if (!csv) throw FormatError(cfg.out_path + ": cannot open for writing");
  csv << kCsvHeader << "\n" << std::flush;

  auto elapsed_ms = [&t_start]() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now() - t_start)
        .count();
  };

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto perm = seeded_permutation(rng, n_train);
    double loss_sum = 0.0;
    double acc_sum = 0.0;
    try {
      for (std::size_t begin = 0; begin < n_train; begin += cfg.batch_size) {
        const std::size_t end = std::min(n_train, begin + cfg.batch_size);
        const auto batch = gather_batch(data.train, perm, begin, end);
        const auto result = optim::pbwn_iteration(net, batch, ocfg, state);
        loss_sum += result.loss;
        acc_sum += result.accuracy;
      }
    } catch (const DegenerateRowError&) {
      csv.flush();
      throw;
    }

    MetricsRecord rec;
    rec.epoch = epoch;
    rec.iteration = state.iteration;
    rec.train_loss = loss_sum / static_cast<double>(iters_per_epoch);
    rec.train_accuracy = acc_sum / static_cast<double>(iters_per_epoch);
    rec.max_row_norm_deviation = constrained_row_norm_deviation(net);
    if (epoch == cfg.epochs) {
      const auto test = evaluate(net, data.test, 1000);
      rec.test_loss = test.loss;
      rec.test_accuracy = test.accuracy;
    }
    rec.wall_ms = cfg.timing ? elapsed_ms() : 0;
    csv << csv_row(rec) << "\n" << std::flush;

    if (log) {
      *log << "[epoch " << epoch << "/" << cfg.epochs << "] loss=" << rec.train_loss
           << " acc=" << rec.train_accuracy << " row_dev=" << rec.max_row_norm_deviation
           << " elapsed_ms=" << elapsed_ms() << "\n";
    }
  }

  if (!cfg.weights_out.empty()) {
    nn::save_parameters(net, cfg.weights_out);
  }
  return cfg.out_path;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

double parse_double(const std::string& s, std::size_t line_no, const std::string& path) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError(path + ": line " + std::to_string(line_no) +
                      ": cannot parse number from '" + s + "'");
  }
}

}  // namespace

std::vector<MetricsRecord> parse_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path + ": cannot open");
  std::string line;
  if (!std::getline(in, line)) {
    throw FormatError(path + ": line 1: missing header");
  }
  if (line != kCsvHeader) {
    throw FormatError(path + ": line 1: unexpected header '" + line + "'");
  }
  std::vector<MetricsRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 8) {
      throw FormatError(path + ": line " + std::to_string(line_no) + ": expected 8 "
                        "fields, got " + std::to_string(fields.size()));
    }
    MetricsRecord r;
    r.epoch = static_cast<int>(parse_double(fields[0], line_no, path));
    r.iteration = static_cast<long>(parse_double(fields[1], line_no, path));
    r.train_loss = parse_double(fields[2], line_no, path);
    r.train_accuracy = parse_double(fields[3], line_no, path);
    if (!fields[4].empty()) r.test_loss = parse_double(fields[4], line_no, path);
    if (!fields[5].empty()) r.test_accuracy = parse_double(fields[5], line_no, path);
    r.max_row_norm_deviation = parse_double(fields[6], line_no, path);
    r.wall_ms = static_cast<std::int64_t>(parse_double(fields[7], line_no, path));
    records.push_back(r);
  }
  return records;
}

void emit_plot_data(const std::string& csv_path, const std::string& out_path) {
  const auto records = parse_metrics_csv(csv_path);
  std::ofstream out(out_path);
  if (!out) throw FormatError(out_path + ": cannot open for writing");
  char buf[64];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof(buf), "%d %.9g\n", r.epoch, r.train_loss);
    out << buf;
  }
}

}  // namespace pbwn::harness
