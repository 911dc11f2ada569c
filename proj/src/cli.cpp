#include "pbwn/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "pbwn/experiment.hpp"
#include "pbwn/nn.hpp"
#include "pbwn/symmetry.hpp"
#include "pbwn/tensor.hpp"

namespace pbwn::cli {

namespace {

std::vector<std::size_t> parse_arch(const std::string& s) {
  std::vector<std::size_t> widths;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      const long v = std::stol(tok);
      if (v < 1) throw std::invalid_argument(tok);
      widths.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw ConfigError("arch: '" + tok + "' is not a positive integer");
    }
  }
  if (widths.size() < 2) {
    throw ConfigError("arch: need at least input and output widths, got '" + s + "'");
  }
  return widths;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> values;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      values.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw ConfigError("alpha-list: '" + tok + "' is not a number");
    }
  }
  if (values.empty()) throw ConfigError("alpha-list: empty");
  return values;
}

optim::Method parse_method(const std::string& s) {
  if (s == "normal") return optim::Method::kNormal;
  if (s == "pbwn") return optim::Method::kPbwn;
  if (s == "pbwn-riem") return optim::Method::kPbwnRiem;
  if (s == "pbwn-t") return optim::Method::kPbwnInterval;
  throw ConfigError("method: '" + s +
                    "' is not one of normal|pbwn|pbwn-riem|pbwn-t");
}

/// Integral values print without a decimal point, fractional ones with full
/// significant digits.
std::string fmt_count(double v) {
  if (std::floor(v) == v && std::abs(v) < 1e15) {
    return std::to_string(static_cast<long long>(v));
  }
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

struct TrainCliValues {
  std::string arch = "784,256,128,10";
  bool bn = false;
  std::string method = "normal";
  int interval = 1;
  std::string interval_unit = "iteration";
  double lr = 0.3;
  double momentum = 0.0;
  double weight_decay = 0.0;
  std::size_t batch_size = 256;
  int epochs = 5;
  std::uint64_t seed = 1;
  std::size_t subset = 0;
  std::string data_dir = "data/mnist";
  std::string out = "metrics.csv";
  std::string weights_out;
  std::string config_file;
  bool paper_config = false;
  bool timing = false;
};

/// Precedence: built-in defaults < --paper-config preset < JSON config file
/// < flags given on the command line.
harness::ExperimentConfig resolve_train_config(const TrainCliValues& v,
                                               const CLI::App* cmd) {
  TrainCliValues merged = v;
  const auto given = [cmd](const std::string& flag) {
    return cmd->count(flag) > 0;
  };

  if (merged.paper_config) {
    if (!given("--arch")) merged.arch = "784,1024,750,250,250,10";
    if (!given("--batch-size")) merged.batch_size = 256;
    if (!given("--lr")) merged.lr = 0.3;
    if (!given("--subset")) merged.subset = 0;
  }

  if (!merged.config_file.empty()) {
    std::ifstream in(merged.config_file);
    if (!in) throw FormatError(merged.config_file + ": cannot open config file");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(merged.config_file + ": " + e.what());
    }
    try {
      if (j.contains("arch") && !given("--arch")) {
        if (j["arch"].is_array()) {
          std::string arch;
          for (const auto& w : j["arch"]) {
            if (!arch.empty()) arch += ",";
            arch += std::to_string(w.get<long>());
          }
          merged.arch = arch;
        } else {
          merged.arch = j["arch"].get<std::string>();
        }
      }
      if (j.contains("bn") && !given("--bn")) merged.bn = j["bn"].get<bool>();
      if (j.contains("method") && !given("--method"))
        merged.method = j["method"].get<std::string>();
      if (j.contains("interval") && !given("--interval"))
        merged.interval = j["interval"].get<int>();
      if (j.contains("interval-unit") && !given("--interval-unit"))
        merged.interval_unit = j["interval-unit"].get<std::string>();
      if (j.contains("lr") && !given("--lr")) merged.lr = j["lr"].get<double>();
      if (j.contains("momentum") && !given("--momentum"))
        merged.momentum = j["momentum"].get<double>();
      if (j.contains("weight-decay") && !given("--weight-decay"))
        merged.weight_decay = j["weight-decay"].get<double>();
      if (j.contains("batch-size") && !given("--batch-size"))
        merged.batch_size = j["batch-size"].get<std::size_t>();
      if (j.contains("epochs") && !given("--epochs"))
        merged.epochs = j["epochs"].get<int>();
      if (j.contains("seed") && !given("--seed"))
        merged.seed = j["seed"].get<std::uint64_t>();
      if (j.contains("subset") && !given("--subset"))
        merged.subset = j["subset"].get<std::size_t>();
      if (j.contains("data-dir") && !given("--data-dir"))
        merged.data_dir = j["data-dir"].get<std::string>();
      if (j.contains("out") && !given("--out")) merged.out = j["out"].get<std::string>();
      if (j.contains("weights-out") && !given("--weights-out"))
        merged.weights_out = j["weights-out"].get<std::string>();
      if (j.contains("timing") && !given("--timing"))
        merged.timing = j["timing"].get<bool>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(merged.config_file + ": bad value type: " + e.what());
    }
  }

  harness::ExperimentConfig cfg;
  cfg.arch = parse_arch(merged.arch);
  cfg.use_bn = merged.bn;
  cfg.method = parse_method(merged.method);
  cfg.interval = merged.interval;
  if (merged.interval_unit == "iteration") {
    cfg.interval_unit = harness::ExperimentConfig::IntervalUnit::kIteration;
  } else if (merged.interval_unit == "epoch") {
    cfg.interval_unit = harness::ExperimentConfig::IntervalUnit::kEpoch;
  } else {
    throw ConfigError("interval-unit: '" + merged.interval_unit +
                      "' is not one of iteration|epoch");
  }
  cfg.learning_rate = merged.lr;
  cfg.momentum = merged.momentum;
  cfg.weight_decay = merged.weight_decay;
  cfg.batch_size = merged.batch_size;
  cfg.epochs = merged.epochs;
  cfg.seed = merged.seed;
  cfg.train_subset = merged.subset;
  cfg.data_dir = merged.data_dir;
  cfg.out_path = merged.out;
  cfg.weights_out = merged.weights_out;
  cfg.timing = merged.timing;
  cfg.validate();
  return cfg;
}

int run_gradcheck(std::ostream& out) {
  double max_rel = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SeededRng rng(seed);
    const bool with_bn = seed % 2 == 0;
    nn::Network net = nn::make_mlp({10, 8, 6, 4}, with_bn, rng);
    nn::Batch batch;
    batch.inputs = tensor::init_uniform_fanin(rng, 5, 10);
    batch.targets = {0, 3, 1, 2, 3};
    net.forward(batch, nn::Mode::kTrain);
    net.backward();
    auto slots = net.params();
    for (std::size_t s = 0; s < slots.size(); ++s) {
      const Matrix analytic = *slots[s].grad;
      const Matrix fd = nn::finite_diff_gradient(net, batch, s, 1e-5);
      max_rel = std::max(max_rel, nn::max_relative_gradient_error(analytic, fd));
    }
  }
  char line[64];
  std::snprintf(line, sizeof(line), "max_relative_error=%.3e\n", max_rel);
  out << line;

  // Step sweep, reported for reference: central differences trace the usual
  // V shape (truncation error shrinking, then rounding error growing).
  out << "step_sweep:";
  for (double step : {1e-4, 1e-5, 1e-6}) {
    SeededRng rng(7);
    nn::Network net = nn::make_mlp({6, 5, 3}, false, rng);
    nn::Batch batch;
    batch.inputs = tensor::init_uniform_fanin(rng, 4, 6);
    batch.targets = {0, 1, 2, 1};
    net.forward(batch, nn::Mode::kTrain);
    net.backward();
    auto slots = net.params();
    double worst = 0.0;
    for (std::size_t s = 0; s < slots.size(); ++s) {
      const Matrix analytic = *slots[s].grad;
      const Matrix fd = nn::finite_diff_gradient(net, batch, s, step);
      worst = std::max(worst, nn::max_relative_gradient_error(analytic, fd));
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), " step=%g err=%.3g", step, worst);
    out << buf;
  }
  out << "\n";
  return max_rel < 1e-6 ? 0 : 1;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err) {
  CLI::App app{"Training and diagnostics for unit-norm constrained networks"};
  // The cost subcommand needs a literal --h flag, so help has no -h short form.
  app.set_help_flag("--help", "Print help and exit");
  app.require_subcommand(1);

  // train ---------------------------------------------------------------
  auto* train = app.add_subcommand("train", "Train an MLP and log metrics CSV");
  TrainCliValues tv;
  train->add_option("--arch", tv.arch, "Comma-separated layer widths, input first");
  train->add_flag("--bn", tv.bn, "Insert batch normalization after hidden layers");
  train->add_option("--method", tv.method, "normal|pbwn|pbwn-riem|pbwn-t");
  train->add_option("--interval", tv.interval, "Projection interval T for pbwn-t");
  train->add_option("--interval-unit", tv.interval_unit, "iteration|epoch");
  train->add_option("--lr", tv.lr, "Learning rate");
  train->add_option("--momentum", tv.momentum, "Momentum in [0,1)");
  train->add_option("--weight-decay", tv.weight_decay, "Decay factor lambda");
  train->add_option("--batch-size", tv.batch_size, "Mini-batch size");
  train->add_option("--epochs", tv.epochs, "Training epochs");
  train->add_option("--seed", tv.seed, "RNG seed");
  train->add_option("--subset", tv.subset, "Use only the first N training samples");
  train->add_option("--data-dir", tv.data_dir, "Directory with the four IDX files");
  train->add_option("--out", tv.out, "Metrics CSV path");
  train->add_option("--weights-out", tv.weights_out, "Optional final parameter dump");
  train->add_option("--config", tv.config_file, "JSON config; flags override it");
  train->add_flag("--paper-config", tv.paper_config,
                  "Preset: arch 784-1024-750-250-250-10, batch 256, lr 0.3, full set");
  train->add_flag("--timing", tv.timing,
                  "Write real elapsed ms into wall_ms (breaks byte reproducibility)");

  // symmetry-demo ---------------------------------------------------------
  auto* sym = app.add_subcommand(
      "symmetry-demo", "Condition-number sweep of the scaled two-layer model");
  std::string alpha_list = "1,2,5,10";
  std::string sym_out;
  sym->add_option("--alpha-list", alpha_list, "Comma-separated scaling factors");
  sym->add_option("--out", sym_out, "Write the table here instead of stdout");

  // cost -------------------------------------------------------------------
  auto* cost = app.add_subcommand("cost", "FLOP cost of a layer plus projection");
  std::string cost_kind = "linear";
  symmetry::LayerCostSpec spec;
  cost->add_option("--kind", cost_kind, "linear|conv");
  cost->add_option("--m", spec.m, "Batch size");
  cost->add_option("--n", spec.n, "Output features / filters");
  cost->add_option("--p", spec.p, "Input features / channels");
  cost->add_option("--fh", spec.fh, "Filter height (conv)");
  cost->add_option("--fw", spec.fw, "Filter width (conv)");
  cost->add_option("--h", spec.h, "Feature-map height (conv)");
  cost->add_option("--w", spec.w, "Feature-map width (conv)");
  cost->add_option("--interval", spec.interval, "Projection interval T");

  // gradcheck ----------------------------------------------------------
  app.add_subcommand("gradcheck",
                     "Finite-difference check of all analytic gradients");

  // plot-data ----------------------------------------------------------
  auto* plot = app.add_subcommand("plot-data",
                                  "Emit (epoch, train_loss) columns per metrics CSV");
  std::vector<std::string> plot_inputs;
  std::string plot_out_dir = ".";
  std::string plot_out;
  plot->add_option("csv", plot_inputs, "Metrics CSV files")->required();
  plot->add_option("--out-dir", plot_out_dir, "Directory for <stem>.dat outputs");
  plot->add_option("--out", plot_out, "Explicit output path (single input only)");

  // make-data ----------------------------------------------------------
  auto* make = app.add_subcommand(
      "make-data", "Write a deterministic synthetic IDX dataset");
  std::string make_dir = "data/synth";
  std::size_t make_train = 12000, make_test = 2000;
  std::uint64_t make_seed = 17;
  make->add_option("--dir", make_dir, "Output directory");
  make->add_option("--train-count", make_train, "Training samples");
  make->add_option("--test-count", make_test, "Test samples");
  make->add_option("--seed", make_seed, "Generator seed");

  std::vector<const char*> argv;
  argv.push_back("pbwn");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    err << app.help();
    return 2;
  }

  try {
    if (train->parsed()) {
      const auto cfg = resolve_train_config(tv, train);
      const std::string path = harness::run_experiment(cfg, &err);
      out << path << "\n";
      return 0;
    }
    if (sym->parsed()) {
      const auto alphas = parse_double_list(alpha_list);
      const std::string table =
          symmetry::condition_table(symmetry::default_base_model(), alphas);
      if (sym_out.empty()) {
        out << table;
      } else {
        std::ofstream f(sym_out);
        if (!f) throw FormatError(sym_out + ": cannot open for writing");
        f << table;
      }
      return 0;
    }
    if (cost->parsed()) {
      symmetry::CostBreakdown breakdown;
      if (cost_kind == "linear") {
        spec.kind = symmetry::LayerCostSpec::Kind::kLinear;
        breakdown = symmetry::flops_linear(spec);
      } else if (cost_kind == "conv") {
        spec.kind = symmetry::LayerCostSpec::Kind::kConv;
        breakdown = symmetry::flops_conv(spec);
      } else {
        throw ConfigError("kind: '" + cost_kind + "' is not one of linear|conv");
      }
      out << "base=" << breakdown.base << "\n";
      out << "overhead=" << fmt_count(breakdown.interval_overhead) << "\n";
      out << "ordinary_overhead=" << breakdown.ordinary_overhead << "\n";
      out << "riemannian_overhead=" << breakdown.riemannian_overhead << "\n";
      return 0;
    }
    if (app.get_subcommand("gradcheck")->parsed()) {
      return run_gradcheck(out);
    }
    if (plot->parsed()) {
      if (!plot_out.empty() && plot_inputs.size() != 1) {
        throw ConfigError("plot-data: --out needs exactly one input CSV");
      }
      namespace fs = std::filesystem;
      for (const auto& csv : plot_inputs) {
        const std::string target =
            !plot_out.empty()
                ? plot_out
                : (fs::path(plot_out_dir) / (fs::path(csv).stem().string() + ".dat"))
                      .string();
        harness::emit_plot_data(csv, target);
        out << target << "\n";
      }
      return 0;
    }
    if (make->parsed()) {
      harness::generate_synthetic_idx(make_dir, make_train, make_test, make_seed);
      out << make_dir << "\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace pbwn::cli
