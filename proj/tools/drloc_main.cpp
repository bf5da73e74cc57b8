// drloc: train, sweep, plot-data, check.
// Exit codes: 0 success, 1 configuration error, 2 data error, 3 numerical
// abort (or a failing check).

#include <atomic>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "drloc/checks/suite.hpp"
#include "drloc/experiment/config.hpp"
#include "drloc/experiment/plot_data.hpp"
#include "drloc/experiment/sweep.hpp"
#include "drloc/numcore/errors.hpp"
#include "drloc/trainer/run.hpp"

namespace {

namespace fs = std::filesystem;
using namespace drloc;

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> variant;
  std::optional<std::size_t> m;
  std::optional<double> lambda;
  std::optional<std::size_t> epochs;
  std::optional<std::string> dataset;
  std::optional<std::string> dataset_path;
  std::optional<std::string> out;
  std::size_t jobs = 1;
  bool timing = false;
  bool no_aux = false;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--config", config, "JSON experiment config (defaults when omitted)");
    cmd->add_option("--seed", seed, "Run this single seed instead of the config's list");
    cmd->add_option("--variant", variant, "drloc | signed | ce | reg | all");
    cmd->add_option("--m", m, "Pairs sampled per image");
    cmd->add_option("--lambda", lambda, "Weight of the localization loss");
    cmd->add_option("--epochs", epochs, "Total training epochs");
    cmd->add_option("--dataset", dataset, "synthetic | cifar10 | cifar100");
    cmd->add_option("--dataset-path", dataset_path, "Directory holding the CIFAR binaries");
    cmd->add_option("--out", out, "Output directory");
    cmd->add_option("--jobs", jobs, "Concurrent runs")->check(CLI::PositiveNumber);
    cmd->add_flag("--timing", timing, "Record seconds per batch (not reproducible)");
    cmd->add_flag("--no-aux", no_aux, "Remove the localization head entirely");
  }

  exp::ExperimentConfig resolve() const {
    auto c = config.empty() ? exp::ExperimentConfig{} : exp::load_config(config);
    auto& r = c.run;
    if (seed) c.seeds = {*seed};
    if (variant) r.loss.variant = loc::parse_variant(*variant);
    if (m) r.loss.m = *m;
    if (lambda) r.loss.lambda = *lambda;
    if (epochs) {
      r.optim.total_epochs = *epochs;
      // keep the warmup share of the schedule when shortening a run
      if (r.optim.warmup_epochs >= static_cast<double>(*epochs)) {
        r.optim.warmup_epochs = static_cast<double>(*epochs) / 5.0;
      }
    }
    if (dataset) r.dataset.kind = data::parse_dataset_kind(*dataset);
    if (dataset_path) r.dataset.path = *dataset_path;
    if (out) c.output_dir = *out;
    if (timing) r.log_timing = true;
    if (no_aux) r.aux_enabled = false;
    c.validate();
    return c;
  }
};

void write_text(const fs::path& file, const std::string& text) {
  fs::create_directories(file.parent_path());
  std::ofstream os(file, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write " + file.string());
  os << text;
}

int cmd_train(const Overrides& o) {
  const auto config = o.resolve();
  const auto data = data::load_dataset(config.run.dataset, config.run.model.image_side);
  const bool single = config.seeds.size() == 1;
  std::vector<std::string> errors(config.seeds.size());
  std::vector<std::optional<train::TrainRun>> runs(config.seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < config.seeds.size(); i = next++) {
      const auto seed = config.seeds[i];
      const fs::path dir =
          single ? config.output_dir : config.output_dir / ("seed_" + std::to_string(seed));
      auto snapshot = config;
      snapshot.seeds = {seed};
      snapshot.output_dir = dir;
      write_text(dir / "config.json", exp::serialize_config(snapshot));
      runs[i] = train::run_experiment(config.cell(seed, dir), data);
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(o.jobs, 1, config.seeds.size());
  std::vector<std::exception_ptr> failures(threads);
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          worker();
        } catch (...) {
          failures[t] = std::current_exception();
          next = config.seeds.size();
        }
      });
    }
  }
  for (auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& last = runs[i]->records.back();
    std::printf("seed %llu: final test_acc %.2f%%", static_cast<unsigned long long>(config.seeds[i]),
                last.test_acc.value_or(0.0));
    if (last.pretext_l1) {
      std::printf(", pretext L1 %.4f (untrained %.4f)", *last.pretext_l1,
                  runs[i]->initial_pretext_l1.value_or(0.0));
    }
    std::printf("\n");
  }
  return 0;
}

int cmd_sweep(const Overrides& o, const std::string& axis, const std::vector<std::string>& values) {
  const auto config = o.resolve();
  const auto result = exp::sweep(config, exp::parse_axis(axis), values, o.jobs);
  std::cout << exp::results_csv(result);
  for (const auto& cell : result.cells) {
    if (!cell.error.empty()) {
      std::cerr << "cell " << cell.value << " seed " << cell.seed << " failed: " << cell.error
                << "\n";
    }
  }
  return 0;
}

int cmd_plot(const std::vector<std::string>& runs, const std::string& out) {
  std::vector<fs::path> inputs(runs.begin(), runs.end());
  const auto files = exp::emit_plot_data(inputs, out);
  std::printf("wrote %zu curve files to %s\n", files.size(), out.c_str());
  return 0;
}

int cmd_check() {
  std::size_t failed = 0;
  auto report = [&](const std::vector<checks::CheckOutcome>& outcomes) {
    for (const auto& c : outcomes) {
      std::printf("[%s] %s  %s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
      if (!c.passed) ++failed;
    }
  };
  report(checks::oracle_suite());
  report(checks::gradient_suite());
  std::printf("%zu failing check(s)\n", failed);
  return failed == 0 ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vision transformer training with a dense relative localization auxiliary task"};
  app.require_subcommand(1);

  Overrides train_opts;
  auto* train_cmd = app.add_subcommand("train", "Train one run per seed");
  train_opts.add_to(train_cmd);

  Overrides sweep_opts;
  std::string axis;
  std::vector<std::string> values;
  auto* sweep_cmd = app.add_subcommand("sweep", "Ablation sweep over one axis");
  sweep_opts.add_to(sweep_cmd);
  sweep_cmd->add_option("--axis", axis, "m | lambda | variant | grid_side")->required();
  sweep_cmd->add_option("--values", values, "Axis values (comma separated)")
      ->required()
      ->delimiter(',');

  std::vector<std::string> runs;
  std::string plot_out = "plots";
  auto* plot_cmd = app.add_subcommand("plot-data", "Per-metric CSV curves from run directories");
  plot_cmd->add_option("--runs", runs, "Run or sweep directories")->required()->delimiter(',');
  plot_cmd->add_option("--out", plot_out, "Directory for the CSV files");

  auto* check_cmd = app.add_subcommand("check", "Oracle and finite-difference gradient suites");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*train_cmd) return cmd_train(train_opts);
    if (*sweep_cmd) return cmd_sweep(sweep_opts, axis, values);
    if (*plot_cmd) return cmd_plot(runs, plot_out);
    if (*check_cmd) return cmd_check();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
