#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "drloc/experiment/config.hpp"
#include "drloc/experiment/plot_data.hpp"
#include "drloc/experiment/sweep.hpp"
#include "drloc/numcore/errors.hpp"
#include "helpers.hpp"

using namespace drloc;

namespace {

exp::ExperimentConfig tiny_config(const std::filesystem::path& out) {
  exp::ExperimentConfig c;
  c.run = testutil::tiny_run();
  c.run.checkpoint_every = 0;
  c.seeds = {1, 2};
  c.output_dir = out;
  return c;
}

std::size_t line_count(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST(Config, SerializeParseRoundTrip) {
  auto c = tiny_config("some/dir");
  c.run.loss.variant = loc::LossVariant::reg;
  c.run.loss.alpha = 0.25;
  c.run.model.use_abs_pos_embed = false;
  c.run.dataset.kind = data::DatasetKind::cifar100;
  c.run.dataset.path = "/data/c100";
  c.run.optim.warmup_epochs = 0.75;
  c.run.log_grad_norms = true;
  const auto text = exp::serialize_config(c);
  auto back = exp::parse_config(text);
  EXPECT_EQ(back.seeds, c.seeds);
  EXPECT_EQ(back.output_dir, c.output_dir);
  // run.seed and out_dir are per-cell and not serialised
  back.run.seed = c.run.seed;
  EXPECT_TRUE(back.run == c.run);
  EXPECT_EQ(exp::serialize_config(back), text);
}

TEST(Config, EmptyObjectGivesDefaults) {
  const auto c = exp::parse_config("{}");
  EXPECT_TRUE(c == exp::ExperimentConfig{});
  EXPECT_EQ(c.run.optim.total_epochs, 25u);
  EXPECT_EQ(c.run.loss.m, 64u);
}

TEST(Config, UnknownKeyIsRejected) {
  try {
    exp::parse_config(R"({"loss": {"lamda": 0.5}})");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("lamda"), std::string::npos) << e.what();
  }
  EXPECT_THROW(exp::parse_config(R"({"extra": 1})"), ConfigError);
}

TEST(Config, WrongTypesAndBadValuesAreRejected) {
  EXPECT_THROW(exp::parse_config(R"({"loss": {"m": "64"}})"), ConfigError);
  EXPECT_THROW(exp::parse_config(R"({"loss": {"m": -3}})"), ConfigError);
  EXPECT_THROW(exp::parse_config(R"({"model": {"use_abs_pos_embed": 1}})"), ConfigError);
  EXPECT_THROW(exp::parse_config(R"({"seeds": []})"), ConfigError);
  EXPECT_THROW(exp::parse_config(R"({"loss": {"variant": "l2"}})"), ConfigError);
  EXPECT_THROW(exp::parse_config("{not json"), ConfigError);
  EXPECT_THROW(exp::load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Sweep, AxisValuesApply) {
  const auto base = testutil::tiny_run();
  EXPECT_EQ(exp::apply_axis(base, exp::SweepAxis::m, "32").loss.m, 32u);
  EXPECT_EQ(exp::apply_axis(base, exp::SweepAxis::lambda, "0.25").loss.lambda, 0.25);
  EXPECT_EQ(exp::apply_axis(base, exp::SweepAxis::variant, "ce").loss.variant,
            loc::LossVariant::ce);
  const auto g = exp::apply_axis(base, exp::SweepAxis::grid_side, "4");
  EXPECT_EQ(g.model.native_side(), 4u);
  EXPECT_THROW(exp::parse_axis("depth"), ConfigError);
}

TEST(Sweep, RerunIsByteIdentical) {
  const auto dir = testutil::scratch_dir("sweep");
  auto c = tiny_config(dir / "a");
  const auto r1 = exp::sweep(c, exp::SweepAxis::lambda, {"0", "0.5"}, 2);
  c.output_dir = dir / "b";
  const auto r2 = exp::sweep(c, exp::SweepAxis::lambda, {"0", "0.5"}, 1);
  ASSERT_EQ(r1.rows.size(), 2u);
  EXPECT_EQ(r1.rows[0].completed, 2u);
  EXPECT_EQ(r1.rows[0].failed, 0u);
  EXPECT_EQ(testutil::read_file(dir / "a" / "results.csv"),
            testutil::read_file(dir / "b" / "results.csv"));
  EXPECT_EQ(testutil::read_file(dir / "a" / "cells.csv"),
            testutil::read_file(dir / "b" / "cells.csv"));
  EXPECT_EQ(testutil::read_file(dir / "a" / "lambda_0.5" / "seed_2" / "metrics.jsonl"),
            testutil::read_file(dir / "b" / "lambda_0.5" / "seed_2" / "metrics.jsonl"));
  const auto results = testutil::read_file(dir / "a" / "results.csv");
  EXPECT_EQ(results.substr(0, results.find('\n')),
            "lambda,completed,failed,mean_test_acc,std_test_acc");
  EXPECT_EQ(line_count(results), 3u);
  EXPECT_TRUE(std::filesystem::exists(dir / "a" / "lambda_0" / "seed_1" / "config.json"));
}

TEST(Sweep, FailingCellIsRecordedAndSweepContinues) {
  const auto dir = testutil::scratch_dir("sweep_fail");
  auto c = tiny_config(dir);
  c.seeds = {1};
  // a plain file where the second cell's directory should go
  std::ofstream(dir / "lambda_0.25") << "occupied";
  const auto r = exp::sweep(c, exp::SweepAxis::lambda, {"0.5", "0.25"}, 1);
  ASSERT_EQ(r.cells.size(), 2u);
  EXPECT_TRUE(r.cells[0].error.empty());
  EXPECT_TRUE(r.cells[0].test_acc.has_value());
  EXPECT_FALSE(r.cells[1].error.empty());
  EXPECT_EQ(r.rows[1].failed, 1u);
  EXPECT_FALSE(r.rows[1].mean_acc.has_value());
  const auto cells = testutil::read_file(dir / "cells.csv");
  EXPECT_NE(cells.find("error: "), std::string::npos) << cells;
  // out-of-range values are rejected before any cell runs
  EXPECT_THROW(exp::sweep(c, exp::SweepAxis::lambda, {"0.5", "-1"}, 1), ConfigError);
}

TEST(Sweep, NumericalFailureIsRecorded) {
  const auto dir = testutil::scratch_dir("sweep_nan");
  auto c = tiny_config(dir);
  c.seeds = {1};
  auto data = data::load_dataset(c.run.dataset, c.run.model.image_side);
  data.train.pixels[0] = std::nan("");
  const auto r = exp::sweep(c, exp::SweepAxis::m, {"4"}, 1, data);
  ASSERT_EQ(r.cells.size(), 1u);
  EXPECT_FALSE(r.cells[0].error.empty());
  EXPECT_EQ(r.rows[0].completed, 0u);
}

TEST(PlotData, OneFilePerMetricWithMatchingDigits) {
  const auto dir = testutil::scratch_dir("plot");
  auto spec = testutil::tiny_run();
  spec.optim.total_epochs = 3;
  spec.out_dir = dir / "run";
  const auto run = train::run_experiment(spec);
  const auto files = exp::emit_plot_data({dir / "run"}, dir / "plots");
  // sec_per_batch is null everywhere without timing
  EXPECT_EQ(files.size(), 6u);
  EXPECT_FALSE(std::filesystem::exists(dir / "plots" / "run__sec_per_batch.csv"));
  const auto csv = testutil::read_file(dir / "plots" / "run__loss_ce.csv");
  EXPECT_EQ(line_count(csv), 4u);
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "epoch,value");
  for (std::size_t e = 0; e < 3; ++e) {
    std::getline(is, line);
    const auto comma = line.find(',');
    EXPECT_EQ(std::stoul(line.substr(0, comma)), e);
    EXPECT_EQ(std::stod(line.substr(comma + 1)), run.records[e].loss_ce);
  }
}

TEST(PlotData, SweepDirectoryExpandsToRuns) {
  const auto dir = testutil::scratch_dir("plot_sweep");
  auto c = tiny_config(dir / "sw");
  exp::sweep(c, exp::SweepAxis::m, {"2", "4"}, 1);
  const auto runs = exp::resolve_runs({dir / "sw"});
  EXPECT_EQ(runs.size(), 4u);
  const auto files = exp::emit_plot_data({dir / "sw"}, dir / "plots");
  EXPECT_TRUE(std::filesystem::exists(dir / "plots" / "sw_m_2_seed_1__test_acc.csv"));
  // every run's series shares the same epoch column
  const auto a = testutil::read_file(dir / "plots" / "sw_m_2_seed_1__test_acc.csv");
  const auto b = testutil::read_file(dir / "plots" / "sw_m_4_seed_2__test_acc.csv");
  EXPECT_EQ(line_count(a), line_count(b));
}

TEST(PlotData, MissingRunsAreListed) {
  const auto dir = testutil::scratch_dir("plot_missing");
  std::filesystem::create_directories(dir / "empty");
  try {
    exp::emit_plot_data({dir / "empty", dir / "gone"}, dir / "plots");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("empty"), std::string::npos) << msg;
    EXPECT_NE(msg.find("gone"), std::string::npos) << msg;
  }
  EXPECT_FALSE(std::filesystem::exists(dir / "plots"));
}
