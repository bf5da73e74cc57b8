#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "drloc/data/dataset.hpp"
#include "drloc/experiment/config.hpp"

namespace drloc::exp {

enum class SweepAxis { m, lambda, variant, grid_side };

std::string to_string(SweepAxis axis);
SweepAxis parse_axis(const std::string& text);

/// Returns `base` with the axis set to `value`. grid_side changes the patch
/// side so that image_side / patch_side == value.
train::RunSpec apply_axis(const train::RunSpec& base, SweepAxis axis, const std::string& value);

struct SweepCell {
  std::string value;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
  std::optional<double> test_acc;  // final-epoch accuracy, percent
  std::string error;               // empty on success
};

struct SweepRow {
  std::string value;
  std::size_t completed = 0;
  std::size_t failed = 0;
  std::optional<double> mean_acc;
  std::optional<double> std_acc;  // sample std; 0 for a single seed
};

struct SweepResult {
  SweepAxis axis = SweepAxis::m;
  std::vector<SweepCell> cells;  // value-major, then seed
  std::vector<SweepRow> rows;
};

/// Runs every (value x seed) cell, at most `jobs` at a time, each into
/// output_dir/<axis>_<value>/seed_<seed>. A failing cell is recorded and
/// the sweep continues. Writes results.csv (one row per value) and
/// cells.csv (one row per cell) into output_dir.
SweepResult sweep(const ExperimentConfig& config, SweepAxis axis,
                  const std::vector<std::string>& values, std::size_t jobs = 1);
/// Same, with the dataset already loaded.
SweepResult sweep(const ExperimentConfig& config, SweepAxis axis,
                  const std::vector<std::string>& values, std::size_t jobs,
                  const data::DatasetSplits& data);

std::string results_csv(const SweepResult& result);
std::string cells_csv(const SweepResult& result);

}  // namespace drloc::exp
