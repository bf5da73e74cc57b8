#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "drloc/trainer/run.hpp"

namespace drloc::exp {

/// A run template plus the seeds to repeat it over. run.seed and run.out_dir
/// are ignored; each (seed) cell gets its own values from cell().
struct ExperimentConfig {
  train::RunSpec run;
  std::vector<std::uint64_t> seeds{0};
  std::filesystem::path output_dir = "runs";

  void validate() const;
  train::RunSpec cell(std::uint64_t seed, const std::filesystem::path& out_dir) const;

  bool operator==(const ExperimentConfig&) const = default;
};

/// JSON with the sections model, loss, optim, dataset, training plus the
/// top-level seeds and output_dir. Every key is optional and falls back to
/// the default; unknown keys and wrongly typed values raise ConfigError.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& file);
/// Writes every field, so parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& config);

}  // namespace drloc::exp
