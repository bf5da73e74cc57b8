#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "drloc/data/dataset.hpp"
#include "drloc/localization/head.hpp"
#include "drloc/numcore/checkpoint.hpp"
#include "drloc/trainer/optim.hpp"
#include "drloc/vit/vit.hpp"

namespace drloc::train {

/// Everything needed to reproduce one training run.
struct RunSpec {
  vit::VitConfig model;
  loc::LossVariantSpec loss;
  OptimSpec optim;
  data::DatasetSpec dataset;
  std::uint64_t seed = 0;
  std::size_t head_hidden = 512;
  /// false removes the localization head and pair sampling entirely.
  bool aux_enabled = true;
  /// The localization head is in the weight-decayed set unless disabled.
  bool head_weight_decay = true;
  std::size_t eval_interval = 1;
  std::size_t checkpoint_every = 5;  // 0 disables periodic checkpoints
  /// Wall-clock timing is the only nondeterministic metric; when off,
  /// sec_per_batch is written as null.
  bool log_timing = false;
  /// Extra ce-only / aux-only backward passes on each epoch's first batch,
  /// written to grad_norms.jsonl.
  bool log_grad_norms = false;
  std::filesystem::path out_dir;  // empty: keep everything in memory

  void validate() const;

  bool operator==(const RunSpec&) const = default;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 0-based
  double lr = 0.0;        // at the end of the epoch
  double loss_ce = 0.0;
  double loss_aux = 0.0;
  double loss_total = 0.0;
  std::optional<double> test_acc;    // percent
  std::optional<double> pretext_l1;  // held-out mean |offset error|
  std::optional<double> sec_per_batch;
};

struct TrainRun {
  RunSpec spec;
  std::vector<EpochRecord> records;
  /// Held-out pretext error of the untrained model.
  std::optional<double> initial_pretext_l1;
  std::vector<nc::NamedTensor> backbone;  // final parameter values
  std::vector<nc::NamedTensor> heads;
};

/// Loads the dataset named by spec.dataset and trains.
TrainRun run_experiment(const RunSpec& spec);
/// Trains on already-loaded data (shared across seeds by sweeps).
TrainRun run_experiment(const RunSpec& spec, const data::DatasetSplits& data);

/// Serialises one metrics line (fixed key order, no trailing newline).
std::string metrics_line(const EpochRecord& record);
/// Parses a metrics.jsonl file back into records.
std::vector<EpochRecord> read_metrics(const std::filesystem::path& file);

struct StepTiming {
  double with_aux = 0.0;     // mean seconds per batch
  double without_aux = 0.0;
  std::size_t batches = 0;
};

/// Times full training steps (forward, backward, clip, AdamW) with and
/// without the auxiliary task on identical batches, alternating between the
/// two so drift affects both equally. The first `warmup` steps of each are
/// discarded.
StepTiming measure_step_time(const RunSpec& spec, const data::DatasetSplits& data,
                             std::size_t batches, std::size_t warmup = 2);

}  // namespace drloc::train
