#pragma once

#include <filesystem>
#include <vector>

namespace drloc::exp {

/// Expands run or sweep directories into run directories: a directory with a
/// metrics.jsonl is a run; otherwise every directory below it holding one is
/// (sorted). A directory with neither is reported as missing.
std::vector<std::filesystem::path> resolve_runs(const std::vector<std::filesystem::path>& inputs);

/// Writes one `epoch,value` CSV per (metric x run) into out_dir, named
/// <run label>__<metric>.csv, where the label is the input's directory name
/// followed by the run path relative to it, separators replaced by '_'. Null entries are skipped, and a
/// metric that is null everywhere gets no file. Values are written with the
/// same digits as the metrics file. Any missing metrics file raises
/// DataError listing all of them before anything is written. Returns the
/// files written.
std::vector<std::filesystem::path> emit_plot_data(const std::vector<std::filesystem::path>& inputs,
                                                  const std::filesystem::path& out_dir);

}  // namespace drloc::exp
