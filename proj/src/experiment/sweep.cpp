#include "drloc/experiment/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <thread>

#include "drloc/numcore/errors.hpp"
#include "drloc/trainer/run.hpp"

namespace drloc::exp {
namespace {

template <typename T>
T parse_number(const std::string& text, const char* what) {
  std::size_t used = 0;
  T v{};
  try {
    if constexpr (std::is_floating_point_v<T>) {
      v = std::stod(text, &used);
    } else {
      if (!text.empty() && text[0] == '-') throw std::invalid_argument("negative");
      v = static_cast<T>(std::stoull(text, &used));
    }
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) {
    throw ConfigError(std::string("sweep: '") + text + "' is not a valid " + what);
  }
  return v;
}

std::string fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

void write_file(const std::filesystem::path& file, const std::string& text) {
  const auto tmp = file.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write " + tmp);
    os << text;
  }
  std::filesystem::rename(tmp, file);
}

// Value text safe for a directory name.
std::string slug(const std::string& value) {
  std::string s = value;
  for (auto& ch : s) {
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '.' || ch == '-')) ch = '_';
  }
  return s;
}

}  // namespace

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::m: return "m";
    case SweepAxis::lambda: return "lambda";
    case SweepAxis::variant: return "variant";
    case SweepAxis::grid_side: return "grid_side";
  }
  return "?";
}

SweepAxis parse_axis(const std::string& text) {
  if (text == "m") return SweepAxis::m;
  if (text == "lambda") return SweepAxis::lambda;
  if (text == "variant") return SweepAxis::variant;
  if (text == "grid_side") return SweepAxis::grid_side;
  throw ConfigError("unknown sweep axis '" + text + "' (expected m|lambda|variant|grid_side)");
}

train::RunSpec apply_axis(const train::RunSpec& base, SweepAxis axis, const std::string& value) {
  auto spec = base;
  switch (axis) {
    case SweepAxis::m:
      spec.loss.m = parse_number<std::size_t>(value, "pair count");
      break;
    case SweepAxis::lambda:
      spec.loss.lambda = parse_number<double>(value, "lambda");
      break;
    case SweepAxis::variant:
      spec.loss.variant = loc::parse_variant(value);
      break;
    case SweepAxis::grid_side: {
      const auto k = parse_number<std::size_t>(value, "grid side");
      if (k == 0 || spec.model.image_side % k != 0) {
        throw ConfigError("sweep: grid side " + value + " does not divide image_side " +
                          std::to_string(spec.model.image_side));
      }
      spec.model.patch_side = spec.model.image_side / k;
      spec.model.pool_final_grid = false;
      break;
    }
  }
  spec.validate();
  return spec;
}

SweepResult sweep(const ExperimentConfig& config, SweepAxis axis,
                  const std::vector<std::string>& values, std::size_t jobs) {
  config.validate();
  const auto data = data::load_dataset(config.run.dataset, config.run.model.image_side);
  return sweep(config, axis, values, jobs, data);
}

SweepResult sweep(const ExperimentConfig& config, SweepAxis axis,
                  const std::vector<std::string>& values, std::size_t jobs,
                  const data::DatasetSplits& data) {
  config.validate();
  if (values.empty()) throw ConfigError("sweep: no axis values given");
  SweepResult result;
  result.axis = axis;

  // Reject bad values before any training starts.
  std::vector<train::RunSpec> templates;
  for (const auto& v : values) templates.push_back(apply_axis(config.run, axis, v));

  for (const auto& v : values) {
    for (auto seed : config.seeds) {
      SweepCell cell;
      cell.value = v;
      cell.seed = seed;
      cell.out_dir = config.output_dir / (to_string(axis) + "_" + slug(v)) /
                     ("seed_" + std::to_string(seed));
      result.cells.push_back(std::move(cell));
    }
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < result.cells.size(); i = next++) {
      auto& cell = result.cells[i];
      auto spec = templates[i / config.seeds.size()];
      spec.seed = cell.seed;
      spec.out_dir = cell.out_dir;
      try {
        std::filesystem::create_directories(cell.out_dir);
        ExperimentConfig snapshot = config;
        snapshot.run = spec;
        snapshot.run.seed = 0;
        snapshot.run.out_dir.clear();
        snapshot.seeds = {cell.seed};
        snapshot.output_dir = cell.out_dir;
        write_file(cell.out_dir / "config.json", serialize_config(snapshot));
        const auto run = train::run_experiment(spec, data);
        cell.test_acc = run.records.back().test_acc;
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(jobs, 1, result.cells.size());
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  for (std::size_t vi = 0; vi < values.size(); ++vi) {
    SweepRow row;
    row.value = values[vi];
    std::vector<double> accs;
    for (std::size_t s = 0; s < config.seeds.size(); ++s) {
      const auto& cell = result.cells[vi * config.seeds.size() + s];
      if (cell.error.empty() && cell.test_acc) {
        accs.push_back(*cell.test_acc);
        ++row.completed;
      } else {
        ++row.failed;
      }
    }
    if (!accs.empty()) {
      double mean = 0.0;
      for (double a : accs) mean += a;
      mean /= static_cast<double>(accs.size());
      double var = 0.0;
      for (double a : accs) var += (a - mean) * (a - mean);
      row.mean_acc = mean;
      row.std_acc = accs.size() > 1 ? std::sqrt(var / static_cast<double>(accs.size() - 1)) : 0.0;
    }
    result.rows.push_back(row);
  }

  std::filesystem::create_directories(config.output_dir);
  write_file(config.output_dir / "results.csv", results_csv(result));
  write_file(config.output_dir / "cells.csv", cells_csv(result));
  return result;
}

std::string results_csv(const SweepResult& result) {
  std::string out = to_string(result.axis) + ",completed,failed,mean_test_acc,std_test_acc\n";
  for (const auto& row : result.rows) {
    out += row.value + "," + std::to_string(row.completed) + "," + std::to_string(row.failed) +
           "," + (row.mean_acc ? fixed(*row.mean_acc) : "") + "," +
           (row.std_acc ? fixed(*row.std_acc) : "") + "\n";
  }
  return out;
}

std::string cells_csv(const SweepResult& result) {
  std::string out = to_string(result.axis) + ",seed,test_acc,status\n";
  for (const auto& cell : result.cells) {
    std::string status = "ok";
    if (!cell.error.empty()) {
      status = "\"error: ";
      for (char ch : cell.error) {
        if (ch == '"') status += "\"\"";
        else if (ch == '\n') status += ' ';
        else status += ch;
      }
      status += "\"";
    }
    out += cell.value + "," + std::to_string(cell.seed) + "," +
           (cell.test_acc ? fixed(*cell.test_acc) : "") + "," + status + "\n";
  }
  return out;
}

}  // namespace drloc::exp
