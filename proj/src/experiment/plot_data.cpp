#include "drloc/experiment/plot_data.hpp"

#include <algorithm>
#include <fstream>
#include <string>

#include "drloc/numcore/errors.hpp"
#include "json.hpp"

namespace drloc::exp {
namespace fs = std::filesystem;

namespace {

const char* const kMetrics[] = {"lr",         "loss_ce",    "loss_aux",     "loss_total",
                                "test_acc",   "pretext_l1", "sec_per_batch"};

struct RunRef {
  fs::path dir;
  std::string label;
};

std::string label_for(const fs::path& input, const fs::path& run) {
  auto rel = run.lexically_relative(input).generic_string();
  std::string base = input.filename().string();
  if (base.empty()) base = input.parent_path().filename().string();
  std::string label = (rel.empty() || rel == ".") ? base : base + "/" + rel;
  std::replace(label.begin(), label.end(), '/', '_');
  return label;
}

std::vector<RunRef> resolve_with_labels(const std::vector<fs::path>& inputs) {
  std::vector<RunRef> runs;
  std::vector<std::string> missing;
  for (const auto& input : inputs) {
    if (fs::is_regular_file(input / "metrics.jsonl")) {
      runs.push_back({input, label_for(input, input)});
      continue;
    }
    std::vector<fs::path> found;
    if (fs::is_directory(input)) {
      for (const auto& entry : fs::recursive_directory_iterator(input)) {
        if (entry.is_regular_file() && entry.path().filename() == "metrics.jsonl") {
          found.push_back(entry.path().parent_path());
        }
      }
    }
    if (found.empty()) {
      missing.push_back(input.string());
      continue;
    }
    std::sort(found.begin(), found.end());
    for (const auto& dir : found) runs.push_back({dir, label_for(input, dir)});
  }
  if (!missing.empty()) {
    std::string msg = "no metrics.jsonl for:";
    for (const auto& m : missing) msg += " " + m;
    throw DataError(msg);
  }
  return runs;
}

}  // namespace

std::vector<fs::path> resolve_runs(const std::vector<fs::path>& inputs) {
  std::vector<fs::path> out;
  for (const auto& r : resolve_with_labels(inputs)) out.push_back(r.dir);
  return out;
}

std::vector<fs::path> emit_plot_data(const std::vector<fs::path>& inputs, const fs::path& out_dir) {
  using json = nlohmann::json;
  const auto runs = resolve_with_labels(inputs);
  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  for (const auto& run : runs) {
    std::ifstream is(run.dir / "metrics.jsonl");
    std::vector<json> lines;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
      ++line_no;
      if (line.empty()) continue;
      try {
        lines.push_back(json::parse(line));
      } catch (const json::exception& e) {
        throw DataError((run.dir / "metrics.jsonl").string() + ":" + std::to_string(line_no) +
                        ": " + e.what());
      }
    }
    for (const char* metric : kMetrics) {
      std::string csv = "epoch,value\n";
      std::size_t rows = 0;
      for (const auto& j : lines) {
        const auto it = j.find(metric);
        if (it == j.end() || it->is_null()) continue;
        csv += j.at("epoch").dump() + "," + it->dump() + "\n";
        ++rows;
      }
      if (rows == 0) continue;
      const auto file = out_dir / (run.label + "__" + metric + ".csv");
      std::ofstream os(file, std::ios::binary | std::ios::trunc);
      if (!os) throw DataError("cannot write " + file.string());
      os << csv;
      written.push_back(file);
    }
  }
  return written;
}

}  // namespace drloc::exp
