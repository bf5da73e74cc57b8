#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "drloc/numcore/rng.hpp"
#include "drloc/numcore/tensor.hpp"
#include "drloc/trainer/run.hpp"

namespace testutil {

inline drloc::nc::Tensor normal(drloc::nc::Rng& rng, drloc::nc::Shape shape, double scale = 1.0,
                                bool requires_grad = false) {
  std::vector<double> v(drloc::nc::shape_numel(shape));
  for (auto& x : v) x = scale * rng.normal();
  return drloc::nc::Tensor::from(std::move(shape), std::move(v), requires_grad);
}

inline bool same_bits(double a, double b) {
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

inline bool same_bits(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!same_bits(a[i], b[i])) return false;
  }
  return true;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("drloc_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// A run small enough to train in well under a second: 8x8 images, 2x2 grid,
/// one block of width 8, three classes.
inline drloc::train::RunSpec tiny_run(std::uint64_t seed = 3) {
  drloc::train::RunSpec s;
  s.model.image_side = 8;
  s.model.patch_side = 4;
  s.model.embed_dim = 8;
  s.model.blocks = 1;
  s.model.heads = 2;
  s.model.mlp_ratio = 2;
  s.model.classes = 3;
  s.loss.m = 4;
  s.loss.lambda = 0.5;
  s.optim.total_epochs = 2;
  s.optim.warmup_epochs = 0.5;
  s.optim.batch_size = 8;
  s.dataset.synthetic.classes = 3;
  s.dataset.synthetic.image_side = 8;
  s.dataset.synthetic.samples_train = 20;
  s.dataset.synthetic.samples_test = 10;
  s.head_hidden = 16;
  s.checkpoint_every = 1;
  s.seed = seed;
  return s;
}

}  // namespace testutil
