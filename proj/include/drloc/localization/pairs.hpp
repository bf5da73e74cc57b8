#pragma once

#include <cstddef>
#include <vector>

#include "drloc/gridops/grid.hpp"
#include "drloc/numcore/rng.hpp"
#include "drloc/numcore/tensor.hpp"

namespace drloc::loc {

/// m sampled position pairs for each of n images on a k x k grid, with every
/// target representation the loss variants need. Integer arrays are laid out
/// [n, m, 2] row-major with the last axis (row, col) / (u, v).
struct PairBatch {
  std::size_t n = 0;
  std::size_t m = 0;
  std::size_t k = 0;
  std::vector<int> pos_a;
  std::vector<int> pos_b;
  nc::Tensor offsets_abs;     // |a - b| / k
  nc::Tensor offsets_signed;  // (a - b) / k
  std::vector<int> classes;   // a - b, in {-(k-1), ..., k-1}

  std::size_t pairs() const { return n * m; }
};

/// Derives offsets and classes for explicit positions (row, col pairs,
/// [n, m, 2] layout). Positions must lie in [0, k).
PairBatch make_pairs(std::size_t k, std::size_t m, std::size_t n, std::vector<int> pos_a,
                     std::vector<int> pos_b);

/// Draws every coordinate independently and uniformly from {0, ..., k-1}:
/// all of pos_a first, then all of pos_b. Identical pairs are allowed.
PairBatch sample_pairs(std::size_t k, std::size_t m, std::size_t n, nc::Rng& rng);

/// out[b, q, :] = grid.values[b, :, pos[b, q, 0], pos[b, q, 1]]; returns [n, m, d].
nc::Tensor collect_embeddings(const grid::TokenGrid& grid, const std::vector<int>& positions,
                              std::size_t m);

}  // namespace drloc::loc
