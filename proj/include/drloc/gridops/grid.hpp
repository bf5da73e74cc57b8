#pragma once

#include <cstddef>
#include <vector>

#include "drloc/numcore/tensor.hpp"

namespace drloc::grid {

/// A batch of k x k grids of d-dimensional token embeddings, stored
/// [n, d, k, k]. Cell (i, j) sits at flat spatial index i * k + j.
struct TokenGrid {
  nc::Tensor values;

  std::size_t batch() const { return values.dim(0); }
  std::size_t dim() const { return values.dim(1); }
  std::size_t side() const { return values.dim(2); }

  /// Wraps an [n, d, k, k] tensor; rejects non-square or 1x1 grids.
  static TokenGrid wrap(nc::Tensor values);
};

/// One grid per transformer block, in block order.
using BlockGridSet = std::vector<TokenGrid>;

/// tokens [n, k*k, d] -> grid; token t lands at cell (t / k, t % k).
TokenGrid sequence_to_grid(const nc::Tensor& tokens);

/// Inverse of sequence_to_grid.
nc::Tensor grid_to_sequence(const TokenGrid& grid);

/// Parameter-free 2x2 average pooling. Only side == 2 * target_side (pool)
/// and side == target_side (identity) are supported.
TokenGrid pool_to_target(const TokenGrid& grid, std::size_t target_side);

}  // namespace drloc::grid
