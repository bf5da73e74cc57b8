#include "drloc/gridops/grid.hpp"

#include <cmath>
#include <string>

#include "drloc/numcore/errors.hpp"
#include "drloc/numcore/ops.hpp"

namespace drloc::grid {

TokenGrid TokenGrid::wrap(nc::Tensor values) {
  if (values.rank() != 4 || values.dim(2) != values.dim(3)) {
    throw ConfigError("token grid: expected [n, d, k, k], got " + nc::shape_str(values.shape()));
  }
  if (values.dim(2) < 2) throw ConfigError("token grid: side must be at least 2");
  return TokenGrid{std::move(values)};
}

TokenGrid sequence_to_grid(const nc::Tensor& tokens) {
  if (tokens.rank() != 3) {
    throw ConfigError("sequence_to_grid: expected [n, tokens, d], got " +
                      nc::shape_str(tokens.shape()));
  }
  const std::size_t n = tokens.dim(0);
  const std::size_t count = tokens.dim(1);
  const std::size_t d = tokens.dim(2);
  const auto k = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(count))));
  if (k * k != count) {
    throw ConfigError("sequence_to_grid: token count " + std::to_string(count) +
                      " is not a perfect square");
  }
  auto cells = nc::reshape(tokens, {n, k, k, d});
  return TokenGrid::wrap(nc::permute(cells, {0, 3, 1, 2}));
}

nc::Tensor grid_to_sequence(const TokenGrid& grid) {
  const std::size_t k = grid.side();
  auto cells = nc::permute(grid.values, {0, 2, 3, 1});
  return nc::reshape(cells, {grid.batch(), k * k, grid.dim()});
}

TokenGrid pool_to_target(const TokenGrid& grid, std::size_t target_side) {
  if (grid.side() == target_side) return grid;
  if (grid.side() != 2 * target_side) {
    throw ConfigError("pool_to_target: cannot pool a " + std::to_string(grid.side()) + "x" +
                      std::to_string(grid.side()) + " grid to " + std::to_string(target_side) +
                      "x" + std::to_string(target_side) + " (only 2:1 is supported)");
  }
  return TokenGrid::wrap(nc::avgpool2x2(grid.values));
}

}  // namespace drloc::grid
