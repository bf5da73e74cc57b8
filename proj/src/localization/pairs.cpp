#include "drloc/localization/pairs.hpp"

#include <cstdlib>
#include <string>

#include "drloc/numcore/errors.hpp"
#include "drloc/numcore/ops.hpp"

namespace drloc::loc {

PairBatch make_pairs(std::size_t k, std::size_t m, std::size_t n, std::vector<int> pos_a,
                     std::vector<int> pos_b) {
  if (k < 2 || m < 1 || n < 1) {
    throw ConfigError("pairs: need k >= 2, m >= 1, n >= 1 (got k=" + std::to_string(k) +
                      ", m=" + std::to_string(m) + ", n=" + std::to_string(n) + ")");
  }
  const std::size_t count = n * m * 2;
  if (pos_a.size() != count || pos_b.size() != count) {
    throw ConfigError("pairs: expected " + std::to_string(count) + " coordinates per side");
  }
  const int side = static_cast<int>(k);
  const double kd = static_cast<double>(k);
  std::vector<double> abs_off(count);
  std::vector<double> signed_off(count);
  std::vector<int> classes(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (pos_a[i] < 0 || pos_a[i] >= side || pos_b[i] < 0 || pos_b[i] >= side) {
      throw UsageError("pairs: position outside a " + std::to_string(k) + "x" +
                       std::to_string(k) + " grid");
    }
    const int delta = pos_a[i] - pos_b[i];
    classes[i] = delta;
    signed_off[i] = static_cast<double>(delta) / kd;
    abs_off[i] = static_cast<double>(std::abs(delta)) / kd;
  }
  PairBatch batch;
  batch.n = n;
  batch.m = m;
  batch.k = k;
  batch.pos_a = std::move(pos_a);
  batch.pos_b = std::move(pos_b);
  batch.offsets_abs = nc::Tensor::from({n, m, 2}, std::move(abs_off));
  batch.offsets_signed = nc::Tensor::from({n, m, 2}, std::move(signed_off));
  batch.classes = std::move(classes);
  return batch;
}

PairBatch sample_pairs(std::size_t k, std::size_t m, std::size_t n, nc::Rng& rng) {
  if (k < 2 || m < 1 || n < 1) {
    throw ConfigError("sample_pairs: need k >= 2, m >= 1, n >= 1");
  }
  const std::size_t count = n * m * 2;
  std::vector<int> a(count);
  std::vector<int> b(count);
  for (auto& v : a) v = static_cast<int>(rng.uniform_int(k));
  for (auto& v : b) v = static_cast<int>(rng.uniform_int(k));
  return make_pairs(k, m, n, std::move(a), std::move(b));
}

nc::Tensor collect_embeddings(const grid::TokenGrid& grid, const std::vector<int>& positions,
                              std::size_t m) {
  const std::size_t n = grid.batch();
  const std::size_t k = grid.side();
  const std::size_t d = grid.dim();
  if (positions.size() != n * m * 2) {
    throw ConfigError("collect_embeddings: expected " + std::to_string(n * m * 2) +
                      " coordinates, got " + std::to_string(positions.size()));
  }
  std::vector<std::size_t> rows(n * m);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t q = 0; q < m; ++q) {
      const int i = positions[(b * m + q) * 2];
      const int j = positions[(b * m + q) * 2 + 1];
      if (i < 0 || j < 0 || static_cast<std::size_t>(i) >= k || static_cast<std::size_t>(j) >= k) {
        throw UsageError("collect_embeddings: position (" + std::to_string(i) + ", " +
                         std::to_string(j) + ") outside the grid");
      }
      rows[b * m + q] = b * k * k + static_cast<std::size_t>(i) * k + static_cast<std::size_t>(j);
    }
  }
  auto flat = nc::reshape(grid::grid_to_sequence(grid), {n * k * k, d});
  return nc::reshape(nc::gather_rows(flat, rows), {n, m, d});
}

}  // namespace drloc::loc
