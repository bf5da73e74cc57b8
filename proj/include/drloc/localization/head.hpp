#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "drloc/numcore/layers.hpp"
#include "drloc/numcore/rng.hpp"
#include "drloc/numcore/tensor.hpp"

namespace drloc::loc {

enum class LossVariant { drloc, signed_offsets, ce, reg, all };

std::string to_string(LossVariant v);
/// Accepts "drloc", "signed", "ce", "reg", "all".
LossVariant parse_variant(const std::string& text);
/// ce and reg predict class distributions; the rest regress two offsets.
bool is_classification(LossVariant v);

struct LossVariantSpec {
  LossVariant variant = LossVariant::drloc;
  std::size_t m = 64;
  double lambda = 0.1;
  double alpha = 1e-3;
  double sigma_floor = 1e-6;

  void validate() const;

  bool operator==(const LossVariantSpec&) const = default;
};

/// Three-layer MLP over the concatenated pair (e_a, e_b):
/// 2d -> hidden (relu) -> hidden (relu) -> outputs.
struct LocalizationHead {
  nc::Linear layer1;
  nc::Linear layer2;
  nc::Linear layer3;
  bool classification = false;
  std::size_t grid_side = 0;  // k; sets the 2k+1 class count when classifying

  static LocalizationHead create(std::size_t embed_dim, std::size_t hidden, LossVariant variant,
                                 std::size_t grid_side, nc::Rng& rng);

  std::size_t input_width() const { return layer1.in_features(); }
  std::size_t classes_per_axis() const { return 2 * grid_side + 1; }
  void collect(const std::string& prefix, std::vector<nc::Parameter>& out) const;
};

/// One head per block for the per-block variant, otherwise a single head.
using HeadSet = std::vector<LocalizationHead>;

struct HeadPrediction {
  nc::Tensor offsets;  // [n, m, 2] for regression heads
  nc::Tensor probs_u;  // [n, m, 2k+1] for classification heads
  nc::Tensor probs_v;
};

/// e_a, e_b: [n, m, d]. Concatenation order is (e_a, e_b).
HeadPrediction head_forward(const LocalizationHead& head, const nc::Tensor& e_a,
                            const nc::Tensor& e_b);

}  // namespace drloc::loc
