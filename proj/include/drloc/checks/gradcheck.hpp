#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "drloc/numcore/tensor.hpp"

namespace drloc::checks {

inline constexpr double kFiniteDifferenceStep = 1e-5;
inline constexpr double kGradientTolerance = 1e-3;

/// |a - n| / max(|a|, |n|, 1e-6)
double relative_error(double analytic, double numeric);

struct GradCheckReport {
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  std::string worst;  // "<input>[<flat index>]: analytic vs numeric"
  bool passed = true;
};

/// Compares reverse-mode gradients of the 0-d output of `f` with central
/// differences, perturbing `inputs` in place (values are restored). `f` must
/// be deterministic and read the inputs afresh on every call. With
/// max_per_input > 0, each input is probed at that many positions chosen by
/// `sample_seed` (always including the first and last element).
GradCheckReport check_gradients(const std::string& name, const std::function<nc::Tensor()>& f,
                                const std::vector<nc::Tensor>& inputs,
                                std::size_t max_per_input = 0, std::uint64_t sample_seed = 1,
                                double step = kFiniteDifferenceStep,
                                double tolerance = kGradientTolerance);

}  // namespace drloc::checks
