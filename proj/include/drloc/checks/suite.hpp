#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace drloc::checks {

struct CheckOutcome {
  std::string name;
  bool passed = false;
  std::string detail;
  double max_error = 0.0;  // max relative error for gradient checks
};

/// Finite-difference checks of every differentiable primitive, every
/// localization loss variant, the classification loss, and the full
/// ce + lambda * aux objective of a 2-block, d=16, 3x3-grid model for each
/// variant.
std::vector<CheckOutcome> gradient_suite(std::uint64_t seed = 7);

/// Loss values against the plain-loop oracles (bit-exact for the L1
/// variants, 1e-9 for ce / reg), the per-block sum with one block against
/// the single-grid loss, pooling against the four-term mean, and the
/// sequence/grid round trip.
std::vector<CheckOutcome> oracle_suite(std::uint64_t seed = 11);

}  // namespace drloc::checks
