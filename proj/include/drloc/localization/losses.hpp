#pragma once

#include <vector>

#include "drloc/gridops/grid.hpp"
#include "drloc/localization/head.hpp"
#include "drloc/localization/pairs.hpp"
#include "drloc/numcore/rng.hpp"
#include "drloc/numcore/tensor.hpp"

namespace drloc::loc {

inline constexpr double kProbabilityFloor = 1e-12;

/// Mean over all n*m*2 elements of |target - pred|.
nc::Tensor loss_drloc(const nc::Tensor& pred, const nc::Tensor& offsets_abs);
/// Same reduction against signed targets.
nc::Tensor loss_signed(const nc::Tensor& pred, const nc::Tensor& offsets_signed);

/// Mean over pairs of -(log p_u[c_u] + log p_v[c_v]); class c lives in slot
/// c + k, probabilities are floored at kProbabilityFloor before the log.
nc::Tensor loss_ce(const nc::Tensor& probs_u, const nc::Tensor& probs_v,
                   const std::vector<int>& classes, std::size_t k);

/// Gaussian-prior regression on the class expectation: per branch
/// (c - mu)^2 / sigma^2 + alpha * log(sigma), with sigma^2 floored at
/// sigma_floor, summed over u and v and averaged over pairs.
nc::Tensor loss_reg(const nc::Tensor& probs_u, const nc::Tensor& probs_v,
                    const std::vector<int>& classes, std::size_t k, double alpha,
                    double sigma_floor);

/// Per-block sum of loss_drloc: each block draws its own m pairs per image
/// (blocks in order, from the same generator) and uses its own head.
nc::Tensor loss_all(const grid::BlockGridSet& grids, const HeadSet& heads,
                    const LossVariantSpec& spec, nc::Rng& rng);

/// ce + lambda * aux.
nc::Tensor total_loss(const nc::Tensor& ce, const nc::Tensor& aux, double lambda);

struct PretextOutcome {
  nc::Tensor loss;
  /// Mean |offset error| of the final-grid head, in grid-normalised units.
  /// Classification heads are scored by their expected class / k against
  /// the signed target.
  double mean_l1 = 0.0;
};

/// Samples pairs and evaluates the configured variant. Single-head variants
/// use grids.back() and heads.front().
PretextOutcome pretext_loss(const grid::BlockGridSet& grids, const HeadSet& heads,
                            const LossVariantSpec& spec, nc::Rng& rng);

/// Number of heads the variant needs for a backbone with `blocks` blocks.
std::size_t heads_required(LossVariant variant, std::size_t blocks);

}  // namespace drloc::loc
