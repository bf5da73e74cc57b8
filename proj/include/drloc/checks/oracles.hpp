#pragma once

#include <cstddef>
#include <span>
#include <vector>

// Plain-loop recomputations used to cross-check the tensor implementations.
// None of these touch the tape or the tensor ops.

namespace drloc::checks {

/// Mean over [n, m, 2] of | |a - b| / k - pred |, summed in storage order.
double oracle_drloc(std::span<const double> pred, const std::vector<int>& pos_a,
                    const std::vector<int>& pos_b, std::size_t k);
/// Same with signed targets (a - b) / k.
double oracle_signed(std::span<const double> pred, const std::vector<int>& pos_a,
                     const std::vector<int>& pos_b, std::size_t k);

/// Cross-entropy over the per-axis offset classes. probs_* hold [pairs, 2k+1]
/// rows; the class of axis a for pair r is pos_a[2r+a] - pos_b[2r+a].
double oracle_ce(std::span<const double> probs_u, std::span<const double> probs_v,
                 const std::vector<int>& pos_a, const std::vector<int>& pos_b, std::size_t k);

/// Gaussian-prior regression with the variance taken as the central second
/// moment sum_s p_s (s - k - mu)^2 (floored at sigma_floor).
double oracle_reg(std::span<const double> probs_u, std::span<const double> probs_v,
                  const std::vector<int>& pos_a, const std::vector<int>& pos_b, std::size_t k,
                  double alpha, double sigma_floor);

/// [n, c, h, w] -> [n, c, h/2, w/2], each output the mean of its four inputs.
std::vector<double> oracle_avgpool(std::span<const double> x, std::size_t n, std::size_t c,
                                   std::size_t h, std::size_t w);

/// Mean over rows of logsumexp(row) - row[label], in long double.
double oracle_classification_loss(std::span<const double> logits, std::size_t classes,
                                  const std::vector<int>& labels);

/// Pearson statistic of observed counts against a uniform expectation.
double chi_square_uniform(const std::vector<std::size_t>& counts);
/// Upper critical value of the chi-square distribution.
double chi_square_critical(std::size_t degrees_of_freedom, double significance);

}  // namespace drloc::checks
