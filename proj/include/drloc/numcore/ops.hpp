#pragma once

#include <cstddef>
#include <vector>

#include "drloc/numcore/tensor.hpp"

// Differentiable primitives. Shapes must match exactly; the only implicit
// broadcast is a 0-d tensor against anything (add/sub/mul/div). Row-wise
// bias and per-feature affine terms go through the explicit *_rowwise ops.
// Shape violations throw ConfigError naming the op and both shapes.
namespace drloc::nc {

/// [.., M, K] x [K, N] -> [.., M, N], or batched [B, M, K] x [B, K, N].
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);

/// x[..., N] + bias[N]
Tensor add_rowwise(const Tensor& x, const Tensor& bias);

Tensor relu(const Tensor& x);
/// Subgradient 0 at exactly 0.
Tensor abs(const Tensor& x);
Tensor log(const Tensor& x);
/// max(x, floor); gradient is zero where the floor is active.
Tensor clamp_min(const Tensor& x, double floor);

Tensor softmax_lastdim(const Tensor& x);
Tensor log_softmax_lastdim(const Tensor& x);

inline constexpr double kLayerNormEps = 1e-5;
/// Normalises the last axis, then applies gain[N] and shift[N].
Tensor layernorm_lastdim(const Tensor& x, const Tensor& gain, const Tensor& shift,
                         double eps = kLayerNormEps);

/// Full reductions to a 0-d tensor.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Mean along one axis; the axis is removed from the shape.
Tensor mean_axis(const Tensor& x, std::size_t axis);

Tensor concat_lastdim(const std::vector<Tensor>& parts);
/// Half-open range [begin, end) along axis.
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end);
Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<std::size_t>& order);
Tensor transpose(const Tensor& x, std::size_t axis_a, std::size_t axis_b);

/// [n, c, h, w] -> [n, c, h/2, w/2], non-overlapping 2x2 means.
Tensor avgpool2x2(const Tensor& x);

/// x[R, C] -> out[I, C] with out[i] = x[rows[i]]. Gradient scatter-adds.
Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& rows);

}  // namespace drloc::nc
