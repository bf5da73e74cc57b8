#pragma once

#include <cstddef>
#include <vector>

#include "drloc/numcore/layers.hpp"

namespace drloc::train {

struct OptimSpec {
  double base_lr = 1e-3;
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double warmup_epochs = 5.0;
  std::size_t total_epochs = 25;
  std::size_t batch_size = 64;
  double grad_clip = 5.0;  // global L2 norm; <= 0 disables

  void validate() const;

  bool operator==(const OptimSpec&) const = default;
};

struct AdamState {
  std::vector<std::vector<double>> first;
  std::vector<std::vector<double>> second;
  std::size_t step = 0;
};

/// One decoupled-weight-decay Adam update. Parameters with decay == false
/// skip the decay term. A parameter without a gradient buffer is treated as
/// having zero gradient. Throws NumericalError naming the first parameter
/// whose gradient is not finite; nothing is modified in that case.
void adamw_step(const std::vector<nc::Parameter>& params, AdamState& state, double lr,
                const OptimSpec& spec);

/// Linear warmup 0 -> base_lr over warmup_epochs, then half-cosine decay to 0
/// at total_epochs. epoch_fraction is clamped to [0, total_epochs].
double lr_at(double epoch_fraction, const OptimSpec& spec);

/// L2 norm over every gradient buffer, in parameter order.
double global_grad_norm(const std::vector<nc::Parameter>& params);

/// Rescales all gradients so the global norm is at most max_norm. Returns the
/// norm before clipping.
double clip_grad_norm(const std::vector<nc::Parameter>& params, double max_norm);

}  // namespace drloc::train
