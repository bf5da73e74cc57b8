#include "drloc/trainer/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "drloc/numcore/errors.hpp"

namespace drloc::train {

void OptimSpec::validate() const {
  if (!(base_lr > 0.0)) throw ConfigError("optim.base_lr must be > 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("optim.weight_decay must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("optim.betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("optim.eps must be > 0");
  if (total_epochs == 0) throw ConfigError("optim.total_epochs must be >= 1");
  if (!(warmup_epochs >= 0.0) || !(warmup_epochs < static_cast<double>(total_epochs))) {
    throw ConfigError("optim.warmup_epochs must satisfy 0 <= warmup < total_epochs");
  }
  if (batch_size == 0) throw ConfigError("optim.batch_size must be >= 1");
}

void adamw_step(const std::vector<nc::Parameter>& params, AdamState& state, double lr,
                const OptimSpec& spec) {
  if (state.first.empty()) {
    for (const auto& p : params) {
      state.first.emplace_back(p.value.numel(), 0.0);
      state.second.emplace_back(p.value.numel(), 0.0);
    }
  }
  if (state.first.size() != params.size()) {
    throw UsageError("adamw_step: optimizer state was built for a different parameter list");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.first[i].size() != params[i].value.numel()) {
      throw UsageError("adamw_step: moment buffer shape mismatch for " + params[i].name);
    }
    for (double g : params[i].value.grad()) {
      if (!std::isfinite(g)) {
        throw NumericalError("non-finite gradient in parameter " + params[i].name);
      }
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(spec.beta1, t);
  const double bias2 = 1.0 - std::pow(spec.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    nc::Tensor value = params[i].value;
    auto w = value.mutable_data();
    auto g = value.grad();
    auto& m = state.first[i];
    auto& v = state.second[i];
    const double decay = params[i].decay ? 1.0 - lr * spec.weight_decay : 1.0;
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double grad = g.empty() ? 0.0 : g[j];
      w[j] *= decay;
      m[j] = spec.beta1 * m[j] + (1.0 - spec.beta1) * grad;
      v[j] = spec.beta2 * v[j] + (1.0 - spec.beta2) * grad * grad;
      const double m_hat = m[j] / bias1;
      const double v_hat = v[j] / bias2;
      w[j] -= lr * m_hat / (std::sqrt(v_hat) + spec.eps);
    }
  }
}

double lr_at(double epoch_fraction, const OptimSpec& spec) {
  const double total = static_cast<double>(spec.total_epochs);
  const double t = std::clamp(epoch_fraction, 0.0, total);
  if (t < spec.warmup_epochs) return spec.base_lr * t / spec.warmup_epochs;
  const double progress = (t - spec.warmup_epochs) / (total - spec.warmup_epochs);
  return spec.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

double global_grad_norm(const std::vector<nc::Parameter>& params) {
  double sq = 0.0;
  for (const auto& p : params) {
    for (double g : p.value.grad()) sq += g * g;
  }
  return std::sqrt(sq);
}

double clip_grad_norm(const std::vector<nc::Parameter>& params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (const auto& p : params) {
      if (!p.value.has_grad()) continue;
      nc::Tensor value = p.value;
      for (auto& g : value.mutable_grad()) g *= factor;
    }
  }
  return norm;
}

}  // namespace drloc::train
