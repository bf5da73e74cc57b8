#include "drloc/numcore/layers.hpp"

#include <algorithm>
#include <cmath>

#include "drloc/numcore/errors.hpp"
#include "drloc/numcore/ops.hpp"

namespace drloc::nc {

Linear::Linear(std::size_t in, std::size_t out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::vector<double> w(in * out);
  for (auto& v : w) v = rng.uniform(-bound, bound);
  std::vector<double> b(out);
  for (auto& v : b) v = rng.uniform(-bound, bound);
  weight = Tensor::from({in, out}, std::move(w), true);
  bias = Tensor::from({out}, std::move(b), true);
}

Tensor Linear::operator()(const Tensor& x) const { return add_rowwise(matmul(x, weight), bias); }

void Linear::collect(const std::string& prefix, std::vector<Parameter>& out) const {
  out.push_back({prefix + ".weight", weight, true});
  out.push_back({prefix + ".bias", bias, true});
}

LayerNorm::LayerNorm(std::size_t width)
    : gain(Tensor::full({width}, 1.0, true)), shift(Tensor::zeros({width}, true)) {}

Tensor LayerNorm::operator()(const Tensor& x) const { return layernorm_lastdim(x, gain, shift); }

void LayerNorm::collect(const std::string& prefix, std::vector<Parameter>& out) const {
  out.push_back({prefix + ".gain", gain, false});
  out.push_back({prefix + ".shift", shift, false});
}

void assign_parameters(std::vector<Parameter>& target, const std::vector<Parameter>& source) {
  if (target.size() != source.size()) {
    throw ConfigError("assign_parameters: expected " + std::to_string(target.size()) +
                      " tensors, got " + std::to_string(source.size()));
  }
  for (auto& t : target) {
    auto it = std::find_if(source.begin(), source.end(),
                           [&](const Parameter& p) { return p.name == t.name; });
    if (it == source.end()) throw ConfigError("assign_parameters: missing " + t.name);
    if (it->value.shape() != t.value.shape()) {
      throw ConfigError("assign_parameters: shape mismatch for " + t.name + ": " +
                        shape_str(t.value.shape()) + " vs " + shape_str(it->value.shape()));
    }
    auto dst = t.value.mutable_data();
    auto src = it->value.data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

}  // namespace drloc::nc
