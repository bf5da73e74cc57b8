#pragma once

#include <string>
#include <vector>

#include "drloc/numcore/rng.hpp"
#include "drloc/numcore/tensor.hpp"

namespace drloc::nc {

/// A trainable tensor plus the metadata the optimizer needs.
struct Parameter {
  std::string name;
  Tensor value;
  bool decay = true;  // false for positional embeddings and norm parameters
};

/// y = x W + b with W stored [in, out].
struct Linear {
  Tensor weight;
  Tensor bias;

  Linear() = default;
  /// Weights and bias uniform in [-1/sqrt(in), 1/sqrt(in)].
  Linear(std::size_t in, std::size_t out, Rng& rng);

  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }

  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, std::vector<Parameter>& out) const;
};

struct LayerNorm {
  Tensor gain;
  Tensor shift;

  LayerNorm() = default;
  explicit LayerNorm(std::size_t width);

  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, std::vector<Parameter>& out) const;
};

/// Copies values by name from `source` into `target`; names and shapes must
/// match one-to-one.
void assign_parameters(std::vector<Parameter>& target, const std::vector<Parameter>& source);

}  // namespace drloc::nc
