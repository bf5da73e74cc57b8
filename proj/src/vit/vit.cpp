#include "drloc/vit/vit.hpp"

#include <cmath>
#include <string>

#include "drloc/numcore/errors.hpp"
#include "drloc/numcore/ops.hpp"

namespace drloc::vit {

void VitConfig::validate() const {
  if (image_side == 0 || patch_side == 0 || image_side % patch_side != 0) {
    throw ConfigError("model: image_side " + std::to_string(image_side) +
                      " must be a positive multiple of patch_side " + std::to_string(patch_side));
  }
  if (embed_dim == 0 || heads == 0 || embed_dim % heads != 0) {
    throw ConfigError("model: embed_dim " + std::to_string(embed_dim) +
                      " must be divisible by heads " + std::to_string(heads));
  }
  if (blocks == 0) throw ConfigError("model: need at least one block");
  if (mlp_ratio == 0) throw ConfigError("model: mlp_ratio must be positive");
  if (classes < 2) throw ConfigError("model: need at least two classes");
  if (native_side() < 2) throw ConfigError("model: token grid must be at least 2x2");
  if (pool_final_grid && (native_side() % 2 != 0 || native_side() / 2 < 2)) {
    throw ConfigError("model: pool_final_grid needs an even native grid side >= 4, got " +
                      std::to_string(native_side()));
  }
}

VitModel::VitModel(const VitConfig& config, nc::Rng& rng) : config_(config) {
  config_.validate();
  const std::size_t d = config_.embed_dim;
  const std::size_t tokens = config_.native_side() * config_.native_side();
  patch_embed_ = nc::Linear(3 * config_.patch_side * config_.patch_side, d, rng);
  if (config_.use_abs_pos_embed) {
    std::vector<double> pe(tokens * d);
    for (auto& v : pe) v = 0.02 * rng.normal();
    pos_embed_ = nc::Tensor::from({1, tokens, d}, std::move(pe), true);
  }
  for (std::size_t l = 0; l < config_.blocks; ++l) {
    Block b;
    b.norm1 = nc::LayerNorm(d);
    b.qkv = nc::Linear(d, 3 * d, rng);
    b.proj = nc::Linear(d, d, rng);
    b.norm2 = nc::LayerNorm(d);
    b.fc1 = nc::Linear(d, d * config_.mlp_ratio, rng);
    b.fc2 = nc::Linear(d * config_.mlp_ratio, d, rng);
    blocks_.push_back(std::move(b));
  }
  final_norm_ = nc::LayerNorm(d);
  classifier_ = nc::Linear(d, config_.classes, rng);
}

nc::Tensor VitModel::patchify(const nc::Tensor& images) const {
  const std::size_t n = images.dim(0);
  const std::size_t p = config_.patch_side;
  const std::size_t k = config_.native_side();
  auto x = nc::reshape(images, {n, 3, k, p, k, p});
  x = nc::permute(x, {0, 2, 4, 1, 3, 5});  // [n, k, k, 3, p, p]
  return nc::reshape(x, {n, k * k, 3 * p * p});
}

nc::Tensor VitModel::attention(const Block& block, const nc::Tensor& x) const {
  const std::size_t n = x.dim(0);
  const std::size_t t = x.dim(1);
  const std::size_t d = config_.embed_dim;
  const std::size_t h = config_.heads;
  const std::size_t dh = d / h;
  auto qkv = block.qkv(x);  // [n, t, 3d]
  auto split = [&](std::size_t which) {
    auto part = nc::slice(qkv, 2, which * d, (which + 1) * d);
    part = nc::permute(nc::reshape(part, {n, t, h, dh}), {0, 2, 1, 3});
    return nc::reshape(part, {n * h, t, dh});
  };
  auto q = split(0);
  auto k = split(1);
  auto v = split(2);
  auto scores = nc::scale(nc::matmul(q, nc::transpose(k, 1, 2)),
                          1.0 / std::sqrt(static_cast<double>(dh)));
  auto ctx = nc::matmul(nc::softmax_lastdim(scores), v);  // [n*h, t, dh]
  ctx = nc::permute(nc::reshape(ctx, {n, h, t, dh}), {0, 2, 1, 3});
  return block.proj(nc::reshape(ctx, {n, t, d}));
}

VitOutput VitModel::forward(const nc::Tensor& images) const {
  const std::size_t side = config_.image_side;
  if (images.rank() != 4 || images.dim(1) != 3 || images.dim(2) != side || images.dim(3) != side) {
    throw ConfigError("vit forward: expected [n, 3, " + std::to_string(side) + ", " +
                      std::to_string(side) + "] images, got " + nc::shape_str(images.shape()));
  }
  const std::size_t n = images.dim(0);
  const std::size_t tokens = config_.native_side() * config_.native_side();
  const std::size_t d = config_.embed_dim;

  auto x = patch_embed_(patchify(images));  // [n, T, d]
  if (config_.use_abs_pos_embed) {
    // explicit broadcast of the [1, T, d] table over the batch
    std::vector<nc::Tensor> copies(n, nc::reshape(pos_embed_, {1, tokens * d}));
    auto pe = nc::reshape(n == 1 ? copies[0] : nc::concat_lastdim(copies), {n, tokens, d});
    x = nc::add(x, pe);
  }

  VitOutput out;
  auto to_pretext = [&](const nc::Tensor& seq) {
    auto g = grid::sequence_to_grid(seq);
    return config_.pool_final_grid ? grid::pool_to_target(g, config_.pretext_side()) : g;
  };
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const auto& b = blocks_[l];
    x = nc::add(x, attention(b, b.norm1(x)));
    x = nc::add(x, b.fc2(nc::relu(b.fc1(b.norm2(x)))));
    if (l + 1 < blocks_.size()) out.grids.push_back(to_pretext(x));
  }
  auto final_tokens = final_norm_(x);
  out.grids.push_back(to_pretext(final_tokens));
  out.logits = classifier_(nc::mean_axis(final_tokens, 1));
  return out;
}

std::vector<nc::Parameter> VitModel::parameters() const {
  std::vector<nc::Parameter> out;
  patch_embed_.collect("patch_embed", out);
  if (config_.use_abs_pos_embed) out.push_back({"pos_embed", pos_embed_, false});
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const std::string p = "blocks." + std::to_string(l);
    const auto& b = blocks_[l];
    b.norm1.collect(p + ".norm1", out);
    b.qkv.collect(p + ".attn.qkv", out);
    b.proj.collect(p + ".attn.proj", out);
    b.norm2.collect(p + ".norm2", out);
    b.fc1.collect(p + ".mlp.fc1", out);
    b.fc2.collect(p + ".mlp.fc2", out);
  }
  final_norm_.collect("final_norm", out);
  classifier_.collect("classifier", out);
  return out;
}

std::size_t VitModel::parameter_count() const {
  std::size_t total = 0;
  for (const auto& p : parameters()) total += p.value.numel();
  return total;
}

nc::Tensor classification_loss(const nc::Tensor& logits, const std::vector<int>& labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
    throw ConfigError("classification_loss: logits " + nc::shape_str(logits.shape()) + " for " +
                      std::to_string(labels.size()) + " labels");
  }
  const std::size_t classes = logits.dim(1);
  std::vector<std::size_t> rows(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw DataError("classification_loss: label " + std::to_string(labels[i]) + " of record " +
                      std::to_string(i) + " outside [0, " + std::to_string(classes) + ")");
    }
    rows[i] = i * classes + static_cast<std::size_t>(labels[i]);
  }
  auto logp = nc::reshape(nc::log_softmax_lastdim(logits), {labels.size() * classes, 1});
  return nc::scale(nc::mean(nc::gather_rows(logp, rows)), -1.0);
}

}  // namespace drloc::vit
