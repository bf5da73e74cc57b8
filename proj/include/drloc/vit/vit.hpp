#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "drloc/gridops/grid.hpp"
#include "drloc/numcore/layers.hpp"
#include "drloc/numcore/rng.hpp"
#include "drloc/numcore/tensor.hpp"

namespace drloc::vit {

struct VitConfig {
  std::size_t image_side = 28;
  std::size_t patch_side = 4;
  std::size_t embed_dim = 32;
  std::size_t blocks = 2;
  std::size_t heads = 4;
  std::size_t mlp_ratio = 4;
  std::size_t classes = 10;
  bool use_abs_pos_embed = true;
  /// Pool each grid 2x2 before it reaches the pretext task. The classifier
  /// always reads the native grid.
  bool pool_final_grid = false;

  void validate() const;
  /// Native token grid side (image_side / patch_side).
  std::size_t native_side() const { return image_side / patch_side; }
  /// Side of the grids handed to the pretext task.
  std::size_t pretext_side() const { return pool_final_grid ? native_side() / 2 : native_side(); }

  bool operator==(const VitConfig&) const = default;
};

struct Block {
  nc::LayerNorm norm1;
  nc::Linear qkv;
  nc::Linear proj;
  nc::LayerNorm norm2;
  nc::Linear fc1;
  nc::Linear fc2;
};

struct VitOutput {
  nc::Tensor logits;         // [n, classes]
  grid::BlockGridSet grids;  // one per block; the last one is post final-norm
};

/// Patch projection, optional learned absolute position embedding, pre-norm
/// blocks (multi-head self-attention + relu feed-forward), final layer norm,
/// and a linear classifier on the mean token.
class VitModel {
 public:
  VitModel(const VitConfig& config, nc::Rng& rng);

  const VitConfig& config() const { return config_; }

  /// images: [n, 3, H, W] with H == W == image_side.
  VitOutput forward(const nc::Tensor& images) const;

  /// Stable-ordered parameter list; handles alias the model's storage.
  std::vector<nc::Parameter> parameters() const;
  std::size_t parameter_count() const;

 private:
  nc::Tensor patchify(const nc::Tensor& images) const;
  nc::Tensor attention(const Block& block, const nc::Tensor& x) const;

  VitConfig config_;
  nc::Linear patch_embed_;
  nc::Tensor pos_embed_;
  std::vector<Block> blocks_;
  nc::LayerNorm final_norm_;
  nc::Linear classifier_;
};

/// Mean over the batch of -log softmax(logits)[label].
nc::Tensor classification_loss(const nc::Tensor& logits, const std::vector<int>& labels);

}  // namespace drloc::vit
