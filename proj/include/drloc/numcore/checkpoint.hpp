#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "drloc/numcore/tensor.hpp"

namespace drloc::nc {

struct NamedTensor {
  std::string name;
  Tensor value;
};

// Container layout, all integers little-endian:
//   "DRL1"
//   repeated: u32 name_len | name bytes (UTF-8) | u32 rank | u32 dims[rank] | f64 payload
// The file ends after the last record; there is no count or trailer.
std::vector<unsigned char> encode_checkpoint(const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> decode_checkpoint(const std::vector<unsigned char>& bytes);

/// Writes to a temporary sibling and renames, so a crash never leaves a
/// partial file under `path`.
void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

}  // namespace drloc::nc
