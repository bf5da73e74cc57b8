#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "drloc/numcore/rng.hpp"
#include "drloc/numcore/tensor.hpp"

namespace drloc::data {

/// Images stored [count, 3, side, side] with integer labels in [0, classes).
struct LabeledImages {
  std::size_t side = 0;
  std::size_t classes = 0;
  std::vector<double> pixels;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t image_stride() const { return 3 * side * side; }

  /// Stacks the selected images into [indices.size(), 3, side, side];
  /// flip[i] mirrors image i horizontally. `flip` may be empty.
  nc::Tensor batch(std::span<const std::size_t> indices, const std::vector<bool>& flip = {}) const;
  std::vector<int> batch_labels(std::span<const std::size_t> indices) const;
};

struct ChannelStats {
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  std::array<double, 3> stddev{1.0, 1.0, 1.0};
};

struct DatasetSplits {
  LabeledImages train;
  LabeledImages test;
  ChannelStats normalization;  // identity for synthetic data
};

// ---- synthetic ----------------------------------------------------------

struct SyntheticSpec {
  std::size_t image_side = 28;
  std::size_t classes = 10;
  std::size_t samples_train = 2000;
  std::size_t samples_test = 500;
  double noise_sigma = 0.1;

  void validate() const;

  bool operator==(const SyntheticSpec&) const = default;
};

/// Class c draws a bright region in quadrant c % 4 whose texture is
/// solid, horizontal stripes or vertical stripes ((c / 4) % 3), tinted
/// towards channel c % 3, plus N(0, noise_sigma^2) pixel noise. Train and
/// test come from separate sub-streams of `seed`.
DatasetSplits gen_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

/// The noise-free template for one class: [3, side, side].
std::vector<double> synthetic_template(std::size_t side, int label);

// ---- CIFAR binary format ------------------------------------------------

enum class CifarKind { cifar10, cifar100 };

inline constexpr std::size_t kCifarPixels = 3 * 32 * 32;

struct CifarRecord {
  int coarse_label = -1;  // cifar100 only
  int label = 0;          // cifar10 label, or cifar100 fine label
  std::array<std::uint8_t, kCifarPixels> pixels{};  // R plane, G plane, B plane, row-major
};

std::size_t cifar_record_bytes(CifarKind kind);
std::size_t cifar_classes(CifarKind kind);

/// Parses whole records; `source` names the input in error messages.
std::vector<CifarRecord> parse_cifar(std::span<const unsigned char> bytes, CifarKind kind,
                                     const std::string& source);
std::vector<unsigned char> serialize_cifar(const std::vector<CifarRecord>& records, CifarKind kind);

/// Per-channel mean/std of the [0, 1]-scaled pixels.
ChannelStats channel_stats(const std::vector<CifarRecord>& records);

/// Scales to [0, 1], normalises with `stats`, and resizes to `side`.
LabeledImages cifar_to_images(const std::vector<CifarRecord>& records, CifarKind kind,
                              const ChannelStats& stats, std::size_t side);

/// Reads the standard binary distribution from `dir` (data_batch_{1..5}.bin
/// and test_batch.bin, or train.bin and test.bin for cifar100; an extracted
/// cifar-10-batches-bin / cifar-100-binary subdirectory is also accepted).
/// Files must have their exact expected sizes. A limit of 0 keeps all.
std::vector<CifarRecord> read_cifar_split(const std::filesystem::path& dir, CifarKind kind,
                                          bool train);

DatasetSplits load_cifar(const std::filesystem::path& dir, CifarKind kind, std::size_t image_side,
                         std::size_t train_limit = 0, std::size_t test_limit = 0);

/// Bilinear resize of one [3, in, in] image with half-pixel centres and
/// clamped borders. in == out is an exact copy.
std::vector<double> resize_bilinear(std::span<const double> image, std::size_t in, std::size_t out);

// ---- dispatch -----------------------------------------------------------

enum class DatasetKind { synthetic, cifar10, cifar100 };

std::string to_string(DatasetKind kind);
DatasetKind parse_dataset_kind(const std::string& text);

struct DatasetSpec {
  DatasetKind kind = DatasetKind::synthetic;
  std::string path;  // CIFAR directory
  std::uint64_t seed = 0;  // synthetic generator seed, independent of run seeds
  SyntheticSpec synthetic;
  std::size_t train_limit = 0;
  std::size_t test_limit = 0;

  bool operator==(const DatasetSpec&) const = default;
};

/// Resolves and loads the dataset at the model's image side. Missing files
/// raise DataError.
DatasetSplits load_dataset(const DatasetSpec& spec, std::size_t image_side);

}  // namespace drloc::data
