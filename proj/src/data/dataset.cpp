#include "drloc/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include "drloc/numcore/errors.hpp"

namespace drloc::data {

nc::Tensor LabeledImages::batch(std::span<const std::size_t> indices,
                                const std::vector<bool>& flip) const {
  const std::size_t stride = image_stride();
  std::vector<double> out(indices.size() * stride);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= size()) throw UsageError("batch: image index out of range");
    const double* src = pixels.data() + indices[i] * stride;
    double* dst = out.data() + i * stride;
    const bool mirror = !flip.empty() && flip[i];
    for (std::size_t row = 0; row < 3 * side; ++row) {
      for (std::size_t col = 0; col < side; ++col) {
        dst[row * side + col] = src[row * side + (mirror ? side - 1 - col : col)];
      }
    }
  }
  return nc::Tensor::from({indices.size(), 3, side, side}, std::move(out));
}

std::vector<int> LabeledImages::batch_labels(std::span<const std::size_t> indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(labels.at(i));
  return out;
}

// ---- synthetic ----------------------------------------------------------

void SyntheticSpec::validate() const {
  if (classes < 2) throw ConfigError("synthetic: classes must be >= 2");
  if (image_side < 4) throw ConfigError("synthetic: image_side must be >= 4");
  if (samples_train == 0 || samples_test == 0) throw ConfigError("synthetic: empty split");
  if (!(noise_sigma >= 0.0)) throw ConfigError("synthetic: noise_sigma must be >= 0");
}

std::vector<double> synthetic_template(std::size_t side, int label) {
  const std::size_t half = side / 2;
  const int quadrant = label % 4;
  const int texture = (label / 4) % 3;
  const int tint = label % 3;
  const std::size_t row0 = (quadrant / 2) * half;
  const std::size_t col0 = (quadrant % 2) * half;
  std::vector<double> img(3 * side * side, 0.0);
  for (std::size_t y = row0; y < row0 + half; ++y) {
    for (std::size_t x = col0; x < col0 + half; ++x) {
      bool on = true;
      if (texture == 1) on = ((y - row0) / 2) % 2 == 0;
      if (texture == 2) on = ((x - col0) / 2) % 2 == 0;
      if (!on) continue;
      for (int ch = 0; ch < 3; ++ch) {
        img[(static_cast<std::size_t>(ch) * side + y) * side + x] = ch == tint ? 1.0 : 0.3;
      }
    }
  }
  return img;
}

namespace {

LabeledImages synth_split(const SyntheticSpec& spec, std::size_t count, nc::Rng rng) {
  LabeledImages out;
  out.side = spec.image_side;
  out.classes = spec.classes;
  out.labels.resize(count);
  out.pixels.resize(count * out.image_stride());
  std::vector<std::vector<double>> templates;
  for (std::size_t c = 0; c < spec.classes; ++c) {
    templates.push_back(synthetic_template(spec.image_side, static_cast<int>(c)));
  }
  for (std::size_t i = 0; i < count; ++i) {
    const auto label = static_cast<int>(rng.uniform_int(spec.classes));
    out.labels[i] = label;
    const auto& tpl = templates[static_cast<std::size_t>(label)];
    double* dst = out.pixels.data() + i * out.image_stride();
    for (std::size_t p = 0; p < tpl.size(); ++p) {
      dst[p] = tpl[p] + (spec.noise_sigma > 0.0 ? spec.noise_sigma * rng.normal() : 0.0);
    }
  }
  return out;
}

}  // namespace

DatasetSplits gen_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  DatasetSplits splits;
  splits.train = synth_split(spec, spec.samples_train, nc::Rng::substream(seed, "synthetic/train"));
  splits.test = synth_split(spec, spec.samples_test, nc::Rng::substream(seed, "synthetic/test"));
  return splits;
}

// ---- CIFAR --------------------------------------------------------------

std::size_t cifar_record_bytes(CifarKind kind) {
  return kind == CifarKind::cifar10 ? 1 + kCifarPixels : 2 + kCifarPixels;
}

std::size_t cifar_classes(CifarKind kind) { return kind == CifarKind::cifar10 ? 10 : 100; }

std::vector<CifarRecord> parse_cifar(std::span<const unsigned char> bytes, CifarKind kind,
                                     const std::string& source) {
  const std::size_t rec = cifar_record_bytes(kind);
  if (bytes.size() % rec != 0) {
    const std::size_t whole = bytes.size() / rec;
    throw DataError(source + ": truncated record at byte offset " + std::to_string(whole * rec) +
                    " (" + std::to_string(bytes.size() - whole * rec) + " of " +
                    std::to_string(rec) + " bytes present)");
  }
  const std::size_t count = bytes.size() / rec;
  std::vector<CifarRecord> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    const unsigned char* p = bytes.data() + i * rec;
    auto& r = out[i];
    if (kind == CifarKind::cifar100) {
      r.coarse_label = p[0];
      r.label = p[1];
      if (r.coarse_label >= 20) {
        throw DataError(source + ": record " + std::to_string(i) + " has coarse label " +
                        std::to_string(r.coarse_label) + " outside [0, 20)");
      }
      p += 2;
    } else {
      r.label = p[0];
      p += 1;
    }
    if (static_cast<std::size_t>(r.label) >= cifar_classes(kind)) {
      throw DataError(source + ": record " + std::to_string(i) + " has label " +
                      std::to_string(r.label) + " outside [0, " +
                      std::to_string(cifar_classes(kind)) + ")");
    }
    std::copy_n(p, kCifarPixels, r.pixels.begin());
  }
  return out;
}

std::vector<unsigned char> serialize_cifar(const std::vector<CifarRecord>& records,
                                           CifarKind kind) {
  std::vector<unsigned char> out;
  out.reserve(records.size() * cifar_record_bytes(kind));
  for (const auto& r : records) {
    if (kind == CifarKind::cifar100) out.push_back(static_cast<unsigned char>(r.coarse_label));
    out.push_back(static_cast<unsigned char>(r.label));
    out.insert(out.end(), r.pixels.begin(), r.pixels.end());
  }
  return out;
}

ChannelStats channel_stats(const std::vector<CifarRecord>& records) {
  ChannelStats stats;
  if (records.empty()) return stats;
  constexpr std::size_t plane = 32 * 32;
  const double n = static_cast<double>(records.size() * plane);
  for (std::size_t ch = 0; ch < 3; ++ch) {
    double total = 0.0;
    for (const auto& r : records) {
      for (std::size_t i = 0; i < plane; ++i) total += r.pixels[ch * plane + i] / 255.0;
    }
    const double mu = total / n;
    double sq = 0.0;
    for (const auto& r : records) {
      for (std::size_t i = 0; i < plane; ++i) {
        const double d = r.pixels[ch * plane + i] / 255.0 - mu;
        sq += d * d;
      }
    }
    stats.mean[ch] = mu;
    const double sd = std::sqrt(sq / n);
    stats.stddev[ch] = sd > 0.0 ? sd : 1.0;
  }
  return stats;
}

std::vector<double> resize_bilinear(std::span<const double> image, std::size_t in,
                                    std::size_t out) {
  if (image.size() != 3 * in * in) throw UsageError("resize_bilinear: buffer size mismatch");
  std::vector<double> dst(3 * out * out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  auto coord = [&](std::size_t o, std::size_t& lo, std::size_t& hi, double& frac) {
    double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    lo = static_cast<std::size_t>(std::floor(src));
    hi = std::min(lo + 1, in - 1);
    frac = src - static_cast<double>(lo);
  };
  for (std::size_t y = 0; y < out; ++y) {
    std::size_t y0, y1;
    double fy;
    coord(y, y0, y1, fy);
    for (std::size_t x = 0; x < out; ++x) {
      std::size_t x0, x1;
      double fx;
      coord(x, x0, x1, fx);
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const double* p = image.data() + ch * in * in;
        const double top = p[y0 * in + x0] * (1.0 - fx) + p[y0 * in + x1] * fx;
        const double bottom = p[y1 * in + x0] * (1.0 - fx) + p[y1 * in + x1] * fx;
        dst[(ch * out + y) * out + x] = top * (1.0 - fy) + bottom * fy;
      }
    }
  }
  return dst;
}

LabeledImages cifar_to_images(const std::vector<CifarRecord>& records, CifarKind kind,
                              const ChannelStats& stats, std::size_t side) {
  LabeledImages out;
  out.side = side;
  out.classes = cifar_classes(kind);
  out.labels.reserve(records.size());
  out.pixels.reserve(records.size() * out.image_stride());
  std::vector<double> img(kCifarPixels);
  constexpr std::size_t plane = 32 * 32;
  for (const auto& r : records) {
    for (std::size_t i = 0; i < kCifarPixels; ++i) {
      const std::size_t ch = i / plane;
      img[i] = (r.pixels[i] / 255.0 - stats.mean[ch]) / stats.stddev[ch];
    }
    auto resized = side == 32 ? img : resize_bilinear(img, 32, side);
    out.pixels.insert(out.pixels.end(), resized.begin(), resized.end());
    out.labels.push_back(r.label);
  }
  return out;
}

namespace {

std::filesystem::path resolve_cifar_dir(const std::filesystem::path& dir, CifarKind kind) {
  const auto probe = kind == CifarKind::cifar10 ? "test_batch.bin" : "test.bin";
  const auto nested = kind == CifarKind::cifar10 ? "cifar-10-batches-bin" : "cifar-100-binary";
  if (std::filesystem::exists(dir / probe)) return dir;
  if (std::filesystem::exists(dir / nested / probe)) return dir / nested;
  throw DataError("cifar: no " + std::string(probe) + " under " + dir.string());
}

std::vector<CifarRecord> read_file(const std::filesystem::path& file, CifarKind kind,
                                   std::size_t expected_records) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw DataError("cifar: missing file " + file.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
  const std::size_t expected = expected_records * cifar_record_bytes(kind);
  if (bytes.size() != expected) {
    auto records = parse_cifar(bytes, kind, file.string());  // reports a truncated tail first
    throw DataError(file.string() + ": expected " + std::to_string(expected) + " bytes, found " +
                    std::to_string(bytes.size()) + " (" + std::to_string(records.size()) +
                    " records)");
  }
  return parse_cifar(bytes, kind, file.string());
}

}  // namespace

std::vector<CifarRecord> read_cifar_split(const std::filesystem::path& dir, CifarKind kind,
                                          bool train) {
  const auto root = resolve_cifar_dir(dir, kind);
  std::vector<CifarRecord> out;
  if (kind == CifarKind::cifar10) {
    if (train) {
      for (int b = 1; b <= 5; ++b) {
        auto part = read_file(root / ("data_batch_" + std::to_string(b) + ".bin"), kind, 10000);
        out.insert(out.end(), part.begin(), part.end());
      }
    } else {
      out = read_file(root / "test_batch.bin", kind, 10000);
    }
  } else {
    out = train ? read_file(root / "train.bin", kind, 50000) : read_file(root / "test.bin", kind, 10000);
  }
  return out;
}

DatasetSplits load_cifar(const std::filesystem::path& dir, CifarKind kind, std::size_t image_side,
                         std::size_t train_limit, std::size_t test_limit) {
  auto train = read_cifar_split(dir, kind, true);
  auto test = read_cifar_split(dir, kind, false);
  if (train_limit > 0 && train.size() > train_limit) train.resize(train_limit);
  if (test_limit > 0 && test.size() > test_limit) test.resize(test_limit);
  DatasetSplits splits;
  splits.normalization = channel_stats(train);
  splits.train = cifar_to_images(train, kind, splits.normalization, image_side);
  splits.test = cifar_to_images(test, kind, splits.normalization, image_side);
  return splits;
}

// ---- dispatch -----------------------------------------------------------

std::string to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::synthetic: return "synthetic";
    case DatasetKind::cifar10: return "cifar10";
    case DatasetKind::cifar100: return "cifar100";
  }
  return "?";
}

DatasetKind parse_dataset_kind(const std::string& text) {
  if (text == "synthetic") return DatasetKind::synthetic;
  if (text == "cifar10") return DatasetKind::cifar10;
  if (text == "cifar100") return DatasetKind::cifar100;
  throw ConfigError("unknown dataset '" + text + "' (expected synthetic|cifar10|cifar100)");
}

DatasetSplits load_dataset(const DatasetSpec& spec, std::size_t image_side) {
  switch (spec.kind) {
    case DatasetKind::synthetic: {
      auto s = spec.synthetic;
      s.image_side = image_side;
      if (spec.train_limit > 0) s.samples_train = std::min(s.samples_train, spec.train_limit);
      if (spec.test_limit > 0) s.samples_test = std::min(s.samples_test, spec.test_limit);
      return gen_synthetic(s, spec.seed);
    }
    case DatasetKind::cifar10:
    case DatasetKind::cifar100: {
      if (spec.path.empty()) throw DataError("dataset: CIFAR needs a path");
      const auto kind = spec.kind == DatasetKind::cifar10 ? CifarKind::cifar10 : CifarKind::cifar100;
      return load_cifar(spec.path, kind, image_side, spec.train_limit, spec.test_limit);
    }
  }
  throw ConfigError("dataset: unhandled kind");
}

}  // namespace drloc::data
