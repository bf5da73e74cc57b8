#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "drloc/data/dataset.hpp"
#include "drloc/numcore/errors.hpp"
#include "helpers.hpp"

using namespace drloc;

namespace {

std::vector<unsigned char> fixture(const std::string& name) {
  const auto text = testutil::read_file(std::filesystem::path(DRLOC_FIXTURE_DIR) / name);
  return {text.begin(), text.end()};
}

void write_bytes(const std::filesystem::path& p, std::size_t count, unsigned char fill = 0) {
  std::ofstream os(p, std::ios::binary);
  std::vector<char> buf(count, static_cast<char>(fill));
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

}  // namespace

TEST(Cifar, FixtureParsesToKnownValues) {
  const auto bytes = fixture("cifar10_fixture.bin");
  ASSERT_EQ(bytes.size(), 2u * 3073u);
  const auto rs = data::parse_cifar(bytes, data::CifarKind::cifar10, "fixture");
  ASSERT_EQ(rs.size(), 2u);
  EXPECT_EQ(rs[0].label, 3);
  EXPECT_EQ(rs[0].pixels[0], 0);
  EXPECT_EQ(rs[0].pixels[1024 + 300], 300 % 256);
  EXPECT_EQ(rs[0].pixels[2048 + 17], 255);
  EXPECT_EQ(rs[1].label, 7);
  EXPECT_EQ(rs[1].pixels[0], 255);
  EXPECT_EQ(rs[1].pixels[1024 + 1023], 128);
  EXPECT_EQ(rs[1].pixels[1], 0);
}

TEST(Cifar, Cifar100CarriesFineLabel) {
  const auto rs = data::parse_cifar(fixture("cifar100_fixture.bin"), data::CifarKind::cifar100, "f");
  ASSERT_EQ(rs.size(), 1u);
  EXPECT_EQ(rs[0].coarse_label, 11);
  EXPECT_EQ(rs[0].label, 42);
  EXPECT_EQ(rs[0].pixels[100], (7 * 100) % 256);
  EXPECT_EQ(data::cifar_classes(data::CifarKind::cifar100), 100u);
}

TEST(Cifar, SerializeRoundTripsBytes) {
  const auto bytes = fixture("cifar10_fixture.bin");
  const auto rs = data::parse_cifar(bytes, data::CifarKind::cifar10, "fixture");
  EXPECT_EQ(data::serialize_cifar(rs, data::CifarKind::cifar10), bytes);
  const auto b100 = fixture("cifar100_fixture.bin");
  EXPECT_EQ(data::serialize_cifar(data::parse_cifar(b100, data::CifarKind::cifar100, "f"),
                                  data::CifarKind::cifar100),
            b100);
}

TEST(Cifar, TruncatedTailReportsByteOffset) {
  auto bytes = fixture("cifar10_fixture.bin");
  bytes.resize(3073 + 100);
  try {
    data::parse_cifar(bytes, data::CifarKind::cifar10, "short.bin");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("short.bin"), std::string::npos) << msg;
    EXPECT_NE(msg.find("3073"), std::string::npos) << msg;
  }
}

TEST(Cifar, OutOfRangeLabelNamesRecord) {
  auto bytes = fixture("cifar10_fixture.bin");
  bytes[3073] = 10;
  try {
    data::parse_cifar(bytes, data::CifarKind::cifar10, "bad.bin");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("record 1"), std::string::npos) << e.what();
  }
}

TEST(Cifar, AllZeroRecordGivesConstantImage) {
  std::vector<data::CifarRecord> rs(1);
  rs[0].label = 2;
  data::ChannelStats identity;
  const auto imgs = data::cifar_to_images(rs, data::CifarKind::cifar10, identity, 28);
  EXPECT_EQ(imgs.side, 28u);
  EXPECT_EQ(imgs.labels, (std::vector<int>{2}));
  for (double v : imgs.pixels) ASSERT_EQ(v, 0.0);
}

TEST(Cifar, NormalizationUsesChannelStats) {
  const auto rs =
      data::parse_cifar(fixture("cifar10_fixture.bin"), data::CifarKind::cifar10, "fixture");
  const auto stats = data::channel_stats(rs);
  // B plane: 1024 bytes of 255 then 1024 zeros
  EXPECT_NEAR(stats.mean[2], 0.5, 1e-12);
  EXPECT_NEAR(stats.stddev[2], 0.5, 1e-12);
  const auto imgs = data::cifar_to_images(rs, data::CifarKind::cifar10, stats, 32);
  EXPECT_NEAR(imgs.pixels[2 * 1024], 1.0, 1e-12);
  EXPECT_NEAR(imgs.pixels[3072 + 2 * 1024], -1.0, 1e-12);
}

TEST(Cifar, ReadSplitChecksSizes) {
  const auto dir = testutil::scratch_dir("cifar_sizes");
  EXPECT_THROW(data::read_cifar_split(dir, data::CifarKind::cifar10, false), DataError);
  write_bytes(dir / "test_batch.bin", 10000 * 3073 - 1);
  EXPECT_THROW(data::read_cifar_split(dir, data::CifarKind::cifar10, false), DataError);
  write_bytes(dir / "test_batch.bin", 10000 * 3073);
  EXPECT_EQ(data::read_cifar_split(dir, data::CifarKind::cifar10, false).size(), 10000u);
  EXPECT_THROW(data::read_cifar_split(dir, data::CifarKind::cifar10, true), DataError);
}

TEST(Resize, SameSideIsExactCopy) {
  nc::Rng rng(1);
  std::vector<double> img(3 * 32 * 32);
  for (auto& v : img) v = rng.normal();
  EXPECT_TRUE(testutil::same_bits(data::resize_bilinear(img, 32, 32), img));
}

TEST(Resize, ConstantStaysConstant) {
  std::vector<double> img(3 * 32 * 32, 0.25);
  for (double v : data::resize_bilinear(img, 32, 28)) EXPECT_NEAR(v, 0.25, 1e-15);
}

TEST(Synthetic, NoiseFreeSamplesEqualTemplates) {
  data::SyntheticSpec s;
  s.noise_sigma = 0.0;
  s.samples_train = 40;
  s.samples_test = 10;
  const auto d = data::gen_synthetic(s, 3);
  for (std::size_t i = 0; i < d.train.size(); ++i) {
    const auto tpl = data::synthetic_template(28, d.train.labels[i]);
    const std::span<const double> img(d.train.pixels.data() + i * d.train.image_stride(),
                                      d.train.image_stride());
    ASSERT_TRUE(testutil::same_bits(img, tpl));
  }
}

TEST(Synthetic, SameSeedIsBitIdenticalAndSeedsDiffer) {
  data::SyntheticSpec s;
  s.samples_train = 50;
  s.samples_test = 20;
  const auto a = data::gen_synthetic(s, 9);
  const auto b = data::gen_synthetic(s, 9);
  const auto c = data::gen_synthetic(s, 10);
  EXPECT_TRUE(testutil::same_bits(a.train.pixels, b.train.pixels));
  EXPECT_EQ(a.test.labels, b.test.labels);
  EXPECT_FALSE(testutil::same_bits(a.train.pixels, c.train.pixels));
}

TEST(Synthetic, NearestCentroidBeatsChance) {
  data::SyntheticSpec s;
  const auto d = data::gen_synthetic(s, 0);
  const std::size_t stride = d.train.image_stride();
  std::vector<std::vector<double>> centroid(s.classes, std::vector<double>(stride, 0.0));
  std::vector<std::size_t> count(s.classes, 0);
  for (std::size_t i = 0; i < d.train.size(); ++i) {
    const auto c = static_cast<std::size_t>(d.train.labels[i]);
    ++count[c];
    for (std::size_t p = 0; p < stride; ++p) centroid[c][p] += d.train.pixels[i * stride + p];
  }
  for (std::size_t c = 0; c < s.classes; ++c) {
    ASSERT_GT(count[c], 0u);
    for (auto& v : centroid[c]) v /= static_cast<double>(count[c]);
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < d.test.size(); ++i) {
    std::size_t best = 0;
    double best_d = INFINITY;
    for (std::size_t c = 0; c < s.classes; ++c) {
      double dist = 0.0;
      for (std::size_t p = 0; p < stride; ++p) {
        dist += std::pow(d.test.pixels[i * stride + p] - centroid[c][p], 2);
      }
      if (dist < best_d) best_d = dist, best = c;
    }
    if (static_cast<int>(best) == d.test.labels[i]) ++correct;
  }
  EXPECT_GT(static_cast<double>(correct) / static_cast<double>(d.test.size()), 0.5);
}

TEST(Synthetic, QuadrantMeansDifferByClass) {
  // class 0 lights the top-left quadrant, class 3 the bottom-right
  const auto t0 = data::synthetic_template(28, 0);
  const auto t3 = data::synthetic_template(28, 3);
  auto quadrant_mean = [](const std::vector<double>& t, std::size_t r0, std::size_t c0) {
    double s = 0.0;
    for (std::size_t ch = 0; ch < 3; ++ch) {
      for (std::size_t y = r0; y < r0 + 14; ++y) {
        for (std::size_t x = c0; x < c0 + 14; ++x) s += t[(ch * 28 + y) * 28 + x];
      }
    }
    return s / (3.0 * 14 * 14);
  };
  EXPECT_GT(quadrant_mean(t0, 0, 0), quadrant_mean(t0, 14, 14));
  EXPECT_GT(quadrant_mean(t3, 14, 14), quadrant_mean(t3, 0, 0));
}

TEST(Synthetic, RejectsFewerThanTwoClasses) {
  data::SyntheticSpec s;
  s.classes = 1;
  EXPECT_THROW(data::gen_synthetic(s, 0), ConfigError);
}

TEST(Batch, FlipMirrorsColumns) {
  data::SyntheticSpec s;
  s.samples_train = 2;
  s.samples_test = 1;
  const auto d = data::gen_synthetic(s, 1);
  const std::vector<std::size_t> idx{0};
  auto plain = d.train.batch(idx);
  auto flipped = d.train.batch(idx, {true});
  for (std::size_t y = 0; y < 28; ++y) {
    for (std::size_t x = 0; x < 28; ++x) {
      ASSERT_EQ(plain.at(y * 28 + x), flipped.at(y * 28 + 27 - x));
    }
  }
}

TEST(Dataset, CifarWithoutPathIsDataError) {
  data::DatasetSpec s;
  s.kind = data::DatasetKind::cifar10;
  EXPECT_THROW(data::load_dataset(s, 28), DataError);
  s.path = "/nonexistent/cifar";
  EXPECT_THROW(data::load_dataset(s, 28), DataError);
  EXPECT_THROW(data::parse_dataset_kind("mnist"), ConfigError);
}
