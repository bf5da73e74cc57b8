#include <gtest/gtest.h>

#include <cmath>

#include "drloc/checks/gradcheck.hpp"
#include "drloc/checks/oracles.hpp"
#include "drloc/localization/losses.hpp"
#include "drloc/numcore/errors.hpp"
#include "drloc/numcore/ops.hpp"
#include "drloc/numcore/tape.hpp"
#include "helpers.hpp"

using namespace drloc;
using nc::Tensor;

namespace {

loc::PairBatch single_pair(int ai, int aj, int bi, int bj, std::size_t k = 7) {
  return loc::make_pairs(k, 1, 1, {ai, aj}, {bi, bj});
}

void zero_head(loc::LocalizationHead& h) {
  for (auto* l : {&h.layer1, &h.layer2, &h.layer3}) {
    for (auto& v : l->weight.mutable_data()) v = 0.0;
    for (auto& v : l->bias.mutable_data()) v = 0.0;
  }
}

// Distribution over 2k+1 slots with all mass on class c.
std::vector<double> one_hot(int c, std::size_t k) {
  std::vector<double> p(2 * k + 1, 0.0);
  p[static_cast<std::size_t>(c + static_cast<int>(k))] = 1.0;
  return p;
}

}  // namespace

TEST(Pairs, IdenticalPairHasZeroTargets) {
  auto p = single_pair(0, 0, 0, 0);
  EXPECT_EQ(p.offsets_abs.at(0), 0.0);
  EXPECT_EQ(p.offsets_abs.at(1), 0.0);
  EXPECT_EQ(p.offsets_signed.at(0), 0.0);
  EXPECT_EQ(p.classes, (std::vector<int>{0, 0}));
}

TEST(Pairs, AbsoluteOffsetsExample) {
  auto p = single_pair(1, 1, 4, 5);
  EXPECT_EQ(p.offsets_abs.at(0), 3.0 / 7.0);
  EXPECT_EQ(p.offsets_abs.at(1), 4.0 / 7.0);
}

TEST(Pairs, SignedOffsetsAndClassesExample) {
  auto p = single_pair(0, 0, 3, 4);
  EXPECT_EQ(p.offsets_signed.at(0), -3.0 / 7.0);
  EXPECT_EQ(p.offsets_signed.at(1), -4.0 / 7.0);
  EXPECT_EQ(p.classes, (std::vector<int>{-3, -4}));
}

TEST(Pairs, OutOfGridPositionRejected) {
  EXPECT_THROW(loc::make_pairs(7, 1, 1, {0, 7}, {0, 0}), UsageError);
  EXPECT_THROW(loc::make_pairs(1, 1, 1, {0, 0}, {0, 0}), ConfigError);
}

TEST(Pairs, SamplerIsUniformOverCells) {
  // 64,000 sampled coordinates on a 7x7 grid, binned by cell.
  nc::Rng rng(2024);
  auto p = loc::sample_pairs(7, 16000, 2, rng);
  std::vector<std::size_t> counts(49, 0);
  for (const auto* pos : {&p.pos_a, &p.pos_b}) {
    for (std::size_t i = 0; i < pos->size(); i += 2) ++counts[(*pos)[i] * 7 + (*pos)[i + 1]];
  }
  std::size_t total = 0;
  for (auto c : counts) total += c;
  ASSERT_EQ(total, 64000u);
  EXPECT_LT(checks::chi_square_uniform(counts), checks::chi_square_critical(48, 0.001));
}

TEST(Pairs, SwapSymmetryAndClassConsistency) {
  nc::Rng rng(77);
  auto p = loc::sample_pairs(7, 5000, 1, rng);  // 5,000 pairs x 2 axes = 10,000 coordinates
  auto q = loc::make_pairs(7, 5000, 1, p.pos_b, p.pos_a);
  std::size_t violations = 0;
  for (std::size_t i = 0; i < p.classes.size(); ++i) {
    if (p.offsets_abs.at(i) != q.offsets_abs.at(i)) ++violations;
    if (p.offsets_signed.at(i) != -q.offsets_signed.at(i)) ++violations;
    if (p.classes[i] != -q.classes[i]) ++violations;
    if (p.classes[i] != static_cast<int>(std::lround(7.0 * p.offsets_signed.at(i)))) ++violations;
    if (p.offsets_abs.at(i) > 6.0 / 7.0) ++violations;
  }
  EXPECT_EQ(violations, 0u);
}

TEST(Pairs, SamplingIsDeterministic) {
  nc::Rng a(5);
  nc::Rng b(5);
  auto p = loc::sample_pairs(7, 64, 3, a);
  auto q = loc::sample_pairs(7, 64, 3, b);
  EXPECT_EQ(p.pos_a, q.pos_a);
  EXPECT_EQ(p.pos_b, q.pos_b);
}

TEST(Collect, PicksTheAddressedCell) {
  // 2x2 grid, d = 1, cell (i, j) holds 10 i + j
  auto g = grid::TokenGrid::wrap(Tensor::from({1, 1, 2, 2}, {0, 1, 10, 11}));
  auto e = loc::collect_embeddings(g, {1, 0}, 1);
  EXPECT_EQ(e.shape(), (nc::Shape{1, 1, 1}));
  EXPECT_EQ(e.at(0), 10.0);
}

TEST(Collect, EveryPositionOnceIsAPermutation) {
  nc::Rng rng(6);
  auto g = grid::TokenGrid::wrap(testutil::normal(rng, {1, 3, 3, 3}));
  std::vector<int> pos;
  for (int i = 2; i >= 0; --i) {
    for (int j = 0; j < 3; ++j) pos.insert(pos.end(), {i, j});
  }
  auto e = loc::collect_embeddings(g, pos, 9);
  auto seq = grid::grid_to_sequence(g);
  std::vector<double> a(e.data().begin(), e.data().end());
  std::vector<double> b(seq.data().begin(), seq.data().end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  EXPECT_EQ(a, b);
}

TEST(Collect, GradientCountsMultiplicity) {
  nc::Tape::current().reset();
  auto values = Tensor::zeros({1, 2, 2, 2}, true);
  auto g = grid::TokenGrid::wrap(values);
  // (0,1) twice, (1,1) once
  nc::backward(nc::sum(loc::collect_embeddings(g, {0, 1, 1, 1, 0, 1}, 3)));
  const std::vector<double> want{0, 2, 0, 1, 0, 2, 0, 1};
  EXPECT_EQ(std::vector<double>(values.grad().begin(), values.grad().end()), want);
  nc::Tape::current().reset();

  nc::Rng rng(1);
  auto x = testutil::normal(rng, {1, 2, 2, 2});
  auto report = checks::check_gradients(
      "collect",
      [&] { return nc::sum(loc::collect_embeddings(grid::TokenGrid::wrap(x), {0, 1, 1, 1, 0, 1}, 3)); },
      {x});
  EXPECT_TRUE(report.passed) << report.worst;
}

TEST(Head, ZeroWeightsRegressionPredictsZero) {
  nc::Rng rng(1);
  auto h = loc::LocalizationHead::create(4, 16, loc::LossVariant::drloc, 7, rng);
  zero_head(h);
  auto e = testutil::normal(rng, {2, 3, 4});
  auto pred = loc::head_forward(h, e, e);
  EXPECT_EQ(pred.offsets.shape(), (nc::Shape{2, 3, 2}));
  for (double v : pred.offsets.data()) EXPECT_EQ(v, 0.0);
}

TEST(Head, ZeroWeightsClassificationIsUniform) {
  nc::Rng rng(1);
  auto h = loc::LocalizationHead::create(4, 16, loc::LossVariant::ce, 7, rng);
  zero_head(h);
  auto e = testutil::normal(rng, {1, 2, 4});
  auto pred = loc::head_forward(h, e, e);
  EXPECT_EQ(pred.probs_u.shape(), (nc::Shape{1, 2, 15}));
  for (double v : pred.probs_u.data()) EXPECT_NEAR(v, 1.0 / 15.0, 1e-15);
  for (double v : pred.probs_v.data()) EXPECT_NEAR(v, 1.0 / 15.0, 1e-15);
}

TEST(Head, PairOrderMatters) {
  nc::Rng rng(12);
  auto h = loc::LocalizationHead::create(4, 16, loc::LossVariant::signed_offsets, 7, rng);
  auto a = testutil::normal(rng, {1, 1, 4});
  auto b = testutil::normal(rng, {1, 1, 4});
  auto ab = loc::head_forward(h, a, b);
  auto ba = loc::head_forward(h, b, a);
  EXPECT_NE(ab.offsets.at(0), ba.offsets.at(0));
}

TEST(Head, WidthMismatchIsConfigError) {
  nc::Rng rng(1);
  auto h = loc::LocalizationHead::create(4, 16, loc::LossVariant::drloc, 7, rng);
  auto e = Tensor::zeros({1, 2, 5});
  EXPECT_THROW(loc::head_forward(h, e, e), ConfigError);
}

TEST(Losses, DrlocExamples) {
  nc::Rng rng(3);
  auto p = loc::sample_pairs(7, 5, 2, rng);
  EXPECT_EQ(loc::loss_drloc(p.offsets_abs, p.offsets_abs).item(), 0.0);
  auto shifted = nc::add(p.offsets_abs, Tensor::scalar(0.3));
  EXPECT_NEAR(loc::loss_drloc(shifted, p.offsets_abs).item(), 0.3, 1e-15);
}

TEST(Losses, DrlocMatchesBruteForceBitExactly) {
  nc::Rng rng(42);
  auto p = loc::sample_pairs(7, 3, 2, rng);
  auto pred = testutil::normal(rng, {2, 3, 2}, 0.5);
  EXPECT_TRUE(testutil::same_bits(loc::loss_drloc(pred, p.offsets_abs).item(),
                                  checks::oracle_drloc(pred.data(), p.pos_a, p.pos_b, 7)));
  EXPECT_TRUE(testutil::same_bits(loc::loss_signed(pred, p.offsets_signed).item(),
                                  checks::oracle_signed(pred.data(), p.pos_a, p.pos_b, 7)));
}

TEST(Losses, SignedExamples) {
  nc::Rng rng(3);
  auto p = loc::sample_pairs(7, 5, 2, rng);
  EXPECT_EQ(loc::loss_signed(p.offsets_signed, p.offsets_signed).item(), 0.0);
  auto same = loc::make_pairs(7, 2, 1, {1, 2, 3, 4}, {1, 2, 3, 4});
  auto pred = Tensor::from({1, 2, 2}, {0.5, -0.5, 0.5, -0.5});
  EXPECT_EQ(loc::loss_signed(pred, same.offsets_signed).item(), 0.5);
}

TEST(Losses, DrlocIsZeroOnlyAtTargets) {
  nc::Rng rng(8);
  auto p = loc::sample_pairs(5, 4, 2, rng);
  for (int trial = 0; trial < 20; ++trial) {
    auto pred = testutil::normal(rng, {2, 4, 2});
    EXPECT_GT(loc::loss_drloc(pred, p.offsets_abs).item(), 0.0);
  }
}

TEST(Losses, CeUniformIsTwoLogClasses) {
  const std::size_t k = 7;
  auto pu = Tensor::full({1, 3, 15}, 1.0 / 15.0);
  const std::vector<int> classes{0, 1, -2, 3, 6, -6};
  EXPECT_NEAR(loc::loss_ce(pu, pu, classes, k).item(), 2.0 * std::log(15.0), 1e-12);
  EXPECT_NEAR(2.0 * std::log(15.0), 5.4161, 1e-4);
}

TEST(Losses, CeOneHotAtTargetIsZero) {
  const std::size_t k = 3;
  auto u = one_hot(2, k);
  auto v = one_hot(-1, k);
  auto pu = Tensor::from({1, 1, 7}, u);
  auto pv = Tensor::from({1, 1, 7}, v);
  EXPECT_NEAR(loc::loss_ce(pu, pv, {2, -1}, k).item(), 0.0, 1e-15);
  // a one-hot on the wrong class is bounded by the probability floor
  EXPECT_NEAR(loc::loss_ce(pu, pv, {1, -1}, k).item(), -std::log(1e-12), 1e-9);
}

TEST(Losses, CeAndRegMatchOracles) {
  nc::Rng rng(19);
  const std::size_t k = 5;
  auto p = loc::sample_pairs(k, 6, 3, rng);
  auto pu = nc::softmax_lastdim(testutil::normal(rng, {3, 6, 11}, 2.0));
  auto pv = nc::softmax_lastdim(testutil::normal(rng, {3, 6, 11}, 2.0));
  EXPECT_NEAR(loc::loss_ce(pu, pv, p.classes, k).item(),
              checks::oracle_ce(pu.data(), pv.data(), p.pos_a, p.pos_b, k), 1e-9);
  EXPECT_NEAR(loc::loss_reg(pu, pv, p.classes, k, 1e-3, 1e-6).item(),
              checks::oracle_reg(pu.data(), pv.data(), p.pos_a, p.pos_b, k, 1e-3, 1e-6), 1e-9);
}

TEST(Losses, RegZeroAtMeanWithUnitVariance) {
  // classes -1 and +1 with equal mass: mu = 0, sigma^2 = 1
  const std::size_t k = 3;
  std::vector<double> d(7, 0.0);
  d[2] = 0.5;
  d[4] = 0.5;
  auto pu = Tensor::from({1, 1, 7}, d);
  EXPECT_NEAR(loc::loss_reg(pu, pu, {0, 0}, k, 1e-3, 1e-6).item(), 0.0, 1e-15);
}

TEST(Losses, RegOneHotHitsVarianceFloor) {
  const std::size_t k = 7;
  auto pu = Tensor::from({1, 1, 15}, one_hot(3, k));
  auto pv = Tensor::from({1, 1, 15}, one_hot(-2, k));
  const double v = loc::loss_reg(pu, pv, {3, -2}, k, 1e-3, 1e-6).item();
  EXPECT_NEAR(v, 1e-3 * std::log(1e-6), 1e-15);
  EXPECT_NEAR(v, -0.0138, 1e-4);
}

TEST(Losses, TotalLossExamples) {
  auto ce = Tensor::scalar(2.0);
  auto aux = Tensor::scalar(0.5);
  EXPECT_EQ(loc::total_loss(ce, aux, 0.5).item(), 2.25);
  EXPECT_EQ(loc::total_loss(ce, aux, 0.0).item(), 2.0);
  EXPECT_EQ(loc::LossVariantSpec{}.lambda, 0.1);
  EXPECT_EQ(loc::LossVariantSpec{}.m, 64u);
  EXPECT_EQ(loc::LossVariantSpec{}.alpha, 1e-3);
}

TEST(Losses, AllWithOneBlockEqualsDrloc) {
  nc::Rng rng(21);
  auto g = grid::TokenGrid::wrap(testutil::normal(rng, {3, 6, 4, 4}));
  auto h = loc::LocalizationHead::create(6, 16, loc::LossVariant::all, 4, rng);
  loc::LossVariantSpec spec;
  spec.variant = loc::LossVariant::all;
  spec.m = 10;
  nc::Rng r1(8);
  const double all = loc::loss_all({g}, {h}, spec, r1).item();
  nc::Rng r2(8);
  auto p = loc::sample_pairs(4, 10, 3, r2);
  auto pred = loc::head_forward(h, loc::collect_embeddings(g, p.pos_a, 10),
                                loc::collect_embeddings(g, p.pos_b, 10));
  EXPECT_TRUE(testutil::same_bits(all, loc::loss_drloc(pred.offsets, p.offsets_abs).item()));
}

TEST(Losses, AllWithTwoBlocksIsSumOfBlocks) {
  nc::Rng rng(22);
  grid::BlockGridSet grids{grid::TokenGrid::wrap(testutil::normal(rng, {2, 4, 3, 3})),
                           grid::TokenGrid::wrap(testutil::normal(rng, {2, 4, 3, 3}))};
  loc::HeadSet heads{loc::LocalizationHead::create(4, 8, loc::LossVariant::all, 3, rng),
                     loc::LocalizationHead::create(4, 8, loc::LossVariant::all, 3, rng)};
  loc::LossVariantSpec spec;
  spec.variant = loc::LossVariant::all;
  spec.m = 5;
  nc::Rng r1(4);
  const double all = loc::loss_all(grids, heads, spec, r1).item();
  nc::Rng r2(4);
  double expected = 0.0;
  for (std::size_t l = 0; l < 2; ++l) {
    auto p = loc::sample_pairs(3, 5, 2, r2);
    auto pred = loc::head_forward(heads[l], loc::collect_embeddings(grids[l], p.pos_a, 5),
                                  loc::collect_embeddings(grids[l], p.pos_b, 5));
    expected += checks::oracle_drloc(pred.offsets.data(), p.pos_a, p.pos_b, 3);
  }
  EXPECT_NEAR(all, expected, 1e-15);
  EXPECT_THROW(loc::loss_all(grids, {heads[0]}, spec, r1), ConfigError);
}

TEST(Losses, ShapeMismatchesAreConfigErrors) {
  EXPECT_THROW(loc::loss_drloc(Tensor::zeros({1, 2, 2}), Tensor::zeros({1, 3, 2})), ConfigError);
  EXPECT_THROW(loc::loss_ce(Tensor::zeros({1, 1, 5}), Tensor::zeros({1, 1, 5}), {0, 0}, 3),
               ConfigError);
}

TEST(Losses, VariantNamesRoundTrip) {
  for (auto v : {loc::LossVariant::drloc, loc::LossVariant::signed_offsets, loc::LossVariant::ce,
                 loc::LossVariant::reg, loc::LossVariant::all}) {
    EXPECT_EQ(loc::parse_variant(loc::to_string(v)), v);
  }
  EXPECT_THROW(loc::parse_variant("drloc2"), ConfigError);
}

// Every variant's gradient w.r.t. head parameters and grid embeddings on a
// d=8, k=3, n=2, m=4 instance.
TEST(Losses, VariantGradientsMatchFiniteDifferences) {
  for (auto variant : {loc::LossVariant::drloc, loc::LossVariant::signed_offsets,
                       loc::LossVariant::ce, loc::LossVariant::reg, loc::LossVariant::all}) {
    nc::Rng rng(40);
    const std::size_t blocks = variant == loc::LossVariant::all ? 2 : 1;
    grid::BlockGridSet grids;
    loc::HeadSet heads;
    std::vector<Tensor> inputs;
    std::vector<nc::Parameter> params;
    for (std::size_t l = 0; l < blocks; ++l) {
      grids.push_back(grid::TokenGrid::wrap(testutil::normal(rng, {2, 8, 3, 3})));
      heads.push_back(loc::LocalizationHead::create(8, 32, variant, 3, rng));
      heads.back().collect("h" + std::to_string(l), params);
      inputs.push_back(grids.back().values);
    }
    for (const auto& p : params) inputs.push_back(p.value);
    loc::LossVariantSpec spec;
    spec.variant = variant;
    spec.m = 4;
    auto report = checks::check_gradients(
        loc::to_string(variant),
        [&] {
          nc::Rng pr(3);
          return loc::pretext_loss(grids, heads, spec, pr).loss;
        },
        inputs, 40, 5);
    EXPECT_TRUE(report.passed) << loc::to_string(variant) << ": " << report.max_rel_error << " "
                               << report.worst;
  }
}

TEST(Losses, PretextMeanL1ForRegressionEqualsLoss) {
  nc::Rng rng(50);
  grid::BlockGridSet grids{grid::TokenGrid::wrap(testutil::normal(rng, {2, 4, 3, 3}))};
  loc::HeadSet heads{loc::LocalizationHead::create(4, 8, loc::LossVariant::drloc, 3, rng)};
  loc::LossVariantSpec spec;
  spec.m = 6;
  nc::Rng pr(1);
  auto out = loc::pretext_loss(grids, heads, spec, pr);
  EXPECT_EQ(out.mean_l1, out.loss.item());
}
