#include "drloc/checks/suite.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>

#include "drloc/checks/gradcheck.hpp"
#include "drloc/checks/oracles.hpp"
#include "drloc/gridops/grid.hpp"
#include "drloc/localization/losses.hpp"
#include "drloc/numcore/ops.hpp"
#include "drloc/numcore/rng.hpp"
#include "drloc/numcore/tape.hpp"
#include "drloc/vit/vit.hpp"

namespace drloc::checks {
namespace {

using nc::Tensor;

Tensor normal(nc::Rng& rng, nc::Shape shape, double scale = 1.0) {
  std::vector<double> v(nc::shape_numel(shape));
  for (auto& x : v) x = scale * rng.normal();
  return Tensor::from(std::move(shape), std::move(v));
}

// Values in [lo, hi] with a random sign: keeps kinks and poles out of reach
// of the finite-difference step.
Tensor away_from_zero(nc::Rng& rng, nc::Shape shape, double lo, double hi) {
  std::vector<double> v(nc::shape_numel(shape));
  for (auto& x : v) x = (rng.uniform_int(2) ? 1.0 : -1.0) * rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v));
}

Tensor positive(nc::Rng& rng, nc::Shape shape, double lo, double hi) {
  std::vector<double> v(nc::shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v));
}

// Scalar probe of a tensor-valued op: sum(out * fixed random weights).
std::function<Tensor()> probe(nc::Rng& rng, std::function<Tensor()> op) {
  Tensor sample;
  {
    nc::NoGradGuard guard;
    sample = op();
  }
  const Tensor weights = normal(rng, sample.shape());
  return [op = std::move(op), weights] { return nc::sum(nc::mul(op(), weights)); };
}

CheckOutcome from_report(const GradCheckReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%zu probes, max rel err %.3e%s%s", r.checked, r.max_rel_error,
                r.worst.empty() ? "" : ", worst ", r.worst.c_str());
  return {"grad/" + r.name, r.passed, buf, r.max_rel_error};
}

std::vector<Tensor> values_of(const std::vector<nc::Parameter>& params) {
  std::vector<Tensor> out;
  for (const auto& p : params) out.push_back(p.value);
  return out;
}

std::vector<nc::Parameter> head_parameters(const loc::HeadSet& heads) {
  std::vector<nc::Parameter> out;
  for (std::size_t i = 0; i < heads.size(); ++i) heads[i].collect("head." + std::to_string(i), out);
  return out;
}

void primitive_checks(std::uint64_t seed, std::vector<CheckOutcome>& out) {
  nc::Rng rng(seed);
  auto run = [&](const std::string& name, std::function<Tensor()> op, std::vector<Tensor> inputs) {
    out.push_back(from_report(check_gradients(name, probe(rng, std::move(op)), inputs)));
  };

  {
    auto a = normal(rng, {3, 4});
    auto b = normal(rng, {4, 5});
    run("matmul", [=] { return nc::matmul(a, b); }, {a, b});
  }
  {
    auto a = normal(rng, {2, 3, 4});
    auto b = normal(rng, {4, 2});
    run("matmul_rank3_by_matrix", [=] { return nc::matmul(a, b); }, {a, b});
  }
  {
    auto a = normal(rng, {2, 3, 4});
    auto b = normal(rng, {2, 4, 5});
    run("matmul_batched", [=] { return nc::matmul(a, b); }, {a, b});
  }
  {
    auto a = normal(rng, {3, 4});
    auto b = normal(rng, {3, 4});
    run("add", [=] { return nc::add(a, b); }, {a, b});
    run("sub", [=] { return nc::sub(a, b); }, {a, b});
    run("mul", [=] { return nc::mul(a, b); }, {a, b});
  }
  {
    auto a = normal(rng, {3, 4});
    auto b = away_from_zero(rng, {3, 4}, 0.5, 1.5);
    run("div", [=] { return nc::div(a, b); }, {a, b});
  }
  {
    auto a = normal(rng, {3, 4});
    auto s = away_from_zero(rng, {}, 0.5, 1.5);
    run("add_scalar", [=] { return nc::add(a, s); }, {a, s});
    run("sub_scalar", [=] { return nc::sub(s, a); }, {a, s});
    run("mul_scalar", [=] { return nc::mul(a, s); }, {a, s});
    run("div_scalar", [=] { return nc::div(a, s); }, {a, s});
  }
  {
    auto a = normal(rng, {3, 4});
    run("scale", [=] { return nc::scale(a, -1.7); }, {a});
  }
  {
    auto x = normal(rng, {2, 3, 4});
    auto b = normal(rng, {4});
    run("add_rowwise", [=] { return nc::add_rowwise(x, b); }, {x, b});
  }
  {
    auto x = away_from_zero(rng, {3, 5}, 0.05, 2.0);
    run("relu", [=] { return nc::relu(x); }, {x});
    run("abs", [=] { return nc::abs(x); }, {x});
  }
  {
    auto x = positive(rng, {3, 5}, 0.2, 3.0);
    run("log", [=] { return nc::log(x); }, {x});
  }
  {
    auto x = away_from_zero(rng, {3, 5}, 0.05, 2.0);
    run("clamp_min", [=] { return nc::clamp_min(x, 0.0); }, {x});
  }
  {
    auto x = normal(rng, {3, 5}, 2.0);
    run("softmax_lastdim", [=] { return nc::softmax_lastdim(x); }, {x});
    run("log_softmax_lastdim", [=] { return nc::log_softmax_lastdim(x); }, {x});
  }
  {
    auto x = normal(rng, {2, 3, 6});
    auto g = normal(rng, {6});
    auto b = normal(rng, {6});
    run("layernorm_lastdim", [=] { return nc::layernorm_lastdim(x, g, b); }, {x, g, b});
  }
  {
    auto x = normal(rng, {2, 3, 4});
    out.push_back(from_report(check_gradients("sum", [=] { return nc::sum(x); }, {x})));
    out.push_back(from_report(check_gradients("mean", [=] { return nc::mean(x); }, {x})));
    run("mean_axis", [=] { return nc::mean_axis(x, 1); }, {x});
    run("reshape", [=] { return nc::reshape(x, {4, 6}); }, {x});
    run("permute", [=] { return nc::permute(x, {2, 0, 1}); }, {x});
    run("transpose", [=] { return nc::transpose(x, 0, 2); }, {x});
    run("slice", [=] { return nc::slice(x, 2, 1, 3); }, {x});
  }
  {
    auto a = normal(rng, {2, 3});
    auto b = normal(rng, {2, 2});
    run("concat_lastdim", [=] { return nc::concat_lastdim({a, b}); }, {a, b});
  }
  {
    auto x = normal(rng, {1, 2, 4, 4});
    run("avgpool2x2", [=] { return nc::avgpool2x2(x); }, {x});
  }
  {
    auto x = normal(rng, {4, 3});
    run("gather_rows", [=] { return nc::gather_rows(x, {2, 0, 2, 3}); }, {x});
  }
}

void loss_checks(std::uint64_t seed, std::vector<CheckOutcome>& out) {
  nc::Rng rng(seed);
  const std::size_t k = 3;
  const std::size_t n = 2;
  const std::size_t m = 8;
  const std::size_t c = 2 * k + 1;
  auto pairs = loc::sample_pairs(k, m, n, rng);

  {
    auto pred = normal(rng, {n, m, 2}, 0.5);
    auto targets = pairs.offsets_abs;
    out.push_back(from_report(check_gradients(
        "loss_drloc", [=] { return loc::loss_drloc(pred, targets); }, {pred})));
  }
  {
    auto pred = normal(rng, {n, m, 2}, 0.5);
    auto targets = pairs.offsets_signed;
    out.push_back(from_report(check_gradients(
        "loss_signed", [=] { return loc::loss_signed(pred, targets); }, {pred})));
  }
  {
    auto lu = normal(rng, {n, m, c});
    auto lv = normal(rng, {n, m, c});
    const auto classes = pairs.classes;
    out.push_back(from_report(check_gradients(
        "loss_ce",
        [=] {
          return loc::loss_ce(nc::softmax_lastdim(lu), nc::softmax_lastdim(lv), classes, k);
        },
        {lu, lv})));
    out.push_back(from_report(check_gradients(
        "loss_reg",
        [=] {
          return loc::loss_reg(nc::softmax_lastdim(lu), nc::softmax_lastdim(lv), classes, k, 1e-3,
                               1e-6);
        },
        {lu, lv})));
  }
  {
    // Per-block sum over two grids, each with its own head; the pair stream
    // is re-seeded on every evaluation so all calls see the same pairs.
    const std::size_t d = 6;
    grid::BlockGridSet grids{grid::TokenGrid::wrap(normal(rng, {n, d, k, k})),
                             grid::TokenGrid::wrap(normal(rng, {n, d, k, k}))};
    loc::HeadSet heads;
    for (int l = 0; l < 2; ++l) {
      heads.push_back(loc::LocalizationHead::create(d, 16, loc::LossVariant::all, k, rng));
    }
    loc::LossVariantSpec spec;
    spec.variant = loc::LossVariant::all;
    spec.m = m;
    const std::uint64_t pair_seed = rng.next_u64();
    std::vector<Tensor> inputs{grids[0].values, grids[1].values};
    for (auto& t : values_of(head_parameters(heads))) inputs.push_back(t);
    out.push_back(from_report(check_gradients(
        "loss_all",
        [=] {
          nc::Rng pr(pair_seed);
          return loc::loss_all(grids, heads, spec, pr);
        },
        inputs, 24, seed)));
  }
  {
    auto logits = normal(rng, {4, 5}, 2.0);
    const std::vector<int> labels{0, 4, 2, 2};
    out.push_back(from_report(check_gradients(
        "classification_loss", [=] { return vit::classification_loss(logits, labels); },
        {logits})));
  }
}

void objective_checks(std::uint64_t seed, std::vector<CheckOutcome>& out) {
  const loc::LossVariant variants[] = {loc::LossVariant::drloc, loc::LossVariant::signed_offsets,
                                       loc::LossVariant::ce, loc::LossVariant::reg,
                                       loc::LossVariant::all};
  for (auto variant : variants) {
    nc::Rng rng(seed);
    vit::VitConfig cfg;
    cfg.image_side = 12;
    cfg.patch_side = 4;  // 3x3 grid
    cfg.embed_dim = 16;
    cfg.blocks = 2;
    cfg.heads = 2;
    cfg.mlp_ratio = 2;
    cfg.classes = 3;
    vit::VitModel model(cfg, rng);
    loc::LossVariantSpec spec;
    spec.variant = variant;
    spec.m = 8;
    spec.lambda = 0.5;
    loc::HeadSet heads;
    for (std::size_t l = 0; l < loc::heads_required(variant, cfg.blocks); ++l) {
      heads.push_back(
          loc::LocalizationHead::create(cfg.embed_dim, 512, variant, cfg.native_side(), rng));
    }
    const auto images = normal(rng, {2, 3, 12, 12});
    const std::vector<int> labels{0, 2};
    const std::uint64_t pair_seed = rng.next_u64();
    auto inputs = values_of(model.parameters());
    for (auto& t : values_of(head_parameters(heads))) inputs.push_back(t);
    auto objective = [&] {
      auto fwd = model.forward(images);
      auto ce = vit::classification_loss(fwd.logits, labels);
      nc::Rng pr(pair_seed);
      auto aux = loc::pretext_loss(fwd.grids, heads, spec, pr).loss;
      return loc::total_loss(ce, aux, spec.lambda);
    };
    out.push_back(from_report(
        check_gradients("total_loss/" + loc::to_string(variant), objective, inputs, 12, seed)));
  }
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

std::string pair_detail(double got, double want) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "got %.17g, oracle %.17g, diff %.3e", got, want,
                std::fabs(got - want));
  return buf;
}

}  // namespace

std::vector<CheckOutcome> gradient_suite(std::uint64_t seed) {
  std::vector<CheckOutcome> out;
  primitive_checks(seed, out);
  loss_checks(seed + 1, out);
  objective_checks(seed + 2, out);
  return out;
}

std::vector<CheckOutcome> oracle_suite(std::uint64_t seed) {
  nc::NoGradGuard guard;
  std::vector<CheckOutcome> out;
  nc::Rng rng(seed);
  const std::size_t n = 4;
  const std::size_t d = 8;
  const std::size_t k = 7;
  const std::size_t m = 64;
  auto grid = grid::TokenGrid::wrap(normal(rng, {n, d, k, k}));

  auto evaluate = [&](loc::LossVariant variant, std::uint64_t pair_seed) {
    auto head = loc::LocalizationHead::create(d, 32, variant, k, rng);
    nc::Rng pr(pair_seed);
    auto pairs = loc::sample_pairs(k, m, n, pr);
    auto pred = loc::head_forward(head, loc::collect_embeddings(grid, pairs.pos_a, m),
                                  loc::collect_embeddings(grid, pairs.pos_b, m));
    return std::make_pair(std::move(pairs), std::move(pred));
  };

  {
    auto [pairs, pred] = evaluate(loc::LossVariant::drloc, 101);
    const double got = loc::loss_drloc(pred.offsets, pairs.offsets_abs).item();
    const double want = oracle_drloc(pred.offsets.data(), pairs.pos_a, pairs.pos_b, k);
    out.push_back({"oracle/loss_drloc", same_bits(got, want), pair_detail(got, want)});
  }
  {
    auto [pairs, pred] = evaluate(loc::LossVariant::signed_offsets, 102);
    const double got = loc::loss_signed(pred.offsets, pairs.offsets_signed).item();
    const double want = oracle_signed(pred.offsets.data(), pairs.pos_a, pairs.pos_b, k);
    out.push_back({"oracle/loss_signed", same_bits(got, want), pair_detail(got, want)});
  }
  {
    auto [pairs, pred] = evaluate(loc::LossVariant::ce, 103);
    const double got = loc::loss_ce(pred.probs_u, pred.probs_v, pairs.classes, k).item();
    const double want =
        oracle_ce(pred.probs_u.data(), pred.probs_v.data(), pairs.pos_a, pairs.pos_b, k);
    out.push_back({"oracle/loss_ce", std::fabs(got - want) <= 1e-9, pair_detail(got, want)});
  }
  {
    auto [pairs, pred] = evaluate(loc::LossVariant::reg, 104);
    const double got =
        loc::loss_reg(pred.probs_u, pred.probs_v, pairs.classes, k, 1e-3, 1e-6).item();
    const double want = oracle_reg(pred.probs_u.data(), pred.probs_v.data(), pairs.pos_a,
                                   pairs.pos_b, k, 1e-3, 1e-6);
    out.push_back({"oracle/loss_reg", std::fabs(got - want) <= 1e-9, pair_detail(got, want)});
  }
  {
    auto head = loc::LocalizationHead::create(d, 32, loc::LossVariant::all, k, rng);
    loc::LossVariantSpec spec;
    spec.variant = loc::LossVariant::all;
    spec.m = m;
    nc::Rng all_rng(105);
    const double got = loc::loss_all({grid}, {head}, spec, all_rng).item();
    nc::Rng single_rng(105);
    auto pairs = loc::sample_pairs(k, m, n, single_rng);
    auto pred = loc::head_forward(head, loc::collect_embeddings(grid, pairs.pos_a, m),
                                  loc::collect_embeddings(grid, pairs.pos_b, m));
    const double want = loc::loss_drloc(pred.offsets, pairs.offsets_abs).item();
    out.push_back({"oracle/loss_all_single_block", same_bits(got, want), pair_detail(got, want)});
  }
  {
    auto logits = normal(rng, {16, 10}, 3.0);
    std::vector<int> labels(16);
    for (auto& l : labels) l = static_cast<int>(rng.uniform_int(10));
    const double got = vit::classification_loss(logits, labels).item();
    const double want = oracle_classification_loss(logits.data(), 10, labels);
    out.push_back(
        {"oracle/classification_loss", std::fabs(got - want) <= 1e-12, pair_detail(got, want)});
  }
  {
    auto fine = grid::TokenGrid::wrap(normal(rng, {2, 5, 14, 14}));
    auto pooled = grid::pool_to_target(fine, 7);
    const auto want = oracle_avgpool(fine.values.data(), 2, 5, 14, 14);
    double worst = 0.0;
    for (std::size_t i = 0; i < want.size(); ++i) {
      worst = std::max(worst, std::fabs(pooled.values.at(i) - want[i]));
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "max |pool - 4-term mean| %.3e", worst);
    out.push_back({"oracle/pool_14_to_7", worst <= 1e-12, buf});
    const double mean_fine = nc::mean(fine.values).item();
    const double mean_pooled = nc::mean(pooled.values).item();
    out.push_back({"oracle/pool_preserves_mean", std::fabs(mean_fine - mean_pooled) <= 1e-12,
                   pair_detail(mean_pooled, mean_fine)});
  }
  {
    auto tokens = normal(rng, {3, 49, 6});
    auto back = grid::grid_to_sequence(grid::sequence_to_grid(tokens));
    bool exact = back.shape() == tokens.shape();
    for (std::size_t i = 0; exact && i < tokens.numel(); ++i) {
      exact = same_bits(back.at(i), tokens.at(i));
    }
    out.push_back({"oracle/sequence_grid_round_trip", exact, exact ? "bit-exact" : "mismatch"});
  }
  return out;
}

}  // namespace drloc::checks
