#include "drloc/localization/losses.hpp"

#include <cmath>
#include <string>

#include "drloc/numcore/errors.hpp"
#include "drloc/numcore/ops.hpp"

namespace drloc::loc {
namespace {

void check_offsets(const char* op, const nc::Tensor& pred, const nc::Tensor& target) {
  if (pred.shape() != target.shape()) {
    throw ConfigError(std::string(op) + ": prediction " + nc::shape_str(pred.shape()) +
                      " vs target " + nc::shape_str(target.shape()));
  }
}

void check_distributions(const char* op, const nc::Tensor& pu, const nc::Tensor& pv,
                         const std::vector<int>& classes, std::size_t k) {
  const std::size_t c = 2 * k + 1;
  if (pu.rank() != 3 || pu.shape() != pv.shape() || pu.dim(2) != c) {
    throw ConfigError(std::string(op) + ": expected two [n, m, " + std::to_string(c) +
                      "] distributions, got " + nc::shape_str(pu.shape()) + " and " +
                      nc::shape_str(pv.shape()));
  }
  if (classes.size() != pu.dim(0) * pu.dim(1) * 2) {
    throw ConfigError(std::string(op) + ": class array does not match [n, m, 2]");
  }
  const int bound = static_cast<int>(k);
  for (int cls : classes) {
    if (cls < -bound || cls > bound) {
      throw ConfigError(std::string(op) + ": class " + std::to_string(cls) + " outside [-k, k]");
    }
  }
}

// Probability of the target class for each pair on one axis: [n*m, 1].
nc::Tensor pick_target(const nc::Tensor& probs, const std::vector<int>& classes, std::size_t axis,
                       std::size_t k) {
  const std::size_t c = 2 * k + 1;
  const std::size_t pairs = probs.dim(0) * probs.dim(1);
  std::vector<std::size_t> rows(pairs);
  for (std::size_t r = 0; r < pairs; ++r) {
    rows[r] = r * c + static_cast<std::size_t>(classes[r * 2 + axis] + static_cast<int>(k));
  }
  return nc::gather_rows(nc::reshape(probs, {pairs * c, 1}), rows);
}

// (c - mu)^2 / sigma^2 + alpha * log(sigma) per pair for one axis: [n, m, 1].
nc::Tensor gaussian_prior_term(const nc::Tensor& probs, const std::vector<int>& classes,
                               std::size_t axis, std::size_t k, double alpha,
                               double sigma_floor) {
  const std::size_t c = 2 * k + 1;
  std::vector<double> values(c);
  std::vector<double> squares(c);
  for (std::size_t s = 0; s < c; ++s) {
    values[s] = static_cast<double>(s) - static_cast<double>(k);
    squares[s] = values[s] * values[s];
  }
  const auto n = probs.dim(0);
  const auto m = probs.dim(1);
  std::vector<double> target(n * m);
  for (std::size_t r = 0; r < n * m; ++r) target[r] = classes[r * 2 + axis];

  auto mu = nc::matmul(probs, nc::Tensor::from({c, 1}, values));
  auto second = nc::matmul(probs, nc::Tensor::from({c, 1}, squares));
  auto var = nc::clamp_min(nc::sub(second, nc::mul(mu, mu)), sigma_floor);
  auto diff = nc::sub(nc::Tensor::from({n, m, 1}, std::move(target)), mu);
  // alpha * log(sigma) == 0.5 * alpha * log(sigma^2)
  return nc::add(nc::div(nc::mul(diff, diff), var), nc::scale(nc::log(var), 0.5 * alpha));
}

double expected_class(std::span<const double> probs, std::size_t k) {
  double mu = 0.0;
  for (std::size_t s = 0; s < probs.size(); ++s) {
    mu += probs[s] * (static_cast<double>(s) - static_cast<double>(k));
  }
  return mu;
}

double classification_l1(const HeadPrediction& pred, const PairBatch& pairs) {
  const std::size_t c = 2 * pairs.k + 1;
  const double kd = static_cast<double>(pairs.k);
  double total = 0.0;
  const auto pu = pred.probs_u.data();
  const auto pv = pred.probs_v.data();
  for (std::size_t r = 0; r < pairs.pairs(); ++r) {
    const double mu_u = expected_class(pu.subspan(r * c, c), pairs.k) / kd;
    const double mu_v = expected_class(pv.subspan(r * c, c), pairs.k) / kd;
    total += std::fabs(pairs.offsets_signed.at(r * 2) - mu_u);
    total += std::fabs(pairs.offsets_signed.at(r * 2 + 1) - mu_v);
  }
  return total / static_cast<double>(pairs.pairs() * 2);
}

struct SampledPrediction {
  PairBatch pairs;
  HeadPrediction pred;
};

SampledPrediction predict_pairs(const grid::TokenGrid& grid, const LocalizationHead& head,
                                std::size_t m, nc::Rng& rng) {
  if (head.grid_side != grid.side()) {
    throw ConfigError("pretext: head built for a " + std::to_string(head.grid_side) +
                      "-wide grid applied to a " + std::to_string(grid.side()) + "-wide grid");
  }
  auto pairs = sample_pairs(grid.side(), m, grid.batch(), rng);
  auto e_a = collect_embeddings(grid, pairs.pos_a, m);
  auto e_b = collect_embeddings(grid, pairs.pos_b, m);
  auto pred = head_forward(head, e_a, e_b);
  return {std::move(pairs), std::move(pred)};
}

}  // namespace

nc::Tensor loss_drloc(const nc::Tensor& pred, const nc::Tensor& offsets_abs) {
  check_offsets("loss_drloc", pred, offsets_abs);
  return nc::mean(nc::abs(nc::sub(offsets_abs, pred)));
}

nc::Tensor loss_signed(const nc::Tensor& pred, const nc::Tensor& offsets_signed) {
  check_offsets("loss_signed", pred, offsets_signed);
  return nc::mean(nc::abs(nc::sub(offsets_signed, pred)));
}

nc::Tensor loss_ce(const nc::Tensor& probs_u, const nc::Tensor& probs_v,
                   const std::vector<int>& classes, std::size_t k) {
  check_distributions("loss_ce", probs_u, probs_v, classes, k);
  auto log_u = nc::log(nc::clamp_min(pick_target(probs_u, classes, 0, k), kProbabilityFloor));
  auto log_v = nc::log(nc::clamp_min(pick_target(probs_v, classes, 1, k), kProbabilityFloor));
  return nc::scale(nc::mean(nc::add(log_u, log_v)), -1.0);
}

nc::Tensor loss_reg(const nc::Tensor& probs_u, const nc::Tensor& probs_v,
                    const std::vector<int>& classes, std::size_t k, double alpha,
                    double sigma_floor) {
  check_distributions("loss_reg", probs_u, probs_v, classes, k);
  auto u = gaussian_prior_term(probs_u, classes, 0, k, alpha, sigma_floor);
  auto v = gaussian_prior_term(probs_v, classes, 1, k, alpha, sigma_floor);
  return nc::mean(nc::add(u, v));
}

nc::Tensor loss_all(const grid::BlockGridSet& grids, const HeadSet& heads,
                    const LossVariantSpec& spec, nc::Rng& rng) {
  if (grids.empty() || heads.size() != grids.size()) {
    throw ConfigError("loss_all: " + std::to_string(heads.size()) + " heads for " +
                      std::to_string(grids.size()) + " block grids");
  }
  nc::Tensor total;
  for (std::size_t l = 0; l < grids.size(); ++l) {
    auto s = predict_pairs(grids[l], heads[l], spec.m, rng);
    auto block = loss_drloc(s.pred.offsets, s.pairs.offsets_abs);
    total = total.defined() ? nc::add(total, block) : block;
  }
  return total;
}

nc::Tensor total_loss(const nc::Tensor& ce, const nc::Tensor& aux, double lambda) {
  return nc::add(ce, nc::scale(aux, lambda));
}

std::size_t heads_required(LossVariant variant, std::size_t blocks) {
  return variant == LossVariant::all ? blocks : 1;
}

PretextOutcome pretext_loss(const grid::BlockGridSet& grids, const HeadSet& heads,
                            const LossVariantSpec& spec, nc::Rng& rng) {
  spec.validate();
  if (grids.empty()) throw ConfigError("pretext: no block grids");
  PretextOutcome out;
  if (spec.variant == LossVariant::all) {
    if (heads.size() != grids.size()) {
      throw ConfigError("pretext: per-block variant needs " + std::to_string(grids.size()) +
                        " heads, got " + std::to_string(heads.size()));
    }
    for (std::size_t l = 0; l < grids.size(); ++l) {
      auto s = predict_pairs(grids[l], heads[l], spec.m, rng);
      auto block = loss_drloc(s.pred.offsets, s.pairs.offsets_abs);
      out.loss = out.loss.defined() ? nc::add(out.loss, block) : block;
      out.mean_l1 = block.item();
    }
    return out;
  }
  if (heads.size() != 1) throw ConfigError("pretext: expected exactly one localization head");
  auto s = predict_pairs(grids.back(), heads.front(), spec.m, rng);
  switch (spec.variant) {
    case LossVariant::drloc:
      out.loss = loss_drloc(s.pred.offsets, s.pairs.offsets_abs);
      out.mean_l1 = out.loss.item();
      break;
    case LossVariant::signed_offsets:
      out.loss = loss_signed(s.pred.offsets, s.pairs.offsets_signed);
      out.mean_l1 = out.loss.item();
      break;
    case LossVariant::ce:
      out.loss = loss_ce(s.pred.probs_u, s.pred.probs_v, s.pairs.classes, s.pairs.k);
      out.mean_l1 = classification_l1(s.pred, s.pairs);
      break;
    case LossVariant::reg:
      out.loss = loss_reg(s.pred.probs_u, s.pred.probs_v, s.pairs.classes, s.pairs.k, spec.alpha,
                          spec.sigma_floor);
      out.mean_l1 = classification_l1(s.pred, s.pairs);
      break;
    case LossVariant::all:
      break;
  }
  return out;
}

}  // namespace drloc::loc
