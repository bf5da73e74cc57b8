#include "drloc/checks/oracles.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <cstdlib>

namespace drloc::checks {
namespace {

template <typename Target>
double mean_l1(std::span<const double> pred, const std::vector<int>& pos_a,
               const std::vector<int>& pos_b, Target target) {
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    total += std::fabs(target(pos_a[i] - pos_b[i]) - pred[i]);
  }
  return total / static_cast<double>(pred.size());
}

}  // namespace

double oracle_drloc(std::span<const double> pred, const std::vector<int>& pos_a,
                    const std::vector<int>& pos_b, std::size_t k) {
  const double kd = static_cast<double>(k);
  return mean_l1(pred, pos_a, pos_b,
                 [kd](int delta) { return static_cast<double>(std::abs(delta)) / kd; });
}

double oracle_signed(std::span<const double> pred, const std::vector<int>& pos_a,
                     const std::vector<int>& pos_b, std::size_t k) {
  const double kd = static_cast<double>(k);
  return mean_l1(pred, pos_a, pos_b, [kd](int delta) { return static_cast<double>(delta) / kd; });
}

double oracle_ce(std::span<const double> probs_u, std::span<const double> probs_v,
                 const std::vector<int>& pos_a, const std::vector<int>& pos_b, std::size_t k) {
  const std::size_t c = 2 * k + 1;
  const std::size_t pairs = probs_u.size() / c;
  long double total = 0.0L;
  for (std::size_t r = 0; r < pairs; ++r) {
    const int cu = pos_a[2 * r] - pos_b[2 * r] + static_cast<int>(k);
    const int cv = pos_a[2 * r + 1] - pos_b[2 * r + 1] + static_cast<int>(k);
    const long double pu = std::max<long double>(probs_u[r * c + cu], 1e-12L);
    const long double pv = std::max<long double>(probs_v[r * c + cv], 1e-12L);
    total -= std::log(pu) + std::log(pv);
  }
  return static_cast<double>(total / static_cast<long double>(pairs));
}

double oracle_reg(std::span<const double> probs_u, std::span<const double> probs_v,
                  const std::vector<int>& pos_a, const std::vector<int>& pos_b, std::size_t k,
                  double alpha, double sigma_floor) {
  const std::size_t c = 2 * k + 1;
  const std::size_t pairs = probs_u.size() / c;
  const long double kd = static_cast<long double>(k);
  auto term = [&](std::span<const double> p, int target) {
    long double mu = 0.0L;
    for (std::size_t s = 0; s < c; ++s) mu += p[s] * (static_cast<long double>(s) - kd);
    long double var = 0.0L;
    for (std::size_t s = 0; s < c; ++s) {
      const long double dev = static_cast<long double>(s) - kd - mu;
      var += p[s] * dev * dev;
    }
    var = std::max<long double>(var, sigma_floor);
    const long double diff = static_cast<long double>(target) - mu;
    return diff * diff / var + static_cast<long double>(alpha) * std::log(std::sqrt(var));
  };
  long double total = 0.0L;
  for (std::size_t r = 0; r < pairs; ++r) {
    total += term(probs_u.subspan(r * c, c), pos_a[2 * r] - pos_b[2 * r]);
    total += term(probs_v.subspan(r * c, c), pos_a[2 * r + 1] - pos_b[2 * r + 1]);
  }
  return static_cast<double>(total / static_cast<long double>(pairs));
}

std::vector<double> oracle_avgpool(std::span<const double> x, std::size_t n, std::size_t c,
                                   std::size_t h, std::size_t w) {
  const std::size_t oh = h / 2;
  const std::size_t ow = w / 2;
  std::vector<double> out(n * c * oh * ow);
  for (std::size_t p = 0; p < n * c; ++p) {
    const double* plane = x.data() + p * h * w;
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        const double a = plane[(2 * i) * w + 2 * j];
        const double b = plane[(2 * i) * w + 2 * j + 1];
        const double d = plane[(2 * i + 1) * w + 2 * j];
        const double e = plane[(2 * i + 1) * w + 2 * j + 1];
        out[(p * oh + i) * ow + j] = (a + b + d + e) / 4.0;
      }
    }
  }
  return out;
}

double oracle_classification_loss(std::span<const double> logits, std::size_t classes,
                                  const std::vector<int>& labels) {
  long double total = 0.0L;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    const auto row = logits.subspan(r * classes, classes);
    const long double top = *std::max_element(row.begin(), row.end());
    long double z = 0.0L;
    for (double v : row) z += std::exp(static_cast<long double>(v) - top);
    total += top + std::log(z) - static_cast<long double>(row[labels[r]]);
  }
  return static_cast<double>(total / static_cast<long double>(labels.size()));
}

double chi_square_uniform(const std::vector<std::size_t>& counts) {
  std::size_t n = 0;
  for (auto v : counts) n += v;
  const double expected = static_cast<double>(n) / static_cast<double>(counts.size());
  double stat = 0.0;
  for (auto v : counts) {
    const double d = static_cast<double>(v) - expected;
    stat += d * d / expected;
  }
  return stat;
}

double chi_square_critical(std::size_t degrees_of_freedom, double significance) {
  boost::math::chi_squared dist(static_cast<double>(degrees_of_freedom));
  return boost::math::quantile(boost::math::complement(dist, significance));
}

}  // namespace drloc::checks
