#include "drloc/localization/head.hpp"

#include "drloc/numcore/errors.hpp"
#include "drloc/numcore/ops.hpp"

namespace drloc::loc {

std::string to_string(LossVariant v) {
  switch (v) {
    case LossVariant::drloc: return "drloc";
    case LossVariant::signed_offsets: return "signed";
    case LossVariant::ce: return "ce";
    case LossVariant::reg: return "reg";
    case LossVariant::all: return "all";
  }
  return "?";
}

LossVariant parse_variant(const std::string& text) {
  if (text == "drloc") return LossVariant::drloc;
  if (text == "signed") return LossVariant::signed_offsets;
  if (text == "ce") return LossVariant::ce;
  if (text == "reg") return LossVariant::reg;
  if (text == "all") return LossVariant::all;
  throw ConfigError("unknown loss variant '" + text + "' (expected drloc|signed|ce|reg|all)");
}

bool is_classification(LossVariant v) { return v == LossVariant::ce || v == LossVariant::reg; }

void LossVariantSpec::validate() const {
  if (m < 1) throw ConfigError("loss.m must be >= 1");
  if (!(lambda >= 0.0)) throw ConfigError("loss.lambda must be >= 0");
  if (!(alpha >= 0.0)) throw ConfigError("loss.alpha must be >= 0");
  if (!(sigma_floor > 0.0)) throw ConfigError("loss.sigma_floor must be > 0");
}

LocalizationHead LocalizationHead::create(std::size_t embed_dim, std::size_t hidden,
                                          LossVariant variant, std::size_t grid_side,
                                          nc::Rng& rng) {
  if (embed_dim == 0 || hidden == 0) throw ConfigError("localization head: zero width");
  if (grid_side < 2) throw ConfigError("localization head: grid side must be >= 2");
  LocalizationHead head;
  head.classification = is_classification(variant);
  head.grid_side = grid_side;
  const std::size_t outputs = head.classification ? 2 * (2 * grid_side + 1) : 2;
  head.layer1 = nc::Linear(2 * embed_dim, hidden, rng);
  head.layer2 = nc::Linear(hidden, hidden, rng);
  head.layer3 = nc::Linear(hidden, outputs, rng);
  return head;
}

void LocalizationHead::collect(const std::string& prefix, std::vector<nc::Parameter>& out) const {
  layer1.collect(prefix + ".layer1", out);
  layer2.collect(prefix + ".layer2", out);
  layer3.collect(prefix + ".layer3", out);
}

HeadPrediction head_forward(const LocalizationHead& head, const nc::Tensor& e_a,
                            const nc::Tensor& e_b) {
  if (e_a.rank() != 3 || e_a.shape() != e_b.shape()) {
    throw ConfigError("head_forward: embedding shapes " + nc::shape_str(e_a.shape()) + " and " +
                      nc::shape_str(e_b.shape()) + " differ or are not [n, m, d]");
  }
  if (2 * e_a.dim(2) != head.input_width()) {
    throw ConfigError("head_forward: pair width " + std::to_string(2 * e_a.dim(2)) +
                      " does not match head input " + std::to_string(head.input_width()));
  }
  auto x = nc::concat_lastdim({e_a, e_b});
  x = nc::relu(head.layer1(x));
  x = nc::relu(head.layer2(x));
  x = head.layer3(x);
  HeadPrediction out;
  if (!head.classification) {
    out.offsets = x;
    return out;
  }
  const std::size_t c = head.classes_per_axis();
  out.probs_u = nc::softmax_lastdim(nc::slice(x, 2, 0, c));
  out.probs_v = nc::softmax_lastdim(nc::slice(x, 2, c, 2 * c));
  return out;
}

}  // namespace drloc::loc
