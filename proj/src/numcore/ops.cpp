#include "drloc/numcore/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "drloc/numcore/errors.hpp"
#include "drloc/numcore/tape.hpp"

namespace drloc::nc {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using Map = Eigen::Map<RowMatrix>;
using Impl = std::shared_ptr<TensorImpl>;

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw ConfigError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " +
                    shape_str(b));
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const std::string& why) {
  throw ConfigError(std::string(op) + ": invalid shape " + shape_str(a) + " (" + why + ")");
}

bool tracks(const Tensor& t) { return t.requires_grad(); }

// Records `out` on the tape when any input needs a gradient and recording is
// enabled; otherwise returns it untracked.
Tensor finish(const char* op, Tensor out, std::initializer_list<Tensor> inputs,
              Tape::BackwardFn fn) {
  if (!grad_enabled()) return out;
  bool any = false;
  std::vector<Impl> impls;
  impls.reserve(inputs.size());
  for (const auto& in : inputs) {
    any = any || tracks(in);
    impls.push_back(in.impl());
  }
  if (!any) return out;
  Tape::current().record(op, out, std::move(impls), std::move(fn));
  return out;
}

// Gradient buffer of `t` if it participates in differentiation, else null.
std::vector<double>* grad_of(const Impl& t) {
  return t->requires_grad ? &t->grad_buffer() : nullptr;
}

bool is_scalar(const Tensor& t) { return t.rank() == 0; }

Shape leading(const Shape& s, std::size_t drop) {
  return Shape(s.begin(), s.end() - static_cast<std::ptrdiff_t>(drop));
}

// Elementwise binary op with optional 0-d operand on either side.
template <typename Fwd, typename DA, typename DB>
Tensor binary(const char* op, const Tensor& a, const Tensor& b, Fwd fwd, DA da, DB db) {
  const bool sa = is_scalar(a) && !is_scalar(b);
  const bool sb = is_scalar(b) && !is_scalar(a);
  if (!sa && !sb && a.shape() != b.shape()) shape_error(op, a.shape(), b.shape());
  const Shape& shape = sa ? b.shape() : a.shape();
  const std::size_t n = shape_numel(shape);
  std::vector<double> out(n);
  const auto ad = a.data();
  const auto bd = b.data();
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(ad[sa ? 0 : i], bd[sb ? 0 : i]);
  Tensor res = make_tensor(shape, std::move(out));
  auto ai = a.impl();
  auto bi = b.impl();
  return finish(op, res, {a, b}, [ai, bi, sa, sb, n, da, db](std::span<const double> g) {
    auto* ga = grad_of(ai);
    auto* gb = grad_of(bi);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = ai->data[sa ? 0 : i];
      const double y = bi->data[sb ? 0 : i];
      if (ga) (*ga)[sa ? 0 : i] += g[i] * da(x, y);
      if (gb) (*gb)[sb ? 0 : i] += g[i] * db(x, y);
    }
  });
}

template <typename Fwd, typename Deriv>
Tensor unary(const char* op, const Tensor& x, Fwd fwd, Deriv deriv) {
  const auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) out[i] = fwd(xd[i]);
  Tensor res = make_tensor(x.shape(), std::move(out));
  auto xi = x.impl();
  return finish(op, res, {x}, [xi, deriv](std::span<const double> g) {
    auto& gx = xi->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * deriv(xi->data[i]);
  });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() >= 2 && b.rank() == 2) {
    const std::size_t k = a.shape().back();
    if (k != b.dim(0)) shape_error("matmul", a.shape(), b.shape());
    const std::size_t rows = a.numel() / k;
    const std::size_t cols = b.dim(1);
    Shape shape = leading(a.shape(), 1);
    shape.push_back(cols);
    std::vector<double> out(rows * cols);
    Map(out.data(), rows, cols).noalias() =
        ConstMap(a.data().data(), rows, k) * ConstMap(b.data().data(), k, cols);
    Tensor res = make_tensor(std::move(shape), std::move(out));
    auto ai = a.impl();
    auto bi = b.impl();
    return finish("matmul", res, {a, b}, [ai, bi, rows, k, cols](std::span<const double> g) {
      ConstMap gm(g.data(), rows, cols);
      if (auto* ga = grad_of(ai)) {
        Map(ga->data(), rows, k).noalias() += gm * ConstMap(bi->data.data(), k, cols).transpose();
      }
      if (auto* gb = grad_of(bi)) {
        Map(gb->data(), k, cols).noalias() += ConstMap(ai->data.data(), rows, k).transpose() * gm;
      }
    });
  }
  if (a.rank() == 3 && b.rank() == 3) {
    const std::size_t batch = a.dim(0);
    const std::size_t m = a.dim(1);
    const std::size_t k = a.dim(2);
    const std::size_t n = b.dim(2);
    if (b.dim(0) != batch || b.dim(1) != k) shape_error("matmul", a.shape(), b.shape());
    std::vector<double> out(batch * m * n);
    for (std::size_t i = 0; i < batch; ++i) {
      Map(out.data() + i * m * n, m, n).noalias() =
          ConstMap(a.data().data() + i * m * k, m, k) * ConstMap(b.data().data() + i * k * n, k, n);
    }
    Tensor res = make_tensor({batch, m, n}, std::move(out));
    auto ai = a.impl();
    auto bi = b.impl();
    return finish("matmul", res, {a, b}, [ai, bi, batch, m, k, n](std::span<const double> g) {
      auto* ga = grad_of(ai);
      auto* gb = grad_of(bi);
      for (std::size_t i = 0; i < batch; ++i) {
        ConstMap gm(g.data() + i * m * n, m, n);
        if (ga) {
          Map(ga->data() + i * m * k, m, k).noalias() +=
              gm * ConstMap(bi->data.data() + i * k * n, k, n).transpose();
        }
        if (gb) {
          Map(gb->data() + i * k * n, k, n).noalias() +=
              ConstMap(ai->data.data() + i * m * k, m, k).transpose() * gm;
        }
      }
    });
  }
  shape_error("matmul", a.shape(), b.shape());
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; }, [](double x, double y) { return -x / (y * y); });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(
      "scale", x, [factor](double v) { return v * factor; }, [factor](double) { return factor; });
}

Tensor add_rowwise(const Tensor& x, const Tensor& bias) {
  if (x.rank() < 1 || bias.rank() != 1 || x.shape().back() != bias.dim(0)) {
    shape_error("add_rowwise", x.shape(), bias.shape());
  }
  const std::size_t cols = bias.dim(0);
  const std::size_t rows = x.numel() / cols;
  std::vector<double> out(x.data().begin(), x.data().end());
  const auto bd = bias.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] += bd[c];
  }
  Tensor res = make_tensor(x.shape(), std::move(out));
  auto xi = x.impl();
  auto bi = bias.impl();
  return finish("add_rowwise", res, {x, bias}, [xi, bi, rows, cols](std::span<const double> g) {
    if (auto* gx = grad_of(xi)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
    }
    if (auto* gb = grad_of(bi)) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) (*gb)[c] += g[r * cols + c];
      }
    }
  });
}

Tensor relu(const Tensor& x) {
  return unary(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor abs(const Tensor& x) {
  return unary(
      "abs", x, [](double v) { return std::fabs(v); },
      [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor log(const Tensor& x) {
  return unary(
      "log", x, [](double v) { return std::log(v); }, [](double v) { return 1.0 / v; });
}

Tensor clamp_min(const Tensor& x, double floor) {
  return unary(
      "clamp_min", x, [floor](double v) { return v < floor ? floor : v; },
      [floor](double v) { return v < floor ? 0.0 : 1.0; });
}

Tensor softmax_lastdim(const Tensor& x) {
  if (x.rank() < 1) shape_error("softmax_lastdim", x.shape(), "needs rank >= 1");
  const std::size_t cols = x.shape().back();
  const std::size_t rows = x.numel() / cols;
  const auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xd.data() + r * cols;
    double* o = out.data() + r * cols;
    const double mx = *std::max_element(in, in + cols);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) total += (o[c] = std::exp(in[c] - mx));
    for (std::size_t c = 0; c < cols; ++c) o[c] /= total;
  }
  Tensor res = make_tensor(x.shape(), std::move(out));
  auto xi = x.impl();
  auto yi = res.impl();
  return finish("softmax_lastdim", res, {x}, [xi, yi, rows, cols](std::span<const double> g) {
    auto& gx = xi->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = yi->data.data() + r * cols;
      const double* gr = g.data() + r * cols;
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += gr[c] * y[c];
      for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += y[c] * (gr[c] - dot);
    }
  });
}

Tensor log_softmax_lastdim(const Tensor& x) {
  if (x.rank() < 1) shape_error("log_softmax_lastdim", x.shape(), "needs rank >= 1");
  const std::size_t cols = x.shape().back();
  const std::size_t rows = x.numel() / cols;
  const auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xd.data() + r * cols;
    const double mx = *std::max_element(in, in + cols);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) total += std::exp(in[c] - mx);
    const double lse = mx + std::log(total);
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = in[c] - lse;
  }
  Tensor res = make_tensor(x.shape(), std::move(out));
  auto xi = x.impl();
  auto yi = res.impl();
  return finish("log_softmax_lastdim", res, {x}, [xi, yi, rows, cols](std::span<const double> g) {
    auto& gx = xi->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = yi->data.data() + r * cols;
      const double* gr = g.data() + r * cols;
      double total = 0.0;
      for (std::size_t c = 0; c < cols; ++c) total += gr[c];
      for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += gr[c] - std::exp(y[c]) * total;
    }
  });
}

Tensor layernorm_lastdim(const Tensor& x, const Tensor& gain, const Tensor& shift, double eps) {
  if (x.rank() < 1 || gain.rank() != 1 || shift.rank() != 1 || gain.dim(0) != x.shape().back() ||
      shift.dim(0) != x.shape().back()) {
    shape_error("layernorm_lastdim", x.shape(), gain.shape());
  }
  const std::size_t cols = x.shape().back();
  const std::size_t rows = x.numel() / cols;
  const auto xd = x.data();
  const auto gd = gain.data();
  const auto sd = shift.data();
  std::vector<double> out(xd.size());
  std::vector<double> xhat(xd.size());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xd.data() + r * cols;
    double mu = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mu += in[c];
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) var += (in[c] - mu) * (in[c] - mu);
    var /= static_cast<double>(cols);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < cols; ++c) {
      const double h = (in[c] - mu) * inv_std[r];
      xhat[r * cols + c] = h;
      out[r * cols + c] = h * gd[c] + sd[c];
    }
  }
  Tensor res = make_tensor(x.shape(), std::move(out));
  auto xi = x.impl();
  auto gi = gain.impl();
  auto si = shift.impl();
  return finish("layernorm_lastdim", res, {x, gain, shift},
                [xi, gi, si, rows, cols, xhat = std::move(xhat),
                 inv_std = std::move(inv_std)](std::span<const double> g) {
                  auto* gx = grad_of(xi);
                  auto* gg = grad_of(gi);
                  auto* gs = grad_of(si);
                  const double n = static_cast<double>(cols);
                  std::vector<double> dxhat(cols);
                  for (std::size_t r = 0; r < rows; ++r) {
                    const double* gr = g.data() + r * cols;
                    const double* h = xhat.data() + r * cols;
                    double sum_d = 0.0;
                    double sum_dh = 0.0;
                    for (std::size_t c = 0; c < cols; ++c) {
                      if (gg) (*gg)[c] += gr[c] * h[c];
                      if (gs) (*gs)[c] += gr[c];
                      dxhat[c] = gr[c] * gi->data[c];
                      sum_d += dxhat[c];
                      sum_dh += dxhat[c] * h[c];
                    }
                    if (!gx) continue;
                    for (std::size_t c = 0; c < cols; ++c) {
                      (*gx)[r * cols + c] += inv_std[r] / n * (n * dxhat[c] - sum_d - h[c] * sum_dh);
                    }
                  }
                });
}

Tensor sum(const Tensor& x) {
  const auto xd = x.data();
  const double total = std::accumulate(xd.begin(), xd.end(), 0.0);
  Tensor res = make_tensor({}, {total});
  auto xi = x.impl();
  return finish("sum", res, {x}, [xi](std::span<const double> g) {
    auto& gx = xi->grad_buffer();
    for (auto& v : gx) v += g[0];
  });
}

Tensor mean(const Tensor& x) {
  const auto xd = x.data();
  const double n = static_cast<double>(xd.size());
  const double total = std::accumulate(xd.begin(), xd.end(), 0.0);
  Tensor res = make_tensor({}, {total / n});
  auto xi = x.impl();
  return finish("mean", res, {x}, [xi, n](std::span<const double> g) {
    auto& gx = xi->grad_buffer();
    for (auto& v : gx) v += g[0] / n;
  });
}

Tensor mean_axis(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) shape_error("mean_axis", x.shape(), "axis out of range");
  const auto& s = x.shape();
  std::size_t outer = 1;
  std::size_t inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t len = s[axis];
  Shape shape;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i != axis) shape.push_back(s[i]);
  }
  const auto xd = x.data();
  std::vector<double> out(outer * inner, 0.0);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t l = 0; l < len; ++l) {
      for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] += xd[(o * len + l) * inner + i];
    }
  }
  for (auto& v : out) v /= static_cast<double>(len);
  Tensor res = make_tensor(std::move(shape), std::move(out));
  auto xi = x.impl();
  return finish("mean_axis", res, {x}, [xi, outer, inner, len](std::span<const double> g) {
    auto& gx = xi->grad_buffer();
    const double w = 1.0 / static_cast<double>(len);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t l = 0; l < len; ++l) {
        for (std::size_t i = 0; i < inner; ++i) gx[(o * len + l) * inner + i] += g[o * inner + i] * w;
      }
    }
  });
}

Tensor concat_lastdim(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ConfigError("concat_lastdim: no inputs");
  const Shape lead = leading(parts[0].shape(), 1);
  std::size_t total = 0;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    if (p.rank() != parts[0].rank() || leading(p.shape(), 1) != lead) {
      shape_error("concat_lastdim", parts[0].shape(), p.shape());
    }
    widths.push_back(p.shape().back());
    total += p.shape().back();
  }
  const std::size_t rows = shape_numel(lead);
  std::vector<double> out(rows * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto pd = parts[k].data();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(pd.data() + r * widths[k], widths[k], out.data() + r * total + offset);
    }
    offset += widths[k];
  }
  Shape shape = lead;
  shape.push_back(total);
  Tensor res = make_tensor(std::move(shape), std::move(out));
  if (!grad_enabled()) return res;
  bool any = false;
  std::vector<Impl> impls;
  for (const auto& p : parts) {
    any = any || tracks(p);
    impls.push_back(p.impl());
  }
  if (!any) return res;
  Tape::current().record("concat_lastdim", res, impls,
                         [impls, widths, rows, total](std::span<const double> g) {
                           std::size_t off = 0;
                           for (std::size_t k = 0; k < impls.size(); ++k) {
                             if (auto* gp = grad_of(impls[k])) {
                               for (std::size_t r = 0; r < rows; ++r) {
                                 for (std::size_t c = 0; c < widths[k]; ++c) {
                                   (*gp)[r * widths[k] + c] += g[r * total + off + c];
                                 }
                               }
                             }
                             off += widths[k];
                           }
                         });
  return res;
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
  if (axis >= x.rank() || begin >= end || end > x.dim(axis)) {
    shape_error("slice", x.shape(),
                "axis " + std::to_string(axis) + " range [" + std::to_string(begin) + ", " +
                    std::to_string(end) + ")");
  }
  const auto& s = x.shape();
  std::size_t outer = 1;
  std::size_t inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t len = s[axis];
  const std::size_t width = end - begin;
  Shape shape = s;
  shape[axis] = width;
  const auto xd = x.data();
  std::vector<double> out(outer * width * inner);
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(xd.data() + (o * len + begin) * inner, width * inner, out.data() + o * width * inner);
  }
  Tensor res = make_tensor(std::move(shape), std::move(out));
  auto xi = x.impl();
  return finish("slice", res, {x}, [xi, outer, inner, len, begin, width](std::span<const double> g) {
    auto& gx = xi->grad_buffer();
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t i = 0; i < width * inner; ++i) {
        gx[(o * len + begin) * inner + i] += g[o * width * inner + i];
      }
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) shape_error("reshape", x.shape(), shape);
  Tensor res = make_tensor(std::move(shape), std::vector<double>(x.data().begin(), x.data().end()));
  auto xi = x.impl();
  return finish("reshape", res, {x}, [xi](std::span<const double> g) {
    auto& gx = xi->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

Tensor permute(const Tensor& x, const std::vector<std::size_t>& order) {
  const std::size_t r = x.rank();
  std::vector<bool> seen(r, false);
  if (order.size() != r) shape_error("permute", x.shape(), "order length mismatch");
  for (auto o : order) {
    if (o >= r || seen[o]) shape_error("permute", x.shape(), "order is not a permutation");
    seen[o] = true;
  }
  const auto& s = x.shape();
  std::vector<std::size_t> in_strides(r, 1);
  for (std::size_t i = r; i-- > 1;) in_strides[i - 1] = in_strides[i] * s[i];
  Shape shape(r);
  std::vector<std::size_t> strides(r);  // input stride for each output axis
  for (std::size_t i = 0; i < r; ++i) {
    shape[i] = s[order[i]];
    strides[i] = in_strides[order[i]];
  }
  // source index of every output element
  const std::size_t n = x.numel();
  std::vector<std::size_t> src(n);
  std::vector<std::size_t> counter(r, 0);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < n; ++i) {
    src[i] = offset;
    for (std::size_t ax = r; ax-- > 0;) {
      ++counter[ax];
      offset += strides[ax];
      if (counter[ax] < shape[ax]) break;
      offset -= strides[ax] * shape[ax];
      counter[ax] = 0;
    }
  }
  const auto xd = x.data();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = xd[src[i]];
  Tensor res = make_tensor(std::move(shape), std::move(out));
  auto xi = x.impl();
  return finish("permute", res, {x}, [xi, src = std::move(src)](std::span<const double> g) {
    auto& gx = xi->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) gx[src[i]] += g[i];
  });
}

Tensor transpose(const Tensor& x, std::size_t axis_a, std::size_t axis_b) {
  if (axis_a >= x.rank() || axis_b >= x.rank()) {
    shape_error("transpose", x.shape(), "axis out of range");
  }
  std::vector<std::size_t> order(x.rank());
  std::iota(order.begin(), order.end(), 0);
  std::swap(order[axis_a], order[axis_b]);
  return permute(x, order);
}

Tensor avgpool2x2(const Tensor& x) {
  if (x.rank() != 4 || x.dim(2) % 2 != 0 || x.dim(3) % 2 != 0) {
    shape_error("avgpool2x2", x.shape(), "expected [n, c, h, w] with even h and w");
  }
  const std::size_t planes = x.dim(0) * x.dim(1);
  const std::size_t h = x.dim(2);
  const std::size_t w = x.dim(3);
  const std::size_t oh = h / 2;
  const std::size_t ow = w / 2;
  const auto xd = x.data();
  std::vector<double> out(planes * oh * ow);
  for (std::size_t p = 0; p < planes; ++p) {
    const double* in = xd.data() + p * h * w;
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        const double s = in[(2 * i) * w + 2 * j] + in[(2 * i) * w + 2 * j + 1] +
                         in[(2 * i + 1) * w + 2 * j] + in[(2 * i + 1) * w + 2 * j + 1];
        out[(p * oh + i) * ow + j] = 0.25 * s;
      }
    }
  }
  Tensor res = make_tensor({x.dim(0), x.dim(1), oh, ow}, std::move(out));
  auto xi = x.impl();
  return finish("avgpool2x2", res, {x}, [xi, planes, w, oh, ow](std::span<const double> g) {
    auto& gx = xi->grad_buffer();
    const std::size_t h = 2 * oh;
    for (std::size_t p = 0; p < planes; ++p) {
      for (std::size_t i = 0; i < oh; ++i) {
        for (std::size_t j = 0; j < ow; ++j) {
          const double q = 0.25 * g[(p * oh + i) * ow + j];
          double* base = gx.data() + p * h * w;
          base[(2 * i) * w + 2 * j] += q;
          base[(2 * i) * w + 2 * j + 1] += q;
          base[(2 * i + 1) * w + 2 * j] += q;
          base[(2 * i + 1) * w + 2 * j + 1] += q;
        }
      }
    }
  });
}

Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& rows) {
  if (x.rank() != 2) shape_error("gather_rows", x.shape(), "expected [rows, cols]");
  if (rows.empty()) shape_error("gather_rows", x.shape(), "empty index list");
  const std::size_t n = x.dim(0);
  const std::size_t cols = x.dim(1);
  const auto xd = x.data();
  std::vector<double> out(rows.size() * cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= n) {
      throw UsageError("gather_rows: row " + std::to_string(rows[i]) + " out of range for " +
                       shape_str(x.shape()));
    }
    std::copy_n(xd.data() + rows[i] * cols, cols, out.data() + i * cols);
  }
  Tensor res = make_tensor({rows.size(), cols}, std::move(out));
  auto xi = x.impl();
  return finish("gather_rows", res, {x}, [xi, rows, cols](std::span<const double> g) {
    auto& gx = xi->grad_buffer();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t c = 0; c < cols; ++c) gx[rows[i] * cols + c] += g[i * cols + c];
    }
  });
}

}  // namespace drloc::nc
