#include "drloc/checks/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "drloc/numcore/errors.hpp"
#include "drloc/numcore/rng.hpp"
#include "drloc/numcore/tape.hpp"

namespace drloc::checks {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-6});
  return std::fabs(analytic - numeric) / denom;
}

GradCheckReport check_gradients(const std::string& name, const std::function<nc::Tensor()>& f,
                                const std::vector<nc::Tensor>& inputs, std::size_t max_per_input,
                                std::uint64_t sample_seed, double step, double tolerance) {
  GradCheckReport report;
  report.name = name;

  std::vector<bool> previous;
  for (auto t : inputs) {
    previous.push_back(t.requires_grad());
    t.set_requires_grad(true);
    t.zero_grad();
  }
  auto& tape = nc::Tape::current();
  tape.reset();
  {
    auto out = f();
    if (out.rank() != 0) throw UsageError("check_gradients: f must return a 0-d tensor");
    nc::backward(out);
  }
  tape.reset();
  std::vector<std::vector<double>> analytic;
  for (const auto& t : inputs) {
    const auto g = t.grad();
    analytic.emplace_back(g.begin(), g.end());
    if (analytic.back().empty()) analytic.back().assign(t.numel(), 0.0);
  }

  auto eval = [&] {
    nc::NoGradGuard guard;
    return f().item();
  };
  auto rng = nc::Rng(sample_seed);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    nc::Tensor t = inputs[i];
    const std::size_t n = t.numel();
    std::set<std::size_t> probe;
    if (max_per_input == 0 || n <= max_per_input) {
      for (std::size_t j = 0; j < n; ++j) probe.insert(j);
    } else {
      probe.insert(0);
      probe.insert(n - 1);
      while (probe.size() < max_per_input) probe.insert(rng.uniform_int(n));
    }
    auto values = t.mutable_data();
    for (std::size_t j : probe) {
      const double saved = values[j];
      values[j] = saved + step;
      const double up = eval();
      values[j] = saved - step;
      const double down = eval();
      values[j] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double err = relative_error(analytic[i][j], numeric);
      ++report.checked;
      if (err > report.max_rel_error || !std::isfinite(err)) {
        report.max_rel_error = std::isfinite(err) ? err : INFINITY;
        char buf[160];
        std::snprintf(buf, sizeof(buf), "input %zu[%zu]: analytic %.10g vs numeric %.10g", i, j,
                      analytic[i][j], numeric);
        report.worst = buf;
      }
    }
  }
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    nc::Tensor t = inputs[i];
    t.zero_grad();
    t.set_requires_grad(previous[i]);
  }
  report.passed = report.max_rel_error <= tolerance;
  return report;
}

}  // namespace drloc::checks
