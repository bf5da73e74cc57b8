#include "drloc/numcore/tape.hpp"

#include <string>

#include "drloc/numcore/errors.hpp"

namespace drloc::nc {
namespace {

thread_local bool t_grad_enabled = true;

}  // namespace

Tape& Tape::current() {
  thread_local Tape tape;
  return tape;
}

void Tape::record(const char* op, const Tensor& output,
                  std::vector<std::shared_ptr<TensorImpl>> inputs, BackwardFn fn) {
  auto& impl = *output.impl();
  impl.requires_grad = true;
  impl.tape_index = static_cast<std::ptrdiff_t>(entries_.size());
  impl.tape_generation = generation_;
  entries_.push_back(Entry{output.impl(), std::move(inputs), std::move(fn), op});
}

void Tape::backward(const Tensor& root) {
  if (!root.defined() || root.rank() != 0) {
    throw UsageError("backward: root must be a 0-d tensor, got shape " +
                     (root.defined() ? shape_str(root.shape()) : std::string("<undefined>")));
  }
  if (consumed_) {
    throw UsageError("backward: tape already consumed; call reset() before another pass");
  }
  const auto& r = *root.impl();
  if (r.tape_index < 0 || r.tape_generation != generation_) {
    throw UsageError("backward: root was not produced on the current tape");
  }
  consumed_ = true;
  root.impl()->grad.assign(1, 1.0);
  for (auto i = r.tape_index; i >= 0; --i) {
    auto& e = entries_[static_cast<std::size_t>(i)];
    if (e.output->grad.empty()) continue;
    e.backward(e.output->grad);
  }
}

void Tape::reset() {
  entries_.clear();
  ++generation_;
  consumed_ = false;
}

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

bool grad_enabled() { return t_grad_enabled; }

}  // namespace drloc::nc
