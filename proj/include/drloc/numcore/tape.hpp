#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <vector>

#include "drloc/numcore/tensor.hpp"

namespace drloc::nc {

/// Ordered record of differentiable operations. One tape per thread; every
/// entry's inputs were created before it, so reverse iteration is a valid
/// topological order.
class Tape {
 public:
  using BackwardFn = std::function<void(std::span<const double> grad_out)>;

  struct Entry {
    std::shared_ptr<TensorImpl> output;
    std::vector<std::shared_ptr<TensorImpl>> inputs;
    BackwardFn backward;
    const char* op;
  };

  /// The calling thread's tape.
  static Tape& current();

  void record(const char* op, const Tensor& output, std::vector<std::shared_ptr<TensorImpl>> inputs,
              BackwardFn fn);

  /// Populates grad for every requires_grad tensor reachable from root.
  /// Rejected when root is not a 0-d tensor recorded on this tape, or when
  /// the tape has already been consumed since the last reset().
  void backward(const Tensor& root);

  /// Drops all entries and closures; allows a new backward pass.
  void reset();

  std::size_t size() const { return entries_.size(); }
  bool consumed() const { return consumed_; }

 private:
  std::vector<Entry> entries_;
  std::uint64_t generation_ = 1;
  bool consumed_ = false;
};

inline void backward(const Tensor& root) { Tape::current().backward(root); }

/// Disables recording on the current thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

}  // namespace drloc::nc
