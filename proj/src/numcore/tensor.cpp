#include "drloc/numcore/tensor.hpp"

#include <sstream>

#include "drloc/numcore/errors.hpp"

namespace drloc::nc {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor make_tensor(Shape shape, std::vector<double> values) {
  for (auto d : shape) {
    if (d == 0) throw ConfigError("tensor: zero-sized dimension in shape " + shape_str(shape));
  }
  if (shape_numel(shape) != values.size()) {
    throw ConfigError("tensor: shape " + shape_str(shape) + " holds " +
                      std::to_string(shape_numel(shape)) + " elements, got " +
                      std::to_string(values.size()));
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  return Tensor(std::move(impl));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = shape_numel(shape);
  Tensor t = make_tensor(std::move(shape), std::vector<double>(n, value));
  t.set_requires_grad(requires_grad);
  return t;
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  Tensor t = make_tensor(std::move(shape), std::move(values));
  t.set_requires_grad(requires_grad);
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({}, {value}, requires_grad);
}

double Tensor::item() const {
  if (numel() != 1) {
    throw UsageError("item: tensor of shape " + shape_str(shape()) + " is not a single value");
  }
  return impl_->data[0];
}

Tensor Tensor::clone() const {
  Tensor t = make_tensor(impl_->shape, impl_->data);
  t.set_requires_grad(impl_->requires_grad);
  return t;
}

Tensor Tensor::detach() const { return make_tensor(impl_->shape, impl_->data); }

}  // namespace drloc::nc
