#include "spatio/numcore/tensor.hpp"

#include <numeric>
#include <sstream>

namespace spatio::numcore {

namespace {
thread_local Tape* g_active_tape = nullptr;
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

Tensor::Tensor() : impl_(std::make_shared<detail::TensorImpl>()) {
  impl_->values.assign(1, 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : impl_(std::make_shared<detail::TensorImpl>()) {
  for (auto extent : shape) {
    if (extent == 0) throw ShapeError("tensor extents must be positive, got " + shape_string(shape));
  }
  if (shape_size(shape) != values.size()) {
    throw ShapeError("shape " + shape_string(shape) + " does not hold " +
                     std::to_string(values.size()) + " values");
  }
  impl_->shape = std::move(shape);
  impl_->values = std::move(values);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{}, {value}, requires_grad);
}

Tensor Tensor::identity(std::size_t n) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  return Tensor({n, n}, std::move(v));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> v;
  v.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged rows in Tensor::matrix");
    v.insert(v.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(v));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_string(shape()));
  }
  return impl_->shape[axis];
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on non-scalar " + shape_string(shape()));
  return impl_->values[0];
}

double Tensor::at(std::size_t i, std::size_t j) const {
  return impl_->values[i * impl_->shape.back() + j];
}

double Tensor::at(std::size_t i, std::size_t j, std::size_t k) const {
  const auto& s = impl_->shape;
  return impl_->values[(i * s[1] + j) * s[2] + k];
}

std::vector<double> Tensor::grad() const {
  if (impl_->grad.empty()) return std::vector<double>(size(), 0.0);
  return impl_->grad;
}

Tensor Tensor::clone() const {
  return Tensor(impl_->shape, impl_->values, impl_->requires_grad);
}

Tensor make_result(Shape shape, std::vector<double> values) {
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->values = std::move(values);
  return Tensor(std::move(impl));
}

void record_op(Tensor& output, std::initializer_list<const Tensor*> inputs,
               Tape::BackwardFn backward) {
  Tape* tape = g_active_tape;
  if (!tape) return;
  bool any = false;
  for (const Tensor* in : inputs) any = any || in->requires_grad();
  if (!any) return;
  output.set_requires_grad(true);
  Tape::Node node;
  for (const Tensor* in : inputs) node.inputs.push_back(in->impl());
  node.output = output.impl();
  node.backward = std::move(backward);
  tape->record(std::move(node));
}

void Tape::backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw ShapeError("backward needs a scalar loss, got " + shape_string(loss.shape()));
  }
  loss.impl()->grad_buffer()[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    const auto& out = it->output;
    if (out->grad.empty()) continue;  // not upstream of the loss
    it->backward(out->grad);
  }
}

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }

TapeScope::~TapeScope() { g_active_tape = previous_; }

Tape* active_tape() { return g_active_tape; }

}  // namespace spatio::numcore
