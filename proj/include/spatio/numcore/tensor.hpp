#pragma once

// Dense row-major tensors with a reverse-mode tape.
//
// A Tensor is a cheap handle onto shared storage. Values are fixed once an op
// has produced them; only leaf parameters are mutated, and only by optimizers
// and finite-difference probes through mutable_values(). Gradients are
// recorded on the Tape installed for the current thread by a TapeScope, so
// independent tapes can run on different threads.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace spatio::numcore {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

struct TensorImpl {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until a gradient reaches this tensor
  bool requires_grad = false;

  std::vector<double>& grad_buffer() {
    if (grad.empty()) grad.assign(values.size(), 0.0);
    return grad;
  }
};

using ImplPtr = std::shared_ptr<TensorImpl>;

}  // namespace detail

class Tensor {
 public:
  /// Scalar zero.
  Tensor();
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor identity(std::size_t n);
  /// Builds a rank-2 tensor from nested rows; all rows must share a length.
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t size() const { return impl_->values.size(); }
  std::size_t dim(std::size_t axis) const;

  std::span<const double> values() const { return impl_->values; }
  std::vector<double> to_vector() const { return impl_->values; }
  double item() const;
  double operator[](std::size_t flat) const { return impl_->values[flat]; }
  double at(std::size_t i, std::size_t j) const;
  double at(std::size_t i, std::size_t j, std::size_t k) const;

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool flag) { impl_->requires_grad = flag; }
  bool has_grad() const { return !impl_->grad.empty(); }
  /// Gradient buffer; all zeros when nothing has flowed into this tensor.
  std::vector<double> grad() const;
  void zero_grad() { impl_->grad.clear(); }

  /// In-place access for leaf tensors (optimizer steps, finite differences).
  std::span<double> mutable_values() { return impl_->values; }

  /// Deep copy with fresh storage and no gradient.
  Tensor clone() const;

  const detail::ImplPtr& impl() const { return impl_; }

 private:
  explicit Tensor(detail::ImplPtr impl) : impl_(std::move(impl)) {}
  friend Tensor make_result(Shape, std::vector<double>);

  detail::ImplPtr impl_;
};

/// Ordered record of differentiable ops; nodes are appended in execution
/// order, so the vector is already topologically sorted.
class Tape {
 public:
  using BackwardFn = std::function<void(std::span<const double> out_grad)>;

  struct Node {
    std::vector<detail::ImplPtr> inputs;
    detail::ImplPtr output;
    BackwardFn backward;
  };

  void record(Node node) { nodes_.push_back(std::move(node)); }
  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  /// Seeds d(loss)/d(loss) = 1 and accumulates gradients into every tensor
  /// reachable backwards from the loss. Throws ShapeError for non-scalars.
  void backward(const Tensor& loss);

 private:
  std::vector<Node> nodes_;
};

/// Installs a tape as the recording target for the current thread.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

Tape* active_tape();

/// Wraps freshly computed values as an op result (no gradient yet).
Tensor make_result(Shape shape, std::vector<double> values);

/// Records `output` as a function of `inputs` when a tape is active and any
/// input requires a gradient. The backward function receives d(loss)/d(output)
/// and must accumulate into the inputs' grad_buffer().
void record_op(Tensor& output, std::initializer_list<const Tensor*> inputs,
               Tape::BackwardFn backward);

}  // namespace spatio::numcore
