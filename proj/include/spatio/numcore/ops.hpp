#pragma once

// Differentiable tensor operations. Every op records itself on the active
// tape when one of its inputs requires a gradient; otherwise it is a plain
// computation.

#include <cstddef>
#include <optional>
#include <vector>

#include "spatio/numcore/tensor.hpp"

namespace spatio::numcore {

/// Batched matrix product over the last two axes. Leading batch axes must
/// agree, or one operand must be a plain matrix that is broadcast.
Tensor matmul(const Tensor& a, const Tensor& b);

/// Elementwise sum. `b` may have the shape of a suffix of `a`'s axes (or vice
/// versa), in which case it is broadcast over the leading axes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
/// Elementwise product with the same broadcasting rule as add().
Tensor mul(const Tensor& a, const Tensor& b);
/// Elementwise maximum of equal-shaped tensors; ties route the gradient to `a`.
Tensor maximum(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

Tensor relu(const Tensor& t);
Tensor abs(const Tensor& t);
Tensor square(const Tensor& t);

/// Softmax along the last axis, stabilized by subtracting the row maximum.
/// Throws NumericError on non-finite input.
Tensor softmax_rows(const Tensor& m);

/// Normalizes over the last axis (variance epsilon 1e-5), then applies the
/// learnable per-feature scale and shift.
Tensor layer_norm(const Tensor& t, const Tensor& gamma, const Tensor& beta,
                  double epsilon = 1e-5);

/// t · W (+ b) along the last axis.
Tensor linear(const Tensor& t, const Tensor& weight,
              const std::optional<Tensor>& bias = std::nullopt);

Tensor concat_last(const Tensor& a, const Tensor& b);
Tensor slice_last(const Tensor& t, std::size_t start, std::size_t length);
Tensor transpose_last2(const Tensor& t);
Tensor reshape(const Tensor& t, Shape shape);
Tensor permute(const Tensor& t, const std::vector<std::size_t>& axes);

Tensor sum(const Tensor& t);
Tensor mean(const Tensor& t);
/// Mean over one axis; the axis is removed from the result.
Tensor mean_axis(const Tensor& t, std::size_t axis);

}  // namespace spatio::numcore
