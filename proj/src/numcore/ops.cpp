#include "spatio/numcore/ops.hpp"

#include <algorithm>
#include <cmath>

namespace spatio::numcore {

namespace {

void accumulate(const detail::ImplPtr& impl, std::span<const double> g) {
  if (!impl->requires_grad) return;
  auto& buf = impl->grad_buffer();
  for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
}

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

Shape leading(const Shape& s, std::size_t keep_trailing) {
  return Shape(s.begin(), s.end() - static_cast<std::ptrdiff_t>(keep_trailing));
}

// Broadcast plan for binary elementwise ops: `big` is iterated flat and
// `small` repeats with period small.size().
struct Broadcast {
  bool a_is_big;
  Shape shape;
};

Broadcast plan_broadcast(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape() || is_suffix(b.shape(), a.shape())) return {true, a.shape()};
  if (is_suffix(a.shape(), b.shape())) return {false, b.shape()};
  throw ShapeError(std::string(op) + ": cannot broadcast " + shape_string(a.shape()) +
                   " with " + shape_string(b.shape()));
}

// Folds a gradient over the broadcast (leading) axes down to `period` values.
std::vector<double> fold(std::span<const double> g, std::size_t period) {
  std::vector<double> out(period, 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) out[i % period] += g[i];
  return out;
}

template <class Fn>
Tensor unary(const Tensor& t, Fn fn) {
  std::vector<double> v(t.size());
  const auto in = t.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = fn(in[i]);
  return make_result(t.shape(), std::move(v));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 2 || b.rank() < 2) {
    throw ShapeError("matmul needs rank >= 2 operands, got " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()));
  }
  const std::size_t m = a.shape()[a.rank() - 2];
  const std::size_t k = a.shape().back();
  const std::size_t kb = b.shape()[b.rank() - 2];
  const std::size_t n = b.shape().back();
  const Shape batch_a = leading(a.shape(), 2);
  const Shape batch_b = leading(b.shape(), 2);
  const std::size_t na = shape_size(batch_a);
  const std::size_t nb = shape_size(batch_b);
  if (k != kb || !(batch_a == batch_b || na == 1 || nb == 1)) {
    throw ShapeError("matmul shape mismatch: " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()));
  }
  const std::size_t batches = std::max(na, nb);
  const bool take_a = na != nb ? na > nb : batch_a.size() >= batch_b.size();
  Shape out_shape = take_a ? batch_a : batch_b;
  out_shape.push_back(m);
  out_shape.push_back(n);

  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> c(batches * m * n, 0.0);
  for (std::size_t s = 0; s < batches; ++s) {
    const double* pa = av.data() + (na == 1 ? 0 : s) * m * k;
    const double* pb = bv.data() + (nb == 1 ? 0 : s) * k * n;
    double* pc = c.data() + s * m * n;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = pa[i * k + p];
        if (aip == 0.0) continue;
        const double* brow = pb + p * n;
        double* crow = pc + i * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
      }
    }
  }
  Tensor out = make_result(std::move(out_shape), std::move(c));
  auto ai = a.impl();
  auto bi = b.impl();
  record_op(out, {&a, &b}, [ai, bi, m, k, n, na, nb, batches](std::span<const double> g) {
    if (ai->requires_grad) {
      auto& ga = ai->grad_buffer();
      for (std::size_t s = 0; s < batches; ++s) {
        const double* pg = g.data() + s * m * n;
        const double* pb = bi->values.data() + (nb == 1 ? 0 : s) * k * n;
        double* pga = ga.data() + (na == 1 ? 0 : s) * m * k;
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += pg[i * n + j] * pb[p * n + j];
            pga[i * k + p] += acc;
          }
      }
    }
    if (bi->requires_grad) {
      auto& gb = bi->grad_buffer();
      for (std::size_t s = 0; s < batches; ++s) {
        const double* pg = g.data() + s * m * n;
        const double* pa = ai->values.data() + (na == 1 ? 0 : s) * m * k;
        double* pgb = gb.data() + (nb == 1 ? 0 : s) * k * n;
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            const double aip = pa[i * k + p];
            if (aip == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) pgb[p * n + j] += aip * pg[i * n + j];
          }
      }
    }
  });
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  const auto plan = plan_broadcast(a, b, "add");
  const Tensor& big = plan.a_is_big ? a : b;
  const Tensor& small = plan.a_is_big ? b : a;
  const auto bv = big.values();
  const auto sv = small.values();
  const std::size_t period = sv.size();
  std::vector<double> v(bv.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = bv[i] + sv[i % period];
  Tensor out = make_result(plan.shape, std::move(v));
  auto bi = big.impl();
  auto si = small.impl();
  record_op(out, {&a, &b}, [bi, si, period](std::span<const double> g) {
    accumulate(bi, g);
    if (si->requires_grad) accumulate(si, fold(g, period));
  });
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) { return add(a, scale(b, -1.0)); }

Tensor mul(const Tensor& a, const Tensor& b) {
  const auto plan = plan_broadcast(a, b, "mul");
  const Tensor& big = plan.a_is_big ? a : b;
  const Tensor& small = plan.a_is_big ? b : a;
  const auto bv = big.values();
  const auto sv = small.values();
  const std::size_t period = sv.size();
  std::vector<double> v(bv.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = bv[i] * sv[i % period];
  Tensor out = make_result(plan.shape, std::move(v));
  auto bi = big.impl();
  auto si = small.impl();
  record_op(out, {&a, &b}, [bi, si, period](std::span<const double> g) {
    if (bi->requires_grad) {
      auto& gb = bi->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * si->values[i % period];
    }
    if (si->requires_grad) {
      auto& gs = si->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gs[i % period] += g[i] * bi->values[i];
    }
  });
  return out;
}

Tensor maximum(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("maximum shape mismatch: " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> v(av.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::max(av[i], bv[i]);
  Tensor out = make_result(a.shape(), std::move(v));
  auto ai = a.impl();
  auto bi = b.impl();
  record_op(out, {&a, &b}, [ai, bi](std::span<const double> g) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      const bool take_a = ai->values[i] >= bi->values[i];
      const auto& target = take_a ? ai : bi;
      if (target->requires_grad) target->grad_buffer()[i] += g[i];
    }
  });
  return out;
}

Tensor scale(const Tensor& a, double factor) {
  Tensor out = unary(a, [factor](double x) { return x * factor; });
  auto ai = a.impl();
  record_op(out, {&a}, [ai, factor](std::span<const double> g) {
    auto& ga = ai->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
  });
  return out;
}

Tensor relu(const Tensor& t) {
  Tensor out = unary(t, [](double x) { return x > 0.0 ? x : 0.0; });
  auto ti = t.impl();
  record_op(out, {&t}, [ti](std::span<const double> g) {
    auto& gt = ti->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (ti->values[i] > 0.0) gt[i] += g[i];
  });
  return out;
}

Tensor abs(const Tensor& t) {
  Tensor out = unary(t, [](double x) { return std::fabs(x); });
  auto ti = t.impl();
  record_op(out, {&t}, [ti](std::span<const double> g) {
    auto& gt = ti->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = ti->values[i];
      gt[i] += g[i] * (x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0));
    }
  });
  return out;
}

Tensor square(const Tensor& t) {
  Tensor out = unary(t, [](double x) { return x * x; });
  auto ti = t.impl();
  record_op(out, {&t}, [ti](std::span<const double> g) {
    auto& gt = ti->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) gt[i] += 2.0 * ti->values[i] * g[i];
  });
  return out;
}

Tensor softmax_rows(const Tensor& m) {
  if (m.rank() < 1) throw ShapeError("softmax_rows needs rank >= 1");
  const std::size_t c = m.shape().back();
  const std::size_t rows = m.size() / c;
  const auto in = m.values();
  std::vector<double> y(in.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = in.data() + r * c;
    double* out = y.data() + r * c;
    double hi = x[0];
    for (std::size_t j = 0; j < c; ++j) {
      if (!std::isfinite(x[j])) throw NumericError("softmax_rows: non-finite input");
      hi = std::max(hi, x[j]);
    }
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) total += out[j] = std::exp(x[j] - hi);
    for (std::size_t j = 0; j < c; ++j) out[j] /= total;
  }
  Tensor out = make_result(m.shape(), std::move(y));
  auto mi = m.impl();
  auto oi = out.impl();
  record_op(out, {&m}, [mi, oi, c, rows](std::span<const double> g) {
    auto& gm = mi->grad_buffer();
    const auto& yv = oi->values;
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += g[r * c + j] * yv[r * c + j];
      for (std::size_t j = 0; j < c; ++j) gm[r * c + j] += yv[r * c + j] * (g[r * c + j] - dot);
    }
  });
  return out;
}

Tensor layer_norm(const Tensor& t, const Tensor& gamma, const Tensor& beta, double epsilon) {
  const std::size_t d = t.shape().back();
  if (gamma.size() != d || beta.size() != d) {
    throw ShapeError("layer_norm: scale/shift of size " + std::to_string(gamma.size()) + "/" +
                     std::to_string(beta.size()) + " for feature size " + std::to_string(d));
  }
  const std::size_t rows = t.size() / d;
  const auto x = t.values();
  const auto gv = gamma.values();
  const auto bv = beta.values();
  std::vector<double> xhat(x.size());
  std::vector<double> inv_std(rows);
  std::vector<double> y(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += xr[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + epsilon);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[r * d + j] = (xr[j] - mu) * inv_std[r];
      y[r * d + j] = xhat[r * d + j] * gv[j] + bv[j];
    }
  }
  Tensor out = make_result(t.shape(), std::move(y));
  auto ti = t.impl();
  auto gi = gamma.impl();
  auto bi = beta.impl();
  record_op(out, {&t, &gamma, &beta},
            [ti, gi, bi, xhat = std::move(xhat), inv_std = std::move(inv_std), d,
             rows](std::span<const double> g) {
              if (gi->requires_grad) {
                auto& gg = gi->grad_buffer();
                for (std::size_t i = 0; i < g.size(); ++i) gg[i % d] += g[i] * xhat[i];
              }
              if (bi->requires_grad) {
                auto& gb = bi->grad_buffer();
                for (std::size_t i = 0; i < g.size(); ++i) gb[i % d] += g[i];
              }
              if (ti->requires_grad) {
                auto& gt = ti->grad_buffer();
                const double inv_d = 1.0 / static_cast<double>(d);
                for (std::size_t r = 0; r < rows; ++r) {
                  double sum_dxhat = 0.0;
                  double sum_dxhat_xhat = 0.0;
                  for (std::size_t j = 0; j < d; ++j) {
                    const double dxh = g[r * d + j] * gi->values[j];
                    sum_dxhat += dxh;
                    sum_dxhat_xhat += dxh * xhat[r * d + j];
                  }
                  for (std::size_t j = 0; j < d; ++j) {
                    const double dxh = g[r * d + j] * gi->values[j];
                    gt[r * d + j] += inv_std[r] * (dxh - inv_d * sum_dxhat -
                                                   xhat[r * d + j] * inv_d * sum_dxhat_xhat);
                  }
                }
              }
            });
  return out;
}

Tensor linear(const Tensor& t, const Tensor& weight, const std::optional<Tensor>& bias) {
  Tensor out = matmul(t, weight);
  return bias ? add(out, *bias) : out;
}

Tensor concat_last(const Tensor& a, const Tensor& b) {
  if (a.rank() != b.rank() || leading(a.shape(), 1) != leading(b.shape(), 1)) {
    throw ShapeError("concat_last shape mismatch: " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
  const std::size_t ca = a.shape().back();
  const std::size_t cb = b.shape().back();
  const std::size_t rows = a.size() / ca;
  std::vector<double> v(rows * (ca + cb));
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(av.data() + r * ca, ca, v.data() + r * (ca + cb));
    std::copy_n(bv.data() + r * cb, cb, v.data() + r * (ca + cb) + ca);
  }
  Shape shape = a.shape();
  shape.back() = ca + cb;
  Tensor out = make_result(std::move(shape), std::move(v));
  auto ai = a.impl();
  auto bi = b.impl();
  record_op(out, {&a, &b}, [ai, bi, ca, cb, rows](std::span<const double> g) {
    if (ai->requires_grad) {
      auto& ga = ai->grad_buffer();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < ca; ++j) ga[r * ca + j] += g[r * (ca + cb) + j];
    }
    if (bi->requires_grad) {
      auto& gb = bi->grad_buffer();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < cb; ++j) gb[r * cb + j] += g[r * (ca + cb) + ca + j];
    }
  });
  return out;
}

Tensor slice_last(const Tensor& t, std::size_t start, std::size_t length) {
  const std::size_t c = t.shape().back();
  if (length == 0 || start + length > c) {
    throw ShapeError("slice_last [" + std::to_string(start) + ", +" + std::to_string(length) +
                     ") outside " + shape_string(t.shape()));
  }
  const std::size_t rows = t.size() / c;
  std::vector<double> v(rows * length);
  const auto tv = t.values();
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(tv.data() + r * c + start, length, v.data() + r * length);
  Shape shape = t.shape();
  shape.back() = length;
  Tensor out = make_result(std::move(shape), std::move(v));
  auto ti = t.impl();
  record_op(out, {&t}, [ti, c, start, length, rows](std::span<const double> g) {
    auto& gt = ti->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < length; ++j) gt[r * c + start + j] += g[r * length + j];
  });
  return out;
}

Tensor transpose_last2(const Tensor& t) {
  if (t.rank() < 2) throw ShapeError("transpose_last2 needs rank >= 2");
  std::vector<std::size_t> axes(t.rank());
  for (std::size_t i = 0; i < axes.size(); ++i) axes[i] = i;
  std::swap(axes[axes.size() - 1], axes[axes.size() - 2]);
  return permute(t, axes);
}

Tensor reshape(const Tensor& t, Shape shape) {
  if (shape_size(shape) != t.size()) {
    throw ShapeError("reshape " + shape_string(t.shape()) + " -> " + shape_string(shape));
  }
  Tensor out = make_result(std::move(shape), t.to_vector());
  auto ti = t.impl();
  record_op(out, {&t}, [ti](std::span<const double> g) { accumulate(ti, g); });
  return out;
}

Tensor permute(const Tensor& t, const std::vector<std::size_t>& axes) {
  const std::size_t rank = t.rank();
  if (axes.size() != rank) throw ShapeError("permute: axis count does not match rank");
  std::vector<bool> seen(rank, false);
  for (auto ax : axes) {
    if (ax >= rank || seen[ax]) throw ShapeError("permute: invalid axis list");
    seen[ax] = true;
  }
  const Shape& in_shape = t.shape();
  Shape out_shape(rank);
  for (std::size_t i = 0; i < rank; ++i) out_shape[i] = in_shape[axes[i]];
  // Input strides, then the input stride seen by each output axis.
  std::vector<std::size_t> in_stride(rank, 1);
  for (std::size_t i = rank; i-- > 1;) in_stride[i - 1] = in_stride[i] * in_shape[i];
  std::vector<std::size_t> src_stride(rank);
  for (std::size_t i = 0; i < rank; ++i) src_stride[i] = in_stride[axes[i]];

  const std::size_t n = t.size();
  std::vector<std::size_t> map(n);
  std::vector<std::size_t> idx(rank, 0);
  for (std::size_t flat = 0; flat < n; ++flat) {
    std::size_t src = 0;
    for (std::size_t d = 0; d < rank; ++d) src += idx[d] * src_stride[d];
    map[flat] = src;
    for (std::size_t d = rank; d-- > 0;) {
      if (++idx[d] < out_shape[d]) break;
      idx[d] = 0;
    }
  }
  const auto tv = t.values();
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = tv[map[i]];
  Tensor out = make_result(std::move(out_shape), std::move(v));
  auto ti = t.impl();
  record_op(out, {&t}, [ti, map = std::move(map)](std::span<const double> g) {
    auto& gt = ti->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) gt[map[i]] += g[i];
  });
  return out;
}

Tensor sum(const Tensor& t) {
  double total = 0.0;
  for (double x : t.values()) total += x;
  Tensor out = make_result(Shape{}, {total});
  auto ti = t.impl();
  record_op(out, {&t}, [ti](std::span<const double> g) {
    auto& gt = ti->grad_buffer();
    for (auto& x : gt) x += g[0];
  });
  return out;
}

Tensor mean(const Tensor& t) { return scale(sum(t), 1.0 / static_cast<double>(t.size())); }

Tensor mean_axis(const Tensor& t, std::size_t axis) {
  if (axis >= t.rank()) throw ShapeError("mean_axis: axis out of range");
  const Shape& s = t.shape();
  std::size_t outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  const std::size_t extent = s[axis];
  std::size_t inner = 1;
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const auto tv = t.values();
  std::vector<double> v(outer * inner, 0.0);
  const double inv = 1.0 / static_cast<double>(extent);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t e = 0; e < extent; ++e)
      for (std::size_t i = 0; i < inner; ++i)
        v[o * inner + i] += tv[(o * extent + e) * inner + i] * inv;
  Shape shape = s;
  shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
  Tensor out = make_result(std::move(shape), std::move(v));
  auto ti = t.impl();
  record_op(out, {&t}, [ti, outer, extent, inner, inv](std::span<const double> g) {
    auto& gt = ti->grad_buffer();
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t e = 0; e < extent; ++e)
        for (std::size_t i = 0; i < inner; ++i)
          gt[(o * extent + e) * inner + i] += g[o * inner + i] * inv;
  });
  return out;
}

}  // namespace spatio::numcore
