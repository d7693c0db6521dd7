#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bridgedpi/ad/tensor.hpp"

// Differentiable primitives. Every function computes its forward value
// eagerly and, when a tape is recording and an input requires gradients,
// appends a node whose closure pushes the output gradient to the inputs.
// Reductions accumulate in double regardless of T.
namespace bridgedpi::ad::ops {

namespace detail {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T> using MatMap = Eigen::Map<RowMatrix<T>>;
template <typename T> using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

template <typename T> bool any_requires_grad(std::initializer_list<const Tensor<T> *> inputs) {
  for (const auto *t : inputs)
    if (t->defined() && t->requires_grad())
      return true;
  return false;
}

/// Records `fn` when a tape is active and an input needs gradients.
template <typename T, typename Fn>
void record(const char *kind, std::initializer_list<const Tensor<T> *> inputs, Tensor<T> &out,
            Fn &&fn) {
  auto *tape = Tape<T>::active();
  if (!tape || !any_requires_grad<T>(inputs))
    return;
  out.set_requires_grad(true);
  tape->record(kind, out, std::forward<Fn>(fn));
}

inline void require(bool ok, const std::string &what) {
  if (!ok)
    throw ShapeError(what);
}

} // namespace detail

/// Matrix product. Supports [n,k]x[k,m], batched [B,n,k]x[B,k,m], and
/// [B,n,k]x[k,m] (shared right operand).
template <typename T> Tensor<T> matmul(const Tensor<T> &a, const Tensor<T> &b) {
  using detail::ConstMatMap;
  using detail::MatMap;
  const bool batched = a.rank() == 3 && b.rank() == 3;
  const bool shared = a.rank() == 3 && b.rank() == 2;
  detail::require((a.rank() == 2 && b.rank() == 2) || batched || shared,
                  "matmul: unsupported ranks " + to_string(a.shape()) + " x " +
                      to_string(b.shape()));
  const std::size_t batch = batched ? a.dim(0) : 1;
  const std::size_t n = shared ? a.dim(0) * a.dim(1) : a.dim(a.rank() - 2);
  const std::size_t k = a.dim(a.rank() - 1);
  const std::size_t kb = b.dim(b.rank() - 2);
  const std::size_t m = b.dim(b.rank() - 1);
  detail::require(k == kb && (!batched || b.dim(0) == batch),
                  "matmul: shape mismatch " + to_string(a.shape()) + " x " + to_string(b.shape()));

  Shape out_shape;
  if (a.rank() == 2)
    out_shape = {n, m};
  else
    out_shape = {a.dim(0), a.dim(1), m};
  Tensor<T> out(out_shape);

  const auto ia = static_cast<Eigen::Index>(n), ik = static_cast<Eigen::Index>(k),
             im = static_cast<Eigen::Index>(m);
  for (std::size_t s = 0; s < batch; ++s) {
    ConstMatMap<T> A(a.data().data() + s * n * k, ia, ik);
    ConstMatMap<T> B(b.data().data() + (batched ? s * k * m : 0), ik, im);
    MatMap<T> C(out.data_mut().data() + s * n * m, ia, im);
    C.noalias() = A * B;
  }

  detail::record<T>("matmul", {&a, &b}, out, [a, b, out, batch, ia, ik, im, batched]() mutable {
    const auto &g = out.grad();
    for (std::size_t s = 0; s < batch; ++s) {
      ConstMatMap<T> G(g.data() + s * ia * im, ia, im);
      if (a.requires_grad()) {
        MatMap<T> dA(a.grad_buffer().data() + s * ia * ik, ia, ik);
        ConstMatMap<T> B(b.data().data() + (batched ? s * ik * im : 0), ik, im);
        dA.noalias() += G * B.transpose();
      }
      if (b.requires_grad()) {
        MatMap<T> dB(b.grad_buffer().data() + (batched ? s * ik * im : 0), ik, im);
        ConstMatMap<T> A(a.data().data() + s * ia * ik, ia, ik);
        dB.noalias() += A.transpose() * G;
      }
    }
  });
  return out;
}

template <typename T> Tensor<T> add(const Tensor<T> &a, const Tensor<T> &b) {
  detail::require(a.shape() == b.shape(),
                  "add: shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  Tensor<T> out(a.shape());
  auto o = out.data_mut();
  for (std::size_t i = 0; i < o.size(); ++i)
    o[i] = a.data()[i] + b.data()[i];
  detail::record<T>("add", {&a, &b}, out, [a, b, out]() mutable {
    const auto g = out.grad();
    for (const Tensor<T> *t : {&a, &b}) {
      if (!t->requires_grad())
        continue;
      auto &d = t->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i)
        d[i] += g[i];
    }
  });
  return out;
}

/// x + bias, with bias broadcast along every leading axis of x.
template <typename T> Tensor<T> add_bias(const Tensor<T> &x, const Tensor<T> &bias) {
  detail::require(bias.rank() == 1 && x.rank() >= 1 && x.dim(x.rank() - 1) == bias.dim(0),
                  "add_bias: shape mismatch " + to_string(x.shape()) + " + " +
                      to_string(bias.shape()));
  const std::size_t f = bias.dim(0);
  Tensor<T> out(x.shape());
  auto o = out.data_mut();
  for (std::size_t i = 0; i < o.size(); ++i)
    o[i] = x.data()[i] + bias.data()[i % f];
  detail::record<T>("add_bias", {&x, &bias}, out, [x, bias, out, f]() mutable {
    const auto g = out.grad();
    if (x.requires_grad()) {
      auto &d = x.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i)
        d[i] += g[i];
    }
    if (bias.requires_grad()) {
      std::vector<double> acc(f, 0.0);
      for (std::size_t i = 0; i < g.size(); ++i)
        acc[i % f] += g[i];
      auto &d = bias.grad_buffer();
      for (std::size_t j = 0; j < f; ++j)
        d[j] += static_cast<T>(acc[j]);
    }
  });
  return out;
}

template <typename T> Tensor<T> scale(const Tensor<T> &x, T factor) {
  Tensor<T> out(x.shape());
  auto o = out.data_mut();
  for (std::size_t i = 0; i < o.size(); ++i)
    o[i] = x.data()[i] * factor;
  detail::record<T>("scale", {&x}, out, [x, out, factor]() mutable {
    const auto g = out.grad();
    auto &d = x.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i)
      d[i] += g[i] * factor;
  });
  return out;
}

/// max(x, 0); the subgradient at 0 is 0.
template <typename T> Tensor<T> relu(const Tensor<T> &x) {
  Tensor<T> out(x.shape());
  auto o = out.data_mut();
  for (std::size_t i = 0; i < o.size(); ++i)
    o[i] = x.data()[i] > T{0} ? x.data()[i] : T{0};
  detail::record<T>("relu", {&x}, out, [x, out]() mutable {
    const auto g = out.grad();
    auto &d = x.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (x.data()[i] > T{0})
        d[i] += g[i];
  });
  return out;
}

template <typename T> Tensor<T> sigmoid(const Tensor<T> &x) {
  Tensor<T> out(x.shape());
  auto o = out.data_mut();
  for (std::size_t i = 0; i < o.size(); ++i) {
    const T v = x.data()[i];
    // Split on sign so exp never overflows.
    if (v >= T{0}) {
      o[i] = T{1} / (T{1} + std::exp(-v));
    } else {
      const T e = std::exp(v);
      o[i] = e / (T{1} + e);
    }
  }
  detail::record<T>("sigmoid", {&x}, out, [x, out]() mutable {
    const auto g = out.grad();
    const auto y = out.data();
    auto &d = x.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i)
      d[i] += g[i] * y[i] * (T{1} - y[i]);
  });
  return out;
}

/// Element-wise (Hadamard) product.
template <typename T> Tensor<T> mul(const Tensor<T> &a, const Tensor<T> &b) {
  detail::require(a.shape() == b.shape(),
                  "mul: shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  Tensor<T> out(a.shape());
  auto o = out.data_mut();
  for (std::size_t i = 0; i < o.size(); ++i)
    o[i] = a.data()[i] * b.data()[i];
  detail::record<T>("elementwise_mul", {&a, &b}, out, [a, b, out]() mutable {
    const auto g = out.grad();
    if (a.requires_grad()) {
      auto &d = a.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i)
        d[i] += g[i] * b.data()[i];
    }
    if (b.requires_grad()) {
      auto &d = b.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i)
        d[i] += g[i] * a.data()[i];
    }
  });
  return out;
}

template <typename T> Tensor<T> sum(const Tensor<T> &x) {
  double acc = 0.0;
  for (T v : x.data())
    acc += static_cast<double>(v);
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc));
  detail::record<T>("sum", {&x}, out, [x, out]() mutable {
    const T g = out.grad()[0];
    for (auto &d : x.grad_buffer())
      d += g;
  });
  return out;
}

template <typename T> Tensor<T> mean(const Tensor<T> &x) {
  return scale(sum(x), T{1} / static_cast<T>(x.size()));
}

/// Sum of squared entries.
template <typename T> Tensor<T> sum_squares(const Tensor<T> &x) {
  double acc = 0.0;
  for (T v : x.data())
    acc += static_cast<double>(v) * static_cast<double>(v);
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc));
  detail::record<T>("sum_squares", {&x}, out, [x, out]() mutable {
    const T g = out.grad()[0];
    auto &d = x.grad_buffer();
    for (std::size_t i = 0; i < d.size(); ++i)
      d[i] += T{2} * g * x.data()[i];
  });
  return out;
}

/// Same values, new shape.
template <typename T> Tensor<T> reshape(const Tensor<T> &x, Shape shape) {
  detail::require(numel(shape) == x.size(), "reshape: cannot view " + to_string(x.shape()) +
                                                " as " + to_string(shape));
  Tensor<T> out(std::move(shape), x.values());
  detail::record<T>("reshape", {&x}, out, [x, out]() mutable {
    const auto g = out.grad();
    auto &d = x.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i)
      d[i] += g[i];
  });
  return out;
}

namespace detail {

struct AxisSplit {
  std::size_t outer;
  std::size_t inner;
};

inline AxisSplit split_at(const Shape &shape, std::size_t axis) {
  AxisSplit s{1, 1};
  for (std::size_t i = 0; i < axis; ++i)
    s.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i)
    s.inner *= shape[i];
  return s;
}

} // namespace detail

/// Concatenation along `axis`; all other extents must agree.
template <typename T> Tensor<T> concat(const std::vector<Tensor<T>> &parts, std::size_t axis) {
  detail::require(!parts.empty(), "concat: no inputs");
  const Shape &ref = parts.front().shape();
  detail::require(axis < ref.size(), "concat: axis out of range");
  Shape out_shape = ref;
  out_shape[axis] = 0;
  for (const auto &p : parts) {
    detail::require(p.rank() == ref.size(), "concat: rank mismatch");
    for (std::size_t i = 0; i < ref.size(); ++i)
      detail::require(i == axis || p.dim(i) == ref[i],
                      "concat: extent mismatch " + to_string(p.shape()) + " vs " + to_string(ref));
    out_shape[axis] += p.dim(axis);
  }
  const auto split = detail::split_at(out_shape, axis);
  Tensor<T> out(out_shape);
  auto o = out.data_mut();
  std::size_t offset = 0;
  for (const auto &p : parts) {
    const std::size_t chunk = p.dim(axis) * split.inner;
    for (std::size_t r = 0; r < split.outer; ++r)
      std::copy_n(p.data().data() + r * chunk, chunk,
                  o.data() + r * out_shape[axis] * split.inner + offset);
    offset += chunk;
  }

  auto *tape = Tape<T>::active();
  bool needs = false;
  for (const auto &p : parts)
    needs = needs || p.requires_grad();
  if (tape && needs) {
    out.set_requires_grad(true);
    tape->record("concat", out, [parts, out, axis, split, total = out_shape[axis]]() mutable {
      const auto g = out.grad();
      std::size_t off = 0;
      for (auto &p : parts) {
        const std::size_t chunk = p.dim(axis) * split.inner;
        if (p.requires_grad()) {
          auto &d = p.grad_buffer();
          for (std::size_t r = 0; r < split.outer; ++r)
            for (std::size_t i = 0; i < chunk; ++i)
              d[r * chunk + i] += g[r * total * split.inner + off + i];
        }
        off += chunk;
      }
    });
  }
  return out;
}

/// Sub-range [begin, end) along `axis`.
template <typename T>
Tensor<T> slice(const Tensor<T> &x, std::size_t axis, std::size_t begin, std::size_t end) {
  detail::require(axis < x.rank() && begin < end && end <= x.dim(axis),
                  "slice: invalid range on " + to_string(x.shape()));
  Shape out_shape = x.shape();
  out_shape[axis] = end - begin;
  const auto split = detail::split_at(x.shape(), axis);
  const std::size_t in_row = x.dim(axis) * split.inner;
  const std::size_t out_row = (end - begin) * split.inner;
  Tensor<T> out(out_shape);
  auto o = out.data_mut();
  for (std::size_t r = 0; r < split.outer; ++r)
    std::copy_n(x.data().data() + r * in_row + begin * split.inner, out_row,
                o.data() + r * out_row);
  detail::record<T>("slice", {&x}, out, [x, out, split, in_row, out_row, begin]() mutable {
    const auto g = out.grad();
    auto &d = x.grad_buffer();
    for (std::size_t r = 0; r < split.outer; ++r)
      for (std::size_t i = 0; i < out_row; ++i)
        d[r * in_row + begin * split.inner + i] += g[r * out_row + i];
  });
  return out;
}

/// Repeats x along a new leading axis of extent `copies`.
template <typename T> Tensor<T> repeat(const Tensor<T> &x, std::size_t copies) {
  Shape out_shape{copies};
  out_shape.insert(out_shape.end(), x.shape().begin(), x.shape().end());
  Tensor<T> out(out_shape);
  const std::size_t n = x.size();
  auto o = out.data_mut();
  for (std::size_t c = 0; c < copies; ++c)
    std::copy_n(x.data().data(), n, o.data() + c * n);
  detail::record<T>("repeat", {&x}, out, [x, out, copies, n]() mutable {
    const auto g = out.grad();
    auto &d = x.grad_buffer();
    for (std::size_t c = 0; c < copies; ++c)
      for (std::size_t i = 0; i < n; ++i)
        d[i] += g[c * n + i];
  });
  return out;
}

/// Row lookup: ids of shape `id_shape` index rows of table [V, E]; the
/// result has shape id_shape + [E]. Rows for `pad_id` are zero and receive no
/// gradient.
template <typename T>
Tensor<T> embedding(const Tensor<T> &table, const std::vector<int> &ids, Shape id_shape,
                    int pad_id = 0) {
  detail::require(table.rank() == 2, "embedding: table must be rank 2");
  detail::require(numel(id_shape) == ids.size(), "embedding: ids do not match id shape");
  const std::size_t vocab = table.dim(0), width = table.dim(1);
  for (int id : ids)
    detail::require(id >= 0 && static_cast<std::size_t>(id) < vocab,
                    "embedding: id " + std::to_string(id) + " out of range");
  Shape out_shape = std::move(id_shape);
  out_shape.push_back(width);
  Tensor<T> out(out_shape);
  auto o = out.data_mut();
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (ids[i] != pad_id)
      std::copy_n(table.data().data() + static_cast<std::size_t>(ids[i]) * width, width,
                  o.data() + i * width);
  detail::record<T>("embedding", {&table}, out, [table, ids, out, width, pad_id]() mutable {
    const auto g = out.grad();
    auto &d = table.grad_buffer();
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] == pad_id)
        continue;
      const std::size_t row = static_cast<std::size_t>(ids[i]) * width;
      for (std::size_t j = 0; j < width; ++j)
        d[row + j] += g[i * width + j];
    }
  });
  return out;
}

/// Stride-1 1-D convolution with zero "same" padding.
/// x: [B, L, Cin], kernel: [K, Cin, Cout], bias: [Cout] -> [B, L, Cout].
/// Output position t sees inputs t - (K-1)/2 ... t + K/2.
template <typename T>
Tensor<T> conv1d(const Tensor<T> &x, const Tensor<T> &kernel, const Tensor<T> &bias) {
  using detail::ConstMatMap;
  using detail::MatMap;
  detail::require(x.rank() == 3 && kernel.rank() == 3 && bias.rank() == 1 &&
                      kernel.dim(1) == x.dim(2) && bias.dim(0) == kernel.dim(2),
                  "conv1d: shape mismatch x=" + to_string(x.shape()) + " kernel=" +
                      to_string(kernel.shape()) + " bias=" + to_string(bias.shape()));
  const std::size_t batch = x.dim(0), len = x.dim(1), cin = x.dim(2);
  const std::size_t width = kernel.dim(0), cout = kernel.dim(2);
  const std::size_t pad = (width - 1) / 2;
  const std::size_t cols = width * cin;

  // im2col for the whole batch: [B*L, K*Cin].
  auto columns = std::make_shared<std::vector<T>>(batch * len * cols, T{0});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < len; ++t)
      for (std::size_t k = 0; k < width; ++k) {
        const auto src = static_cast<std::ptrdiff_t>(t + k) - static_cast<std::ptrdiff_t>(pad);
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(len))
          continue;
        std::copy_n(x.data().data() + (b * len + static_cast<std::size_t>(src)) * cin, cin,
                    columns->data() + (b * len + t) * cols + k * cin);
      }

  const auto rows = static_cast<Eigen::Index>(batch * len);
  const auto ic = static_cast<Eigen::Index>(cols), io = static_cast<Eigen::Index>(cout);
  Tensor<T> out(Shape{batch, len, cout});
  {
    ConstMatMap<T> C(columns->data(), rows, ic);
    ConstMatMap<T> W(kernel.data().data(), ic, io);
    MatMap<T> Y(out.data_mut().data(), rows, io);
    Y.noalias() = C * W;
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index o = 0; o < io; ++o)
        Y(r, o) += bias.data()[static_cast<std::size_t>(o)];
  }

  detail::record<T>(
      "conv1d", {&x, &kernel, &bias}, out,
      [x, kernel, bias, out, columns, batch, len, cin, width, pad, cols, rows, ic, io]() mutable {
        ConstMatMap<T> G(out.grad().data(), rows, io);
        if (kernel.requires_grad()) {
          ConstMatMap<T> C(columns->data(), rows, ic);
          MatMap<T> dW(kernel.grad_buffer().data(), ic, io);
          dW.noalias() += C.transpose() * G;
        }
        if (bias.requires_grad()) {
          auto &d = bias.grad_buffer();
          for (Eigen::Index o = 0; o < io; ++o) {
            double acc = 0.0;
            for (Eigen::Index r = 0; r < rows; ++r)
              acc += static_cast<double>(G(r, o));
            d[static_cast<std::size_t>(o)] += static_cast<T>(acc);
          }
        }
        if (x.requires_grad()) {
          ConstMatMap<T> W(kernel.data().data(), ic, io);
          detail::RowMatrix<T> dC = G * W.transpose();
          auto &d = x.grad_buffer();
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t t = 0; t < len; ++t)
              for (std::size_t k = 0; k < width; ++k) {
                const auto src =
                    static_cast<std::ptrdiff_t>(t + k) - static_cast<std::ptrdiff_t>(pad);
                if (src < 0 || src >= static_cast<std::ptrdiff_t>(len))
                  continue;
                const T *gsrc = dC.data() + (b * len + t) * cols + k * cin;
                T *dst = d.data() + (b * len + static_cast<std::size_t>(src)) * cin;
                for (std::size_t c = 0; c < cin; ++c)
                  dst[c] += gsrc[c];
              }
        }
      });
  return out;
}

/// Max over the length axis: [B, L, C] -> [B, C]. Ties route the gradient
/// to the first maximal position.
template <typename T> Tensor<T> global_maxpool(const Tensor<T> &x) {
  detail::require(x.rank() == 3, "global_maxpool: expected [B, L, C], got " + to_string(x.shape()));
  const std::size_t batch = x.dim(0), len = x.dim(1), ch = x.dim(2);
  Tensor<T> out(Shape{batch, ch});
  std::vector<std::size_t> arg(batch * ch, 0);
  auto o = out.data_mut();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < ch; ++c) {
      std::size_t best = 0;
      T value = x.data()[(b * len) * ch + c];
      for (std::size_t t = 1; t < len; ++t) {
        const T v = x.data()[(b * len + t) * ch + c];
        if (v > value) {
          value = v;
          best = t;
        }
      }
      o[b * ch + c] = value;
      arg[b * ch + c] = best;
    }
  detail::record<T>("global_maxpool", {&x}, out, [x, out, arg, len, ch]() mutable {
    const auto g = out.grad();
    auto &d = x.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const std::size_t b = i / ch, c = i % ch;
      d[(b * len + arg[i]) * ch + c] += g[i];
    }
  });
  return out;
}

/// Running statistics owned by a batch-norm layer.
template <typename T> struct BatchNormStats {
  Tensor<T> running_mean;
  Tensor<T> running_var;
  double momentum = 0.9; // running = momentum * running + (1 - momentum) * batch
  double epsilon = 1e-5;

  explicit BatchNormStats(std::size_t features = 0)
      : running_mean(Shape{features}), running_var(Tensor<T>::filled(Shape{features}, T{1})) {}
};

/// Batch normalisation over axis 0 of x: [B, F].
/// Training: normalises with biased batch statistics and updates the running
/// statistics (unbiased variance). Inference: fixed affine map from the
/// running statistics.
template <typename T>
Tensor<T> batchnorm(const Tensor<T> &x, const Tensor<T> &gamma, const Tensor<T> &beta,
                    BatchNormStats<T> &stats, bool training) {
  detail::require(x.rank() == 2 && gamma.rank() == 1 && beta.rank() == 1 &&
                      gamma.dim(0) == x.dim(1) && beta.dim(0) == x.dim(1) &&
                      stats.running_mean.size() == x.dim(1),
                  "batchnorm: shape mismatch " + to_string(x.shape()));
  const std::size_t batch = x.dim(0), f = x.dim(1);
  std::vector<T> mean_v(f), invstd(f);
  if (training) {
    auto rm = stats.running_mean.data_mut();
    auto rv = stats.running_var.data_mut();
    for (std::size_t j = 0; j < f; ++j) {
      double m = 0.0;
      for (std::size_t i = 0; i < batch; ++i)
        m += static_cast<double>(x.data()[i * f + j]);
      m /= static_cast<double>(batch);
      double v = 0.0;
      for (std::size_t i = 0; i < batch; ++i) {
        const double dlt = static_cast<double>(x.data()[i * f + j]) - m;
        v += dlt * dlt;
      }
      const double biased = v / static_cast<double>(batch);
      const double unbiased = batch > 1 ? v / static_cast<double>(batch - 1) : biased;
      mean_v[j] = static_cast<T>(m);
      invstd[j] = static_cast<T>(1.0 / std::sqrt(biased + stats.epsilon));
      rm[j] = static_cast<T>(stats.momentum * static_cast<double>(rm[j]) +
                             (1.0 - stats.momentum) * m);
      rv[j] = static_cast<T>(stats.momentum * static_cast<double>(rv[j]) +
                             (1.0 - stats.momentum) * unbiased);
    }
  } else {
    for (std::size_t j = 0; j < f; ++j) {
      mean_v[j] = stats.running_mean.data()[j];
      invstd[j] = static_cast<T>(
          1.0 / std::sqrt(static_cast<double>(stats.running_var.data()[j]) + stats.epsilon));
    }
  }

  Tensor<T> xhat(x.shape());
  Tensor<T> out(x.shape());
  auto xh = xhat.data_mut();
  auto o = out.data_mut();
  for (std::size_t i = 0; i < batch; ++i)
    for (std::size_t j = 0; j < f; ++j) {
      const std::size_t k = i * f + j;
      xh[k] = (x.data()[k] - mean_v[j]) * invstd[j];
      o[k] = gamma.data()[j] * xh[k] + beta.data()[j];
    }

  detail::record<T>("batchnorm", {&x, &gamma, &beta}, out,
                    [x, gamma, beta, out, xhat, invstd, batch, f, training]() mutable {
                      const auto g = out.grad();
                      const auto xh = xhat.data();
                      std::vector<double> sum_g(f, 0.0), sum_gx(f, 0.0);
                      for (std::size_t i = 0; i < batch; ++i)
                        for (std::size_t j = 0; j < f; ++j) {
                          sum_g[j] += static_cast<double>(g[i * f + j]);
                          sum_gx[j] += static_cast<double>(g[i * f + j]) * xh[i * f + j];
                        }
                      if (gamma.requires_grad()) {
                        auto &d = gamma.grad_buffer();
                        for (std::size_t j = 0; j < f; ++j)
                          d[j] += static_cast<T>(sum_gx[j]);
                      }
                      if (beta.requires_grad()) {
                        auto &d = beta.grad_buffer();
                        for (std::size_t j = 0; j < f; ++j)
                          d[j] += static_cast<T>(sum_g[j]);
                      }
                      if (!x.requires_grad())
                        return;
                      auto &d = x.grad_buffer();
                      const double n = static_cast<double>(batch);
                      for (std::size_t i = 0; i < batch; ++i)
                        for (std::size_t j = 0; j < f; ++j) {
                          const std::size_t k = i * f + j;
                          const double gm = static_cast<double>(gamma.data()[j]);
                          if (training) {
                            const double v = gm * static_cast<double>(invstd[j]) / n *
                                             (n * static_cast<double>(g[k]) - sum_g[j] -
                                              static_cast<double>(xh[k]) * sum_gx[j]);
                            d[k] += static_cast<T>(v);
                          } else {
                            d[k] += static_cast<T>(gm * static_cast<double>(invstd[j]) *
                                                   static_cast<double>(g[k]));
                          }
                        }
                    });
  return out;
}

/// Uniform double in [0, 1) from the top 53 bits of a 64-bit draw.
inline double uniform01(std::mt19937_64 &rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Inverted dropout: zeroes each entry with probability p and scales the
/// survivors by 1/(1-p). Only valid in training mode.
template <typename T>
Tensor<T> dropout(const Tensor<T> &x, double p, std::mt19937_64 &rng, bool training) {
  if (!training)
    throw Error("dropout invoked in inference mode");
  if (!(p >= 0.0 && p < 1.0))
    throw std::invalid_argument("dropout rate must be in [0, 1)");
  std::vector<T> mask(x.size());
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  for (auto &m : mask)
    m = uniform01(rng) < p ? T{0} : keep_scale;
  Tensor<T> out(x.shape());
  auto o = out.data_mut();
  for (std::size_t i = 0; i < o.size(); ++i)
    o[i] = x.data()[i] * mask[i];
  detail::record<T>("dropout", {&x}, out, [x, out, mask]() mutable {
    const auto g = out.grad();
    auto &d = x.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i)
      d[i] += g[i] * mask[i];
  });
  return out;
}

inline constexpr double kCosineEpsilon = 1e-8;

/// Pairwise cosine similarity between rows: [N, d] -> [N, N] or
/// [B, N, d] -> [B, N, N]. Off-diagonal entries are
/// x_i.x_j / (|x_i| |x_j| + 1e-8); the diagonal is fixed at 1 and carries no
/// gradient.
template <typename T> Tensor<T> cosine_similarity_matrix(const Tensor<T> &x) {
  detail::require(x.rank() == 2 || x.rank() == 3,
                  "cosine_similarity_matrix: expected [N, d] or [B, N, d]");
  const bool batched = x.rank() == 3;
  const std::size_t batch = batched ? x.dim(0) : 1;
  const std::size_t n = x.dim(x.rank() - 2), d = x.dim(x.rank() - 1);
  Tensor<T> out(batched ? Shape{batch, n, n} : Shape{n, n});
  std::vector<double> norms(batch * n), dots(batch * n * n);
  auto o = out.data_mut();
  for (std::size_t b = 0; b < batch; ++b) {
    const T *xb = x.data().data() + b * n * d;
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k)
        s += static_cast<double>(xb[i * d + k]) * static_cast<double>(xb[i * d + k]);
      norms[b * n + i] = std::sqrt(s);
    }
    for (std::size_t i = 0; i < n; ++i) {
      o[(b * n + i) * n + i] = T{1};
      for (std::size_t j = i + 1; j < n; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < d; ++k)
          s += static_cast<double>(xb[i * d + k]) * static_cast<double>(xb[j * d + k]);
        dots[(b * n + i) * n + j] = s;
        const double c = s / (norms[b * n + i] * norms[b * n + j] + kCosineEpsilon);
        o[(b * n + i) * n + j] = o[(b * n + j) * n + i] = static_cast<T>(c);
      }
    }
  }
  detail::record<T>("cosine_similarity_matrix", {&x}, out,
                    [x, out, norms, dots, batch, n, d]() mutable {
                      const auto g = out.grad();
                      auto &dx = x.grad_buffer();
                      for (std::size_t b = 0; b < batch; ++b) {
                        const T *xb = x.data().data() + b * n * d;
                        T *gb = dx.data() + b * n * d;
                        for (std::size_t i = 0; i < n; ++i)
                          for (std::size_t j = i + 1; j < n; ++j) {
                            const double gg = static_cast<double>(g[(b * n + i) * n + j]) +
                                              static_cast<double>(g[(b * n + j) * n + i]);
                            if (gg == 0.0)
                              continue;
                            const double ni = norms[b * n + i], nj = norms[b * n + j];
                            const double q = ni * nj + kCosineEpsilon;
                            const double dot = dots[(b * n + i) * n + j];
                            // d/dx_i of dot/q = x_j/q - dot * nj * x_i / (ni q^2)
                            const double ci = ni > 0.0 ? dot * nj / (ni * q * q) : 0.0;
                            const double cj = nj > 0.0 ? dot * ni / (nj * q * q) : 0.0;
                            for (std::size_t k = 0; k < d; ++k) {
                              const double xi = static_cast<double>(xb[i * d + k]);
                              const double xj = static_cast<double>(xb[j * d + k]);
                              gb[i * d + k] += static_cast<T>(gg * (xj / q - ci * xi));
                              gb[j * d + k] += static_cast<T>(gg * (xi / q - cj * xj));
                            }
                          }
                      }
                    });
  return out;
}

/// Symmetric degree normalisation D^-1/2 A D^-1/2 with D = diag(row sums of
/// A). Input [N, N] or [B, N, N]; every row sum must be positive.
template <typename T> Tensor<T> degree_normalize(const Tensor<T> &a) {
  detail::require((a.rank() == 2 || a.rank() == 3) && a.dim(a.rank() - 1) == a.dim(a.rank() - 2),
                  "degree_normalize: expected square matrices, got " + to_string(a.shape()));
  const std::size_t batch = a.rank() == 3 ? a.dim(0) : 1;
  const std::size_t n = a.dim(a.rank() - 1);
  std::vector<double> inv_sqrt(batch * n);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < n; ++i) {
      double deg = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        deg += static_cast<double>(a.data()[(b * n + i) * n + j]);
      if (!(deg > 0.0))
        throw Error("degree_normalize: non-positive degree");
      inv_sqrt[b * n + i] = 1.0 / std::sqrt(deg);
    }
  Tensor<T> out(a.shape());
  auto o = out.data_mut();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t k = (b * n + i) * n + j;
        // s_i * s_j first so that L stays exactly symmetric.
        o[k] = static_cast<T>(static_cast<double>(a.data()[k]) *
                              (inv_sqrt[b * n + i] * inv_sqrt[b * n + j]));
      }
  detail::record<T>("degree_normalize", {&a}, out, [a, out, inv_sqrt, batch, n]() mutable {
    const auto g = out.grad();
    auto &da = a.grad_buffer();
    for (std::size_t b = 0; b < batch; ++b) {
      // s_i = deg_i^-1/2; L_ij = s_i A_ij s_j.
      std::vector<double> gs(n, 0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const std::size_t k = (b * n + i) * n + j;
          const double gij = static_cast<double>(g[k]);
          const double aij = static_cast<double>(a.data()[k]);
          da[k] += static_cast<T>(gij * inv_sqrt[b * n + i] * inv_sqrt[b * n + j]);
          gs[i] += gij * aij * inv_sqrt[b * n + j];
          gs[j] += gij * aij * inv_sqrt[b * n + i];
        }
      for (std::size_t i = 0; i < n; ++i) {
        const double s = inv_sqrt[b * n + i];
        const double gdeg = gs[i] * -0.5 * s * s * s;
        for (std::size_t j = 0; j < n; ++j)
          da[(b * n + i) * n + j] += static_cast<T>(gdeg);
      }
    }
  });
  return out;
}

inline constexpr double kProbabilityClamp = 1e-7;

/// Mean binary cross-entropy of probabilities p against 0/1 labels, with p
/// clamped to [1e-7, 1 - 1e-7]. Clamped entries pass no gradient.
template <typename T>
Tensor<T> binary_cross_entropy(const Tensor<T> &p, const std::vector<T> &labels) {
  detail::require(p.size() == labels.size() && p.size() > 0,
                  "binary_cross_entropy: probabilities and labels differ in length");
  const std::size_t n = p.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = static_cast<double>(labels[i]);
    if (y != 0.0 && y != 1.0)
      throw DataError("label outside {0, 1}: " + std::to_string(y));
    const double q = std::clamp(static_cast<double>(p.data()[i]), kProbabilityClamp,
                                1.0 - kProbabilityClamp);
    acc -= y * std::log(q) + (1.0 - y) * std::log(1.0 - q);
  }
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc / static_cast<double>(n)));
  detail::record<T>("binary_cross_entropy", {&p}, out, [p, labels, out, n]() mutable {
    const double g = static_cast<double>(out.grad()[0]) / static_cast<double>(n);
    auto &d = p.grad_buffer();
    for (std::size_t i = 0; i < n; ++i) {
      const double q = static_cast<double>(p.data()[i]);
      if (q < kProbabilityClamp || q > 1.0 - kProbabilityClamp)
        continue;
      const double y = static_cast<double>(labels[i]);
      d[i] += static_cast<T>(g * (-y / q + (1.0 - y) / (1.0 - q)));
    }
  });
  return out;
}

} // namespace bridgedpi::ad::ops
