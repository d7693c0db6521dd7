#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bridgedpi/error.hpp"

namespace bridgedpi::ad {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape &shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string to_string(const Shape &shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i)
      s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

/// Dense row-major n-dimensional array with an optional gradient buffer.
/// Copies share storage; use clone() for a deep copy.
template <typename T> class Tensor {
public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, bool requires_grad = false)
      : impl_(std::make_shared<Impl>()) {
    impl_->data.assign(numel(shape), T{0});
    impl_->shape = std::move(shape);
    impl_->requires_grad = requires_grad;
  }

  Tensor(Shape shape, std::vector<T> data, bool requires_grad = false)
      : impl_(std::make_shared<Impl>()) {
    if (numel(shape) != data.size())
      throw ShapeError("tensor data length " + std::to_string(data.size()) +
                       " does not match shape " + to_string(shape));
    impl_->shape = std::move(shape);
    impl_->data = std::move(data);
    impl_->requires_grad = requires_grad;
  }

  static Tensor scalar(T value, bool requires_grad = false) {
    return Tensor(Shape{}, std::vector<T>{value}, requires_grad);
  }

  static Tensor filled(Shape shape, T value, bool requires_grad = false) {
    Tensor t(std::move(shape), requires_grad);
    std::fill(t.impl_->data.begin(), t.impl_->data.end(), value);
    return t;
  }

  bool defined() const noexcept { return impl_ != nullptr; }

  const Shape &shape() const { return impl().shape; }
  std::size_t rank() const { return impl().shape.size(); }
  std::size_t dim(std::size_t i) const { return impl().shape.at(i); }
  std::size_t size() const { return impl().data.size(); }

  std::span<const T> data() const { return impl().data; }
  std::span<T> data_mut() { return impl().data; }
  std::vector<T> &values() { return impl().data; }
  const std::vector<T> &values() const { return impl().data; }

  T item() const {
    if (size() != 1)
      throw ShapeError("item() on tensor of shape " + to_string(shape()));
    return impl().data[0];
  }
  T at(std::size_t i) const { return impl().data.at(i); }

  bool requires_grad() const { return impl().requires_grad; }
  void set_requires_grad(bool value) { impl().requires_grad = value; }

  bool has_grad() const { return !impl().grad.empty(); }
  /// Gradient values; empty when nothing has been accumulated.
  std::span<const T> grad() const { return impl().grad; }
  /// Gradient buffer, allocated (zeroed) on first access. Storage is shared,
  /// so this is available on const handles captured by backward closures.
  std::vector<T> &grad_buffer() const {
    auto &g = impl().grad;
    if (g.empty())
      g.assign(impl().data.size(), T{0});
    return g;
  }
  void zero_grad() {
    auto &g = impl().grad;
    std::fill(g.begin(), g.end(), T{0});
  }
  void clear_grad() { impl().grad.clear(); }

  Tensor clone() const {
    Tensor t(impl().shape, impl().data, false);
    return t;
  }

  bool same_storage(const Tensor &other) const noexcept { return impl_ == other.impl_; }

private:
  struct Impl {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;
    bool requires_grad = false;
  };

  Impl &impl() const {
    if (!impl_)
      throw Error("use of an undefined tensor");
    return *impl_;
  }

  std::shared_ptr<Impl> impl_;
};

/// Ordered record of executed primitives. Nodes are appended in execution
/// order, so every node's inputs were produced earlier; backward() walks the
/// record once in reverse and then marks the tape consumed.
///
/// A tape records only while a Recording scope is active on the current
/// thread, and only operations with at least one gradient-requiring input.
template <typename T> class Tape {
public:
  using BackwardFn = std::function<void()>;

  Tape() = default;
  Tape(const Tape &) = delete;
  Tape &operator=(const Tape &) = delete;

  bool consumed() const noexcept { return consumed_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  std::string_view kind(std::size_t i) const { return nodes_.at(i).kind; }

  void record(std::string_view kind, Tensor<T> output, BackwardFn fn) {
    if (consumed_)
      throw Error("cannot record on a consumed tape");
    nodes_.push_back(Node{kind, std::move(output), std::move(fn)});
  }

  static Tape *active() noexcept { return active_slot(); }

  class Recording {
  public:
    explicit Recording(Tape &tape) : previous_(active_slot()) { active_slot() = &tape; }
    ~Recording() { active_slot() = previous_; }
    Recording(const Recording &) = delete;
    Recording &operator=(const Recording &) = delete;

  private:
    Tape *previous_;
  };

  /// Seeds d(output)/d(output) = 1 and propagates gradients to every tensor
  /// that requires them. Gradients accumulate into each tensor's buffer.
  void backward(Tensor<T> output) {
    if (consumed_)
      throw Error("tape already consumed");
    if (output.size() != 1)
      throw ShapeError("backward requires a scalar output, got shape " +
                       to_string(output.shape()));
    if (!output.requires_grad())
      throw Error("backward output does not depend on any gradient-requiring tensor");
    output.grad_buffer()[0] += T{1};
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
      if (it->output.has_grad())
        it->fn();
    consumed_ = true;
    nodes_.clear();
  }

private:
  struct Node {
    std::string_view kind;
    Tensor<T> output;
    BackwardFn fn;
  };

  static Tape *&active_slot() noexcept {
    thread_local Tape *slot = nullptr;
    return slot;
  }

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

template <typename T> void backward(Tape<T> &tape, const Tensor<T> &output) {
  tape.backward(output);
}

} // namespace bridgedpi::ad
