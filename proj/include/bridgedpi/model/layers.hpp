#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "bridgedpi/ad/ops.hpp"

namespace bridgedpi::model {

using ad::Shape;
using ad::Tensor;

/// Forward-pass mode. Training uses batch statistics in batch-norm and, when
/// dropout is on, a stochastic mask; inference uses running statistics and
/// no dropout. The deterministic mode is inference with gradients allowed.
struct Mode {
  bool training = false;
  bool dropout = false;

  static Mode train(bool with_dropout = true) { return {true, with_dropout}; }
  static Mode inference() { return {false, false}; }
};

/// Named learnable tensor. `decay` marks weights that take part in the L2
/// penalty.
template <typename T> struct Parameter {
  std::string name;
  Tensor<T> value;
  bool decay = false;
};

/// Named, ordered registry of parameters and non-learnable buffers.
template <typename T> class ParameterStore {
public:
  Tensor<T> &add(const std::string &name, Tensor<T> value, bool decay) {
    if (index_.count(name) || buffer_index_.count(name))
      throw Error("duplicate parameter name '" + name + "'");
    value.set_requires_grad(true);
    index_[name] = params_.size();
    params_.push_back({name, std::move(value), decay});
    return params_.back().value;
  }

  /// Buffers are persisted in checkpoints but never optimised.
  void add_buffer(const std::string &name, Tensor<T> *buffer) {
    if (index_.count(name) || buffer_index_.count(name))
      throw Error("duplicate parameter name '" + name + "'");
    buffer_index_[name] = buffers_.size();
    buffers_.push_back({name, buffer});
  }

  std::vector<Parameter<T>> &params() noexcept { return params_; }
  const std::vector<Parameter<T>> &params() const noexcept { return params_; }
  const std::vector<std::pair<std::string, Tensor<T> *>> &buffers() const noexcept {
    return buffers_;
  }

  bool contains(const std::string &name) const {
    return index_.count(name) || buffer_index_.count(name);
  }

  Tensor<T> &get(const std::string &name) {
    if (auto it = index_.find(name); it != index_.end())
      return params_[it->second].value;
    if (auto it = buffer_index_.find(name); it != buffer_index_.end())
      return *buffers_[it->second].second;
    throw Error("unknown parameter '" + name + "'");
  }
  const Tensor<T> &get(const std::string &name) const {
    return const_cast<ParameterStore *>(this)->get(name);
  }

  std::size_t count() const noexcept {
    std::size_t n = 0;
    for (const auto &p : params_)
      n += p.value.size();
    return n;
  }

  void zero_grad() {
    for (auto &p : params_)
      p.value.clear_grad();
  }

private:
  std::vector<Parameter<T>> params_;
  std::map<std::string, std::size_t> index_;
  std::vector<std::pair<std::string, Tensor<T> *>> buffers_;
  std::map<std::string, std::size_t> buffer_index_;
};

namespace init {

template <typename T>
Tensor<T> uniform(Shape shape, double bound, std::mt19937_64 &rng) {
  Tensor<T> t(std::move(shape));
  for (auto &x : t.values())
    x = static_cast<T>((2.0 * ad::ops::uniform01(rng) - 1.0) * bound);
  return t;
}

template <typename T>
Tensor<T> normal(Shape shape, double stddev, std::mt19937_64 &rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor<T> t(std::move(shape));
  for (auto &x : t.values())
    x = static_cast<T>(dist(rng));
  return t;
}

} // namespace init

/// x W + b with W: [in, out]. Weights and bias are drawn from
/// U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <typename T> struct Dense {
  Tensor<T> weight, bias;

  Dense() = default;
  Dense(ParameterStore<T> &store, const std::string &name, std::size_t in, std::size_t out,
        std::mt19937_64 &rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    weight = store.add(name + ".weight", init::uniform<T>({in, out}, bound, rng), true);
    bias = store.add(name + ".bias", init::uniform<T>({out}, bound, rng), false);
  }

  Tensor<T> operator()(const Tensor<T> &x) const {
    return ad::ops::add_bias(ad::ops::matmul(x, weight), bias);
  }
};

/// Dense -> batch-norm -> ReLU -> dropout.
template <typename T> struct NormDense {
  Dense<T> affine;
  Tensor<T> gamma, beta;
  std::unique_ptr<ad::ops::BatchNormStats<T>> stats;

  NormDense() = default;
  NormDense(ParameterStore<T> &store, const std::string &name, std::size_t in, std::size_t out,
            std::mt19937_64 &rng)
      : affine(store, name, in, out, rng),
        stats(std::make_unique<ad::ops::BatchNormStats<T>>(out)) {
    gamma = store.add(name + ".bn.gamma", Tensor<T>::filled({out}, T{1}), false);
    beta = store.add(name + ".bn.beta", Tensor<T>({out}), false);
    store.add_buffer(name + ".bn.running_mean", &stats->running_mean);
    store.add_buffer(name + ".bn.running_var", &stats->running_var);
  }

  Tensor<T> operator()(const Tensor<T> &x, Mode mode, double rate, std::mt19937_64 &rng) const {
    auto h = ad::ops::relu(ad::ops::batchnorm(affine(x), gamma, beta, *stats, mode.training));
    if (mode.training && mode.dropout && rate > 0.0)
      h = ad::ops::dropout(h, rate, rng, true);
    return h;
  }
};

/// Token embedding -> conv1d ("same" padding) -> ReLU -> global max pool.
template <typename T> struct ConvBranch {
  Tensor<T> table, kernel, bias;

  ConvBranch() = default;
  ConvBranch(ParameterStore<T> &store, const std::string &name, std::size_t vocab,
             std::size_t token_dim, std::size_t width, std::size_t channels,
             std::mt19937_64 &rng) {
    auto t = init::normal<T>({vocab, token_dim}, 1.0, rng);
    for (std::size_t j = 0; j < token_dim; ++j)
      t.values()[j] = T{0}; // padding row
    table = store.add(name + ".embedding", std::move(t), true);
    const double bound = 1.0 / std::sqrt(static_cast<double>(width * token_dim));
    kernel = store.add(name + ".kernel", init::uniform<T>({width, token_dim, channels}, bound, rng),
                       true);
    bias = store.add(name + ".bias", init::uniform<T>({channels}, bound, rng), false);
  }

  /// ids: batch * len token ids, row-major.
  Tensor<T> operator()(const std::vector<int> &ids, std::size_t batch, std::size_t len) const {
    const auto emb = ad::ops::embedding(table, ids, {batch, len});
    return ad::ops::global_maxpool(ad::ops::relu(ad::ops::conv1d(emb, kernel, bias)));
  }
};

} // namespace bridgedpi::model
