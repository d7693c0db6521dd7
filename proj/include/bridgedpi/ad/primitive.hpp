#pragma once

#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "bridgedpi/ad/ops.hpp"

namespace bridgedpi::ad {

/// Optional attributes consumed by individual primitive kinds.
template <typename T> struct Attributes {
  std::size_t axis = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
  T factor = T{1};
  double rate = 0.5;
  bool training = false;
  std::mt19937_64 *rng = nullptr;
  ops::BatchNormStats<T> *stats = nullptr;
  Shape shape;
  std::vector<int> ids;
  std::vector<T> labels;
};

/// Applies a primitive by name. Kinds: matmul, add, add_bias, scale, relu,
/// sigmoid, elementwise_mul, conv1d, global_maxpool, batchnorm, dropout,
/// cosine_similarity_matrix, degree_normalize, concat, slice, reshape,
/// repeat, embedding, sum, mean, sum_squares, binary_cross_entropy.
template <typename T>
Tensor<T> apply_primitive(std::string_view kind, const std::vector<Tensor<T>> &in,
                          const Attributes<T> &attrs = {}) {
  auto arity = [&](std::size_t n) {
    if (in.size() != n)
      throw ShapeError(std::string(kind) + ": expected " + std::to_string(n) + " inputs, got " +
                       std::to_string(in.size()));
  };
  if (kind == "matmul") {
    arity(2);
    return ops::matmul(in[0], in[1]);
  }
  if (kind == "add") {
    arity(2);
    return ops::add(in[0], in[1]);
  }
  if (kind == "add_bias") {
    arity(2);
    return ops::add_bias(in[0], in[1]);
  }
  if (kind == "scale") {
    arity(1);
    return ops::scale(in[0], attrs.factor);
  }
  if (kind == "relu") {
    arity(1);
    return ops::relu(in[0]);
  }
  if (kind == "sigmoid") {
    arity(1);
    return ops::sigmoid(in[0]);
  }
  if (kind == "elementwise_mul") {
    arity(2);
    return ops::mul(in[0], in[1]);
  }
  if (kind == "conv1d") {
    arity(3);
    return ops::conv1d(in[0], in[1], in[2]);
  }
  if (kind == "global_maxpool") {
    arity(1);
    return ops::global_maxpool(in[0]);
  }
  if (kind == "batchnorm") {
    arity(3);
    if (!attrs.stats)
      throw Error("batchnorm: running statistics not supplied");
    return ops::batchnorm(in[0], in[1], in[2], *attrs.stats, attrs.training);
  }
  if (kind == "dropout") {
    arity(1);
    if (!attrs.training)
      throw Error("dropout invoked in inference mode");
    if (!attrs.rng)
      throw Error("dropout: random generator not supplied");
    return ops::dropout(in[0], attrs.rate, *attrs.rng, attrs.training);
  }
  if (kind == "cosine_similarity_matrix") {
    arity(1);
    return ops::cosine_similarity_matrix(in[0]);
  }
  if (kind == "degree_normalize") {
    arity(1);
    return ops::degree_normalize(in[0]);
  }
  if (kind == "concat")
    return ops::concat(in, attrs.axis);
  if (kind == "slice") {
    arity(1);
    return ops::slice(in[0], attrs.axis, attrs.begin, attrs.end);
  }
  if (kind == "reshape") {
    arity(1);
    return ops::reshape(in[0], attrs.shape);
  }
  if (kind == "repeat") {
    arity(1);
    return ops::repeat(in[0], attrs.begin);
  }
  if (kind == "embedding") {
    arity(1);
    return ops::embedding(in[0], attrs.ids, attrs.shape);
  }
  if (kind == "sum") {
    arity(1);
    return ops::sum(in[0]);
  }
  if (kind == "mean") {
    arity(1);
    return ops::mean(in[0]);
  }
  if (kind == "sum_squares") {
    arity(1);
    return ops::sum_squares(in[0]);
  }
  if (kind == "binary_cross_entropy") {
    arity(1);
    return ops::binary_cross_entropy(in[0], attrs.labels);
  }
  throw Error("unknown primitive kind '" + std::string(kind) + "'");
}

} // namespace bridgedpi::ad
