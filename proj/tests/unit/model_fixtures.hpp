#pragma once

#include <random>
#include <string>
#include <vector>

#include "bridgedpi/model/bridgedpi.hpp"

namespace bridgedpi::testing {

/// A narrow configuration that keeps full-model checks fast.
inline model::ModelConfig tiny_config(int hyper_nodes = 4) {
  model::ModelConfig c;
  c.embed_dim = 6;
  c.protein_mlp_widths = {10, 6};
  c.drug_mlp_widths = {12, 8, 6};
  c.gnn_layers = 2;
  c.head_layers = 2;
  c.hyper_nodes = hyper_nodes;
  c.dropout_rate = 0.5;
  c.token_dim = 3;
  c.protein_max_len = 12;
  c.smiles_max_len = 10;
  c.fp_bits = 64;
  c.init_seed = 7;
  return c;
}

inline std::string random_protein(std::mt19937_64 &rng, std::size_t len) {
  static const std::string alphabet = "ACDEFGHIKLMNPQRSTVWY";
  std::string s;
  for (std::size_t i = 0; i < len; ++i)
    s += alphabet[rng() % alphabet.size()];
  return s;
}

/// Sets every parameter to random values so tests do not depend on the
/// initialiser (zero biases, unit batch-norm scales and so on).
template <typename T> void randomise(model::BridgeDPI<T> &m, std::uint64_t seed, double scale = 0.5) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (auto &p : m.parameters().params())
    for (auto &x : p.value.values())
      x = static_cast<T>(dist(rng));
  for (auto &[name, buf] : m.parameters().buffers()) {
    const bool var = name.find("running_var") != std::string::npos;
    for (auto &x : buf->values())
      x = static_cast<T>(var ? 0.5 + std::abs(dist(rng)) : dist(rng));
  }
}

/// Copies every tensor present in both models.
template <typename T> void copy_shared(const model::BridgeDPI<T> &from, model::BridgeDPI<T> &to) {
  for (auto &p : to.parameters().params())
    if (from.parameters().contains(p.name))
      p.value.values() = from.parameters().get(p.name).values();
  for (auto &[name, buf] : to.parameters().buffers())
    if (from.parameters().contains(name))
      buf->values() = from.parameters().get(name).values();
}

} // namespace bridgedpi::testing
