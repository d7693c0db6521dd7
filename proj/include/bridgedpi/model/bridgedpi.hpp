#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "bridgedpi/ad/ops.hpp"
#include "bridgedpi/model/config.hpp"
#include "bridgedpi/model/inputs.hpp"
#include "bridgedpi/model/layers.hpp"

namespace bridgedpi::model {

/// Per-pair graph over the rows (u, v, n_1 ... n_m), batched on axis 0.
template <typename T> struct PairGraph {
  Tensor<T> nodes;     // Z0: [B, m+2, d]
  Tensor<T> adjacency; // A: cosine similarities [B, m+2, m+2]
  Tensor<T> filtered;  // ReLU(A)
  Tensor<T> operator_; // L = D^-1/2 ReLU(A) D^-1/2
};

/// The interaction network: protein and drug embedding branches, hyper-node
/// graph with residual GNN layers, and the element-wise-product head.
template <typename T> class BridgeDPI {
public:
  explicit BridgeDPI(ModelConfig config) : config_(std::move(config)) {
    config_.validate();
    std::mt19937_64 rng(config_.init_seed);
    const std::size_t d = config_.embed_dim;

    if (config_.use_protein_kmer) {
      std::size_t in = protein::KmerLayout::size;
      for (std::size_t i = 0; i < config_.protein_mlp_widths.size(); ++i) {
        const auto w = config_.protein_mlp_widths[i];
        protein_mlp_.emplace_back(store_, "protein.kmer." + std::to_string(i), in, w, rng);
        in = w;
      }
    }
    if (config_.use_protein_cnn)
      protein_cnn_ = ConvBranch<T>(store_, "protein.cnn", config_.protein_vocab,
                                   config_.token_dim, config_.protein_kernel, d, rng);
    if (config_.use_drug_fp) {
      std::size_t in = config_.fp_bits;
      for (std::size_t i = 0; i < config_.drug_mlp_widths.size(); ++i) {
        const auto w = config_.drug_mlp_widths[i];
        drug_mlp_.emplace_back(store_, "drug.fp." + std::to_string(i), in, w, rng);
        in = w;
      }
    }
    if (config_.use_drug_cnn)
      drug_cnn_ = ConvBranch<T>(store_, "drug.cnn", config_.smiles_vocab, config_.token_dim,
                                config_.drug_kernel, d, rng);

    if (config_.graph_enabled()) {
      if (config_.hyper_nodes > 0)
        bank_ = store_.add("hyper_nodes",
                           init::normal<T>({static_cast<std::size_t>(config_.hyper_nodes), d},
                                           0.1, rng),
                           false);
      for (std::size_t i = 0; i < config_.gnn_layers; ++i)
        gnn_.emplace_back(store_, "gnn." + std::to_string(i), d, d, rng);
    }

    std::size_t in = d;
    for (std::size_t i = 0; i + 1 < config_.head_layers; ++i) {
      head_hidden_.emplace_back(store_, "head." + std::to_string(i), in, config_.hidden_width(),
                                rng);
      in = config_.hidden_width();
    }
    head_out_ = Dense<T>(store_, "head." + std::to_string(config_.head_layers - 1), in, 1, rng);
    dropout_rng_.seed(config_.init_seed ^ 0x64726f706f7574ULL);
  }

  BridgeDPI(const BridgeDPI &) = delete;
  BridgeDPI &operator=(const BridgeDPI &) = delete;
  BridgeDPI(BridgeDPI &&) = default;

  const ModelConfig &config() const noexcept { return config_; }
  ParameterStore<T> &parameters() noexcept { return store_; }
  const ParameterStore<T> &parameters() const noexcept { return store_; }
  const Tensor<T> &hyper_nodes() const noexcept { return bank_; }
  void seed_dropout(std::uint64_t seed) { dropout_rng_.seed(seed); }

  /// u = f_p(k-mer) + CNN(tokens), with disabled branches contributing zero.
  Tensor<T> embed_protein(const std::vector<const ProteinInput *> &batch, Mode mode) const {
    if (batch.empty())
      throw ShapeError("embed_protein: empty batch");
    Tensor<T> u;
    if (config_.use_protein_kmer) {
      auto x = stack_dense(batch, protein::KmerLayout::size,
                           [](const ProteinInput *p) -> const std::vector<double> & {
                             return p->kmer;
                           });
      for (const auto &layer : protein_mlp_)
        x = layer(x, mode, config_.dropout_rate, dropout_rng_);
      u = x;
    }
    if (config_.use_protein_cnn) {
      const auto p = protein_cnn_(stack_tokens(batch, config_.protein_max_len), batch.size(),
                                  config_.protein_max_len);
      u = u.defined() ? ad::ops::add(u, p) : p;
    }
    return u;
  }

  /// v = f_d(fingerprint) + CNN(SMILES tokens).
  Tensor<T> embed_drug(const std::vector<const DrugInput *> &batch, Mode mode) const {
    if (batch.empty())
      throw ShapeError("embed_drug: empty batch");
    Tensor<T> v;
    if (config_.use_drug_fp) {
      auto x = stack_dense(batch, config_.fp_bits,
                           [](const DrugInput *p) -> const std::vector<double> & {
                             return p->fingerprint;
                           });
      for (const auto &layer : drug_mlp_)
        x = layer(x, mode, config_.dropout_rate, dropout_rng_);
      v = x;
    }
    if (config_.use_drug_cnn) {
      const auto c =
          drug_cnn_(stack_tokens(batch, config_.smiles_max_len), batch.size(), config_.smiles_max_len);
      v = v.defined() ? ad::ops::add(v, c) : c;
    }
    return v;
  }

  /// Builds Z0 = (u, v, n_1..n_m), A = cos(Z0), L = D^-1/2 ReLU(A) D^-1/2.
  PairGraph<T> build_pair_graph(const Tensor<T> &u, const Tensor<T> &v) const {
    return build_pair_graph(u, v, bank_);
  }

  /// Same, with an explicit hyper-node bank [m, d] (undefined for m = 0).
  static PairGraph<T> build_pair_graph(const Tensor<T> &u, const Tensor<T> &v,
                                       const Tensor<T> &bank) {
    if (u.rank() != 2 || u.shape() != v.shape())
      throw ShapeError("build_pair_graph: u and v must both be [B, d]");
    const std::size_t b = u.dim(0), d = u.dim(1);
    std::vector<Tensor<T>> rows{ad::ops::reshape(u, {b, 1, d}), ad::ops::reshape(v, {b, 1, d})};
    if (bank.defined()) {
      if (bank.rank() != 2 || bank.dim(1) != d)
        throw ShapeError("build_pair_graph: hyper-node width differs from embedding width");
      rows.push_back(ad::ops::repeat(bank, b));
    }
    PairGraph<T> g;
    g.nodes = ad::ops::concat(rows, 1);
    g.adjacency = ad::ops::cosine_similarity_matrix(g.nodes);
    g.filtered = ad::ops::relu(g.adjacency);
    g.operator_ = ad::ops::degree_normalize(g.filtered);
    return g;
  }

  /// Z^i = ReLU(L Z^{i-1} W^i + b^i) + Z^{i-1}; returns rows 0 and 1.
  std::pair<Tensor<T>, Tensor<T>> gnn_forward(const PairGraph<T> &graph) const {
    return gnn_forward(graph, gnn_);
  }

  static std::pair<Tensor<T>, Tensor<T>> gnn_forward(const PairGraph<T> &graph,
                                                     const std::vector<Dense<T>> &layers) {
    const auto &L = graph.operator_;
    Tensor<T> z = graph.nodes;
    if (L.rank() != 3 || z.rank() != 3 || L.dim(0) != z.dim(0) || L.dim(2) != z.dim(1))
      throw ShapeError("gnn_forward: operator " + ad::to_string(L.shape()) +
                       " does not match nodes " + ad::to_string(z.shape()));
    for (const auto &layer : layers)
      z = ad::ops::add(ad::ops::relu(layer(ad::ops::matmul(L, z))), z);
    const std::size_t b = z.dim(0), d = z.dim(2);
    return {ad::ops::reshape(ad::ops::slice(z, 1, 0, 1), {b, d}),
            ad::ops::reshape(ad::ops::slice(z, 1, 1, 2), {b, d})};
  }

  /// sigmoid(f_o(u_hat * v_hat)) -> [B].
  Tensor<T> predict_pair(const Tensor<T> &u_hat, const Tensor<T> &v_hat, Mode mode) const {
    auto h = ad::ops::mul(u_hat, v_hat);
    for (const auto &layer : head_hidden_)
      h = layer(h, mode, config_.dropout_rate, dropout_rng_);
    const auto logits = head_out_(h);
    return ad::ops::reshape(ad::ops::sigmoid(logits), {logits.dim(0)});
  }

  /// Interaction probabilities for aligned protein/drug batches.
  Tensor<T> forward(const std::vector<const ProteinInput *> &proteins,
                    const std::vector<const DrugInput *> &drugs, Mode mode) const {
    if (proteins.size() != drugs.size())
      throw ShapeError("forward: protein and drug batches differ in size");
    const auto u = embed_protein(proteins, mode);
    const auto v = embed_drug(drugs, mode);
    if (!config_.graph_enabled())
      return predict_pair(u, v, mode);
    const auto [u_hat, v_hat] = gnn_forward(build_pair_graph(u, v));
    return predict_pair(u_hat, v_hat, mode);
  }

  const std::vector<Dense<T>> &gnn_layers() const noexcept { return gnn_; }

private:
  template <typename Item, typename Get>
  static Tensor<T> stack_dense(const std::vector<const Item *> &batch, std::size_t width,
                               Get get) {
    Tensor<T> x({batch.size(), width});
    auto out = x.data_mut();
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto &src = get(batch[i]);
      if (src.size() != width)
        throw ShapeError("input feature width " + std::to_string(src.size()) + ", expected " +
                         std::to_string(width));
      for (std::size_t j = 0; j < width; ++j)
        out[i * width + j] = static_cast<T>(src[j]);
    }
    return x;
  }

  template <typename Item>
  static std::vector<int> stack_tokens(const std::vector<const Item *> &batch, std::size_t len) {
    std::vector<int> ids;
    ids.reserve(batch.size() * len);
    for (const auto *item : batch) {
      if (item->tokens.ids.size() != len)
        throw ShapeError("token sequence length " + std::to_string(item->tokens.ids.size()) +
                         ", expected " + std::to_string(len));
      ids.insert(ids.end(), item->tokens.ids.begin(), item->tokens.ids.end());
    }
    return ids;
  }

  ModelConfig config_;
  ParameterStore<T> store_;
  std::vector<NormDense<T>> protein_mlp_, drug_mlp_, head_hidden_;
  ConvBranch<T> protein_cnn_, drug_cnn_;
  Tensor<T> bank_;
  std::vector<Dense<T>> gnn_;
  Dense<T> head_out_;
  mutable std::mt19937_64 dropout_rng_;
};

} // namespace bridgedpi::model
