#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "bridgedpi/error.hpp"

namespace bridgedpi::model {

/// Architecture hyperparameters. Defaults follow the published widths;
/// hyper_nodes = -1 removes the graph stage entirely.
struct ModelConfig {
  std::size_t embed_dim = 128;
  std::vector<std::size_t> protein_mlp_widths{1024, 128};
  std::vector<std::size_t> drug_mlp_widths{1024, 256, 128};
  std::size_t gnn_layers = 3;
  std::size_t head_layers = 2;
  std::size_t head_hidden = 0; // 0: embed_dim
  int hyper_nodes = 64;
  double dropout_rate = 0.5;

  bool use_protein_kmer = true;
  bool use_protein_cnn = true;
  bool use_drug_fp = true;
  bool use_drug_cnn = true;

  std::size_t token_dim = 64;
  std::size_t protein_kernel = 7;
  std::size_t drug_kernel = 5;
  std::size_t protein_max_len = 1024;
  std::size_t smiles_max_len = 128;
  std::size_t protein_vocab = 22;
  std::size_t smiles_vocab = 64;

  int fp_radius = 2;
  std::size_t fp_bits = 1024;

  std::uint64_t init_seed = 0;

  bool graph_enabled() const noexcept { return hyper_nodes >= 0; }
  std::size_t hidden_width() const noexcept { return head_hidden ? head_hidden : embed_dim; }

  void validate() const {
    auto fail = [](const std::string &what) { throw ConfigError("invalid model config: " + what); };
    if (embed_dim == 0)
      fail("embed_dim must be positive");
    if (hyper_nodes < -1)
      fail("hyper_nodes must be >= -1");
    if (!use_protein_kmer && !use_protein_cnn)
      fail("at least one protein branch must be enabled");
    if (!use_drug_fp && !use_drug_cnn)
      fail("at least one drug branch must be enabled");
    if (use_protein_kmer && (protein_mlp_widths.empty() || protein_mlp_widths.back() != embed_dim))
      fail("last protein MLP width must equal embed_dim");
    if (use_drug_fp && (drug_mlp_widths.empty() || drug_mlp_widths.back() != embed_dim))
      fail("last drug MLP width must equal embed_dim");
    for (auto w : protein_mlp_widths)
      if (w == 0)
        fail("zero protein MLP width");
    for (auto w : drug_mlp_widths)
      if (w == 0)
        fail("zero drug MLP width");
    if (head_layers == 0)
      fail("head_layers must be >= 1");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
      fail("dropout_rate must lie in [0, 1)");
    if (token_dim == 0 || protein_kernel == 0 || drug_kernel == 0)
      fail("token_dim and kernel widths must be positive");
    if (protein_max_len == 0 || smiles_max_len == 0)
      fail("max lengths must be positive");
    if (protein_vocab < 2 || smiles_vocab < 2)
      fail("vocabularies need pad and unknown entries");
    if (fp_radius < 0)
      fail("fp_radius must be >= 0");
    if (fp_bits == 0 || (fp_bits & (fp_bits - 1)) != 0)
      fail("fp_bits must be a power of two");
  }
};

} // namespace bridgedpi::model
