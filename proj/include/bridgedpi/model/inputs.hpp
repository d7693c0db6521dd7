#pragma once

#include <string_view>
#include <vector>

#include "bridgedpi/chem/fingerprint.hpp"
#include "bridgedpi/chem/smiles.hpp"
#include "bridgedpi/model/config.hpp"
#include "bridgedpi/protein/features.hpp"

namespace bridgedpi::model {

/// Raw inputs of one protein: normalised k-mer vector and residue tokens.
struct ProteinInput {
  std::vector<double> kmer;
  protein::TokenSequence tokens;
};

/// Raw inputs of one drug: fingerprint bits as 0/1 values and SMILES tokens.
struct DrugInput {
  std::vector<double> fingerprint;
  protein::TokenSequence tokens;
};

/// Turns sequences and SMILES into model inputs for a fixed configuration.
class Featurizer {
public:
  explicit Featurizer(const ModelConfig &config,
                      protein::Vocabulary protein_vocab = protein::Vocabulary::amino_acids(),
                      protein::Vocabulary smiles_vocab = protein::Vocabulary::smiles())
      : config_(config), protein_vocab_(std::move(protein_vocab)),
        smiles_vocab_(std::move(smiles_vocab)) {}

  ProteinInput protein(std::string_view sequence) const {
    ProteinInput in;
    in.kmer = protein::block_normalize(protein::kmer_features(sequence)).values;
    in.tokens = protein::encode_sequence(sequence, config_.protein_max_len, protein_vocab_);
    return in;
  }

  /// Throws chem::SmilesError for unparseable input.
  DrugInput drug(std::string_view smiles) const {
    const auto mol = chem::parse_smiles(smiles);
    const auto fp = chem::morgan_fingerprint(mol, config_.fp_radius, config_.fp_bits);
    DrugInput in;
    in.fingerprint.assign(fp.bits.begin(), fp.bits.end());
    in.tokens = protein::encode_sequence(smiles, config_.smiles_max_len, smiles_vocab_);
    return in;
  }

  const protein::Vocabulary &protein_vocabulary() const noexcept { return protein_vocab_; }
  const protein::Vocabulary &smiles_vocabulary() const noexcept { return smiles_vocab_; }

private:
  ModelConfig config_;
  protein::Vocabulary protein_vocab_;
  protein::Vocabulary smiles_vocab_;
};

} // namespace bridgedpi::model
