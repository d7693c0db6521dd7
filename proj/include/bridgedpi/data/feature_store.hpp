#pragma once

#include <map>
#include <string>
#include <vector>

#include "bridgedpi/data/dataset.hpp"
#include "bridgedpi/model/inputs.hpp"

namespace bridgedpi::data {

/// Featurises each distinct protein and drug once and hands out per-record
/// input pointers.
class FeatureStore {
public:
  FeatureStore(const model::Featurizer &featurizer, const std::vector<PairRecord> &records) {
    proteins_.reserve(records.size());
    drugs_.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto &r = records[i];
      auto [pit, new_protein] = protein_index_.emplace(r.protein_id, proteins_.size());
      if (new_protein) {
        proteins_.push_back(featurizer.protein(r.protein_sequence));
        protein_seq_.push_back(r.protein_sequence);
      } else if (protein_seq_[pit->second] != r.protein_sequence) {
        throw DataError("record " + std::to_string(i) + ": protein id '" + r.protein_id +
                        "' has conflicting sequences");
      }
      auto [dit, new_drug] = drug_index_.emplace(r.drug_id, drugs_.size());
      if (new_drug) {
        try {
          drugs_.push_back(featurizer.drug(r.smiles));
        } catch (const ParseError &e) {
          throw DataError("record " + std::to_string(i) + ": drug '" + r.drug_id + "': " +
                          e.what());
        }
        drug_smiles_.push_back(r.smiles);
      } else if (drug_smiles_[dit->second] != r.smiles) {
        throw DataError("record " + std::to_string(i) + ": drug id '" + r.drug_id +
                        "' has conflicting SMILES");
      }
      record_protein_.push_back(pit->second);
      record_drug_.push_back(dit->second);
    }
  }

  std::size_t size() const noexcept { return record_protein_.size(); }
  const model::ProteinInput *protein(std::size_t record) const {
    return &proteins_[record_protein_.at(record)];
  }
  const model::DrugInput *drug(std::size_t record) const {
    return &drugs_[record_drug_.at(record)];
  }

  std::vector<const model::ProteinInput *> proteins(const std::vector<std::size_t> &idx) const {
    std::vector<const model::ProteinInput *> out;
    out.reserve(idx.size());
    for (auto i : idx)
      out.push_back(protein(i));
    return out;
  }
  std::vector<const model::DrugInput *> drugs(const std::vector<std::size_t> &idx) const {
    std::vector<const model::DrugInput *> out;
    out.reserve(idx.size());
    for (auto i : idx)
      out.push_back(drug(i));
    return out;
  }

private:
  std::vector<model::ProteinInput> proteins_;
  std::vector<model::DrugInput> drugs_;
  std::vector<std::string> protein_seq_, drug_smiles_;
  std::map<std::string, std::size_t> protein_index_, drug_index_;
  std::vector<std::size_t> record_protein_, record_drug_;
};

} // namespace bridgedpi::data
