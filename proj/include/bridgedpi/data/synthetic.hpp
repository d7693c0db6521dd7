#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "bridgedpi/chem/fingerprint.hpp"
#include "bridgedpi/chem/smiles.hpp"
#include "bridgedpi/data/dataset.hpp"

namespace bridgedpi::data {

/// Parameters of the synthetic interaction set. A pair is positive exactly
/// when the protein contains `motif` and the drug fingerprint has the
/// signature bit of a sulfonyl sulfur set (see synthetic_signature_bit).
struct SyntheticSpec {
  std::size_t pairs = 3000;
  std::size_t proteins = 200;
  std::size_t drugs = 160;
  std::size_t min_length = 60;
  std::size_t max_length = 120;
  std::string motif = "WHCWM";
  std::size_t fp_bits = 1024;
  std::uint64_t seed = 1;
};

inline constexpr const char *kSyntheticGroup = "S(=O)(=O)N";

/// Bit set by the radius-0 environment of the sulfur in S(=O)(=O)N.
inline std::size_t synthetic_signature_bit(std::size_t nbits) {
  const auto mol = chem::parse_smiles("CS(=O)(=O)N");
  return static_cast<std::size_t>(chem::hashing::atom_invariant(mol.atoms[1]) % nbits);
}

inline bool synthetic_drug_flag(const std::string &smiles, std::size_t nbits) {
  return chem::morgan_fingerprint(chem::parse_smiles(smiles), 0, nbits)
      .test(synthetic_signature_bit(nbits));
}

/// The generating rule, usable as an oracle on any record.
inline int synthetic_rule(const PairRecord &r, const SyntheticSpec &spec) {
  return r.protein_sequence.find(spec.motif) != std::string::npos &&
         synthetic_drug_flag(r.smiles, spec.fp_bits);
}

namespace detail {

inline std::string random_residues(std::mt19937_64 &rng, std::size_t len) {
  static constexpr std::string_view alphabet = "ACDEFGHIKLMNPQRSTVWY";
  std::string s(len, 'A');
  for (auto &c : s)
    c = alphabet[rng() % alphabet.size()];
  return s;
}

inline std::string fill_template(const std::string &core, const std::string &a,
                                 const std::string &b) {
  std::string out = core;
  out.replace(out.find("{0}"), 3, a);
  out.replace(out.find("{1}"), 3, b);
  return out;
}

} // namespace detail

/// Generates proteins (half carrying the motif), template drugs (half
/// carrying the sulfonamide group) and a label-balanced set of distinct
/// pairs. Negatives are drawn evenly from the three non-positive
/// (motif, group) combinations.
inline std::vector<PairRecord> make_synthetic(const SyntheticSpec &spec) {
  if (spec.proteins < 4 || spec.drugs < 4 || spec.min_length < spec.motif.size() + 1 ||
      spec.max_length < spec.min_length || spec.motif.empty())
    throw DataError("synthetic settings: need >= 4 proteins and drugs and lengths above the motif");
  std::mt19937_64 rng(spec.seed);

  struct Entity {
    std::string id, text;
    bool flag;
  };
  std::vector<Entity> proteins;
  for (std::size_t i = 0; i < spec.proteins; ++i) {
    const bool motif = i % 2 == 0;
    const std::size_t len = spec.min_length + rng() % (spec.max_length - spec.min_length + 1);
    std::string seq;
    do {
      seq = detail::random_residues(rng, len);
      if (motif)
        seq.replace(rng() % (len - spec.motif.size() + 1), spec.motif.size(), spec.motif);
    } while (!motif && seq.find(spec.motif) != std::string::npos);
    char id[16];
    std::snprintf(id, sizeof id, "P%04zu", i);
    proteins.push_back({id, seq, motif});
  }

  static const std::array<std::string, 6> cores = {"c1cc({0})ccc1{1}", "C1CC({0})CCC1{1}",
                                                   "c1cc({0})ncc1{1}", "C1CC({0})OC1{1}",
                                                   "C1CC({0})NCC1{1}", "c1cc({0})oc1{1}"};
  static const std::array<std::string, 14> subs = {"C",  "CC",    "CCC",      "O",   "OC",
                                                   "N",  "F",     "Cl",       "Br",  "C(=O)O",
                                                   "C#N", "C=C", "C(F)(F)F", "CO"};
  std::vector<Entity> drugs;
  std::set<std::string> used;
  const std::size_t max_attempts = spec.drugs * 1000;
  for (std::size_t attempt = 0; drugs.size() < spec.drugs && attempt < max_attempts; ++attempt) {
    const bool group = drugs.size() % 2 == 0;
    const auto &core = cores[rng() % cores.size()];
    std::string a = subs[rng() % subs.size()], b = subs[rng() % subs.size()];
    if (group)
      (rng() % 2 ? a : b) = kSyntheticGroup;
    const auto smiles = detail::fill_template(core, a, b);
    if (!used.insert(smiles).second)
      continue;
    char id[16];
    std::snprintf(id, sizeof id, "D%04zu", drugs.size());
    drugs.push_back({id, smiles, synthetic_drug_flag(smiles, spec.fp_bits)});
  }
  if (drugs.size() < spec.drugs)
    throw DataError("synthetic settings: not enough distinct drug templates");

  // Candidate pools by (motif, group) combination: index = 2 * motif + group.
  std::array<std::vector<std::size_t>, 2> p_by, d_by;
  for (std::size_t i = 0; i < proteins.size(); ++i)
    p_by[proteins[i].flag].push_back(i);
  for (std::size_t i = 0; i < drugs.size(); ++i)
    d_by[drugs[i].flag].push_back(i);
  for (int k = 0; k < 2; ++k)
    if (p_by[k].empty() || d_by[k].empty())
      throw DataError("synthetic settings: a protein or drug class is empty");

  std::set<std::pair<std::size_t, std::size_t>> chosen;
  std::vector<PairRecord> records;
  const std::size_t positives = spec.pairs / 2;
  auto draw = [&](int motif, int group, std::size_t count) {
    const std::size_t capacity = p_by[motif].size() * d_by[group].size();
    if (count > capacity)
      throw DataError("synthetic settings: too few distinct pairs for the requested size");
    for (std::size_t made = 0; made < count;) {
      const auto p = p_by[motif][rng() % p_by[motif].size()];
      const auto d = d_by[group][rng() % d_by[group].size()];
      if (!chosen.emplace(p, d).second)
        continue;
      records.push_back({proteins[p].id, drugs[d].id, proteins[p].text, drugs[d].text,
                         motif && group ? 1 : 0});
      ++made;
    }
  };
  draw(1, 1, positives);
  const std::size_t negatives = spec.pairs - positives;
  draw(1, 0, negatives / 3 + (negatives % 3 > 0));
  draw(0, 1, negatives / 3 + (negatives % 3 > 1));
  draw(0, 0, negatives / 3);
  std::shuffle(records.begin(), records.end(), rng);
  return records;
}

} // namespace bridgedpi::data
