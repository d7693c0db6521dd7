#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bridgedpi/error.hpp"

namespace bridgedpi::protein {

/// Canonical residue alphabet; also defines the lexicographic k-mer order.
inline constexpr std::string_view kAlphabet = "ACDEFGHIKLMNPQRSTVWY";
inline constexpr std::size_t kAlphabetSize = 20;

struct KmerLayout {
  static constexpr std::size_t k1 = 20;
  static constexpr std::size_t k2 = 400;
  static constexpr std::size_t k3 = 8000;
  static constexpr std::size_t offset1 = 0;
  static constexpr std::size_t offset2 = k1;
  static constexpr std::size_t offset3 = k1 + k2;
  static constexpr std::size_t size = k1 + k2 + k3; // 8420

  static constexpr std::array<std::size_t, 3> offsets = {offset1, offset2, offset3};
  static constexpr std::array<std::size_t, 3> lengths = {k1, k2, k3};
};

/// k-mer vector: 1-mer, 2-mer and 3-mer blocks concatenated.
struct KmerVector {
  std::vector<double> values = std::vector<double>(KmerLayout::size, 0.0);

  std::span<const double> block(std::size_t k) const {
    return std::span<const double>(values).subspan(KmerLayout::offsets.at(k - 1),
                                                   KmerLayout::lengths.at(k - 1));
  }
  std::span<double> block(std::size_t k) {
    return std::span<double>(values).subspan(KmerLayout::offsets.at(k - 1),
                                             KmerLayout::lengths.at(k - 1));
  }
};

namespace detail {

inline constexpr std::array<std::int8_t, 256> make_residue_table() {
  std::array<std::int8_t, 256> t{};
  for (auto &v : t)
    v = -1;
  for (std::size_t i = 0; i < kAlphabet.size(); ++i) {
    t[static_cast<unsigned char>(kAlphabet[i])] = static_cast<std::int8_t>(i);
  }
  return t;
}

inline constexpr auto kResidueIndex = make_residue_table();

} // namespace detail

/// Index of a residue in the canonical alphabet, -1 for anything else
/// (nonstandard B, J, O, U, X, Z and non-letters).
constexpr int residue_index(char c) noexcept {
  return detail::kResidueIndex[static_cast<unsigned char>(c)];
}

/// Position of a k-mer within the full 8420-vector.
inline std::size_t kmer_index(std::string_view kmer) {
  std::size_t idx = 0;
  for (char c : kmer) {
    const int r = residue_index(c);
    if (r < 0)
      throw std::invalid_argument("k-mer contains a nonstandard residue");
    idx = idx * kAlphabetSize + static_cast<std::size_t>(r);
  }
  return KmerLayout::offsets.at(kmer.size() - 1) + idx;
}

/// Raw overlapping 1/2/3-mer counts. Any window touching a nonstandard
/// residue is skipped.
inline KmerVector kmer_features(std::string_view sequence) {
  if (sequence.empty())
    throw DataError("empty protein sequence");
  KmerVector out;
  auto &v = out.values;
  const std::size_t n = sequence.size();
  for (std::size_t i = 0; i < n; ++i) {
    const int a = residue_index(sequence[i]);
    if (a < 0)
      continue;
    v[KmerLayout::offset1 + static_cast<std::size_t>(a)] += 1.0;
    if (i + 1 >= n)
      continue;
    const int b = residue_index(sequence[i + 1]);
    if (b < 0)
      continue;
    const std::size_t ab = static_cast<std::size_t>(a) * kAlphabetSize + static_cast<std::size_t>(b);
    v[KmerLayout::offset2 + ab] += 1.0;
    if (i + 2 >= n)
      continue;
    const int c = residue_index(sequence[i + 2]);
    if (c < 0)
      continue;
    v[KmerLayout::offset3 + ab * kAlphabetSize + static_cast<std::size_t>(c)] += 1.0;
  }
  return out;
}

inline constexpr double kZeroVarianceGuard = 1e-12;

/// Standardises each block independently with its population mean and
/// standard deviation. Blocks with std below 1e-12 become all-zero.
inline KmerVector block_normalize(const KmerVector &raw) {
  if (raw.values.size() != KmerLayout::size)
    throw ShapeError("k-mer vector must have length 8420");
  KmerVector out = raw;
  for (std::size_t k = 1; k <= 3; ++k) {
    auto block = out.block(k);
    double mean = 0.0;
    for (double x : block)
      mean += x;
    mean /= static_cast<double>(block.size());
    double var = 0.0;
    for (double x : block)
      var += (x - mean) * (x - mean);
    var /= static_cast<double>(block.size());
    const double sd = std::sqrt(var);
    for (double &x : block)
      x = sd < kZeroVarianceGuard ? 0.0 : (x - mean) / sd;
  }
  return out;
}

/// Character vocabulary for the CNN branches. Id 0 is padding, id 1 is
/// unknown; symbols take ids 2, 3, ... in order.
class Vocabulary {
public:
  static constexpr int kPad = 0;
  static constexpr int kUnknown = 1;

  Vocabulary() { table_.fill(kUnknown); }
  explicit Vocabulary(std::string symbols) : symbols_(std::move(symbols)) {
    table_.fill(kUnknown);
    for (std::size_t i = 0; i < symbols_.size(); ++i)
      table_[static_cast<unsigned char>(symbols_[i])] = static_cast<int>(i) + 2;
  }

  static Vocabulary amino_acids() { return Vocabulary(std::string(kAlphabet)); }
  static Vocabulary smiles() {
    return Vocabulary("#%()+-./0123456789=@ABCDEFGHIKLMNOPRSTVXZ[\\]abcdefgilmnoprstuy");
  }

  int id(char c) const noexcept { return table_[static_cast<unsigned char>(c)]; }
  std::size_t size() const noexcept { return symbols_.size() + 2; }
  const std::string &symbols() const noexcept { return symbols_; }

  friend bool operator==(const Vocabulary &a, const Vocabulary &b) {
    return a.symbols_ == b.symbols_;
  }

private:
  std::string symbols_;
  std::array<int, 256> table_{};
};

struct TokenSequence {
  std::vector<int> ids;       // always max_len long
  std::size_t length = 0;     // tokens before padding
};

/// Maps characters to vocabulary ids, truncating at max_len and padding
/// with id 0.
inline TokenSequence encode_sequence(std::string_view text, std::size_t max_len,
                                     const Vocabulary &vocab) {
  if (max_len == 0)
    throw std::invalid_argument("max_len must be >= 1");
  TokenSequence out;
  out.ids.assign(max_len, Vocabulary::kPad);
  out.length = std::min(text.size(), max_len);
  for (std::size_t i = 0; i < out.length; ++i)
    out.ids[i] = vocab.id(text[i]);
  return out;
}

} // namespace bridgedpi::protein
