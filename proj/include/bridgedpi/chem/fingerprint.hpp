#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bridgedpi/chem/molecule.hpp"
#include "bridgedpi/error.hpp"

namespace bridgedpi::chem {

/// Fixed-length binary fingerprint.
struct FingerprintBits {
  std::vector<bool> bits;
  std::size_t nbits = 0;
  int radius = 0;

  std::size_t popcount() const noexcept {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), true));
  }
  bool test(std::size_t i) const { return bits.at(i); }
  std::vector<std::size_t> on_bits() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < bits.size(); ++i)
      if (bits[i])
        out.push_back(i);
    return out;
  }
  friend bool operator==(const FingerprintBits &, const FingerprintBits &) = default;
};

// Environment hashing.
//
// All identifiers are 64-bit. `mix` is the splitmix64 finaliser and
// `combine(h, v) = mix(h ^ (v + 0x9e3779b97f4a7c15 + (h << 6) + (h >> 2)))`.
//
//   radius 0: id = fold(kAtomSeed, [atomic number, heavy degree, formal charge
//             (two's complement), total H, aromatic, in ring])
//   radius r: id = fold(combine(kLayerSeed, r), [previous id of the atom,
//             then for each neighbour sorted by (bond code, neighbour id):
//             bond code, neighbour id])
//
// Bond codes are 1, 2, 3 for single/double/triple and 4 for aromatic. An
// identifier sets bit (id mod nbits).
namespace hashing {

inline constexpr std::uint64_t kAtomSeed = 0x4d6f7267616e3030ULL;  // "Morgan00"
inline constexpr std::uint64_t kLayerSeed = 0x456e7669726f6e73ULL; // "Environs"

constexpr std::uint64_t mix(std::uint64_t x) noexcept {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

constexpr std::uint64_t combine(std::uint64_t h, std::uint64_t v) noexcept {
  return mix(h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
}

inline std::uint64_t atom_invariant(const Atom &a) {
  std::uint64_t h = kAtomSeed;
  h = combine(h, static_cast<std::uint64_t>(a.atomic_number));
  h = combine(h, static_cast<std::uint64_t>(a.degree));
  h = combine(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(a.charge)));
  h = combine(h, static_cast<std::uint64_t>(a.hydrogens));
  h = combine(h, a.aromatic ? 1u : 0u);
  h = combine(h, a.in_ring ? 1u : 0u);
  return h;
}

} // namespace hashing

/// Environment identifiers per layer: result[r][atom] for r in [0, radius].
inline std::vector<std::vector<std::uint64_t>> environment_ids(const MolecularGraph &mol,
                                                               int radius) {
  if (radius < 0)
    throw std::invalid_argument("radius must be >= 0");
  const std::size_t n = mol.atoms.size();
  std::vector<std::vector<std::uint64_t>> layers;
  layers.reserve(static_cast<std::size_t>(radius) + 1);

  std::vector<std::uint64_t> ids(n);
  for (std::size_t i = 0; i < n; ++i)
    ids[i] = hashing::atom_invariant(mol.atoms[i]);
  layers.push_back(ids);

  const auto inc = mol.incidence();
  std::vector<std::pair<std::uint64_t, std::uint64_t>> neighbours;
  for (int r = 1; r <= radius; ++r) {
    const auto &prev = layers.back();
    std::vector<std::uint64_t> next(n);
    for (std::size_t i = 0; i < n; ++i) {
      neighbours.clear();
      for (std::size_t b : inc[i]) {
        const auto &bond = mol.bonds[b];
        neighbours.emplace_back(static_cast<std::uint64_t>(bond.order), prev[bond.other(i)]);
      }
      std::sort(neighbours.begin(), neighbours.end());
      std::uint64_t h = hashing::combine(hashing::kLayerSeed, static_cast<std::uint64_t>(r));
      h = hashing::combine(h, prev[i]);
      for (const auto &[code, id] : neighbours) {
        h = hashing::combine(h, code);
        h = hashing::combine(h, id);
      }
      next[i] = h;
    }
    layers.push_back(std::move(next));
  }
  return layers;
}

/// Folded Morgan (circular) fingerprint.
inline FingerprintBits morgan_fingerprint(const MolecularGraph &mol, int radius = 2,
                                          std::size_t nbits = 1024) {
  if (nbits == 0)
    throw std::invalid_argument("nbits must be >= 1");
  FingerprintBits fp{std::vector<bool>(nbits, false), nbits, radius};
  for (const auto &layer : environment_ids(mol, radius))
    for (std::uint64_t id : layer)
      fp.bits[static_cast<std::size_t>(id % nbits)] = true;
  return fp;
}

/// Hex dump: nbits/4 characters, bit 0 is the most significant bit of the
/// first character.
inline std::string to_hex(const FingerprintBits &fp) {
  if (fp.nbits % 4 != 0)
    throw std::invalid_argument("hex dump requires nbits divisible by 4");
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(fp.nbits / 4, '0');
  for (std::size_t c = 0; c < out.size(); ++c) {
    unsigned v = 0;
    for (std::size_t j = 0; j < 4; ++j)
      v = (v << 1) | (fp.bits[c * 4 + j] ? 1u : 0u);
    out[c] = kDigits[v];
  }
  return out;
}

inline FingerprintBits from_hex(std::string_view hex, int radius = 2) {
  FingerprintBits fp{std::vector<bool>(hex.size() * 4, false), hex.size() * 4, radius};
  for (std::size_t c = 0; c < hex.size(); ++c) {
    const char ch = hex[c];
    unsigned v = 0;
    if (ch >= '0' && ch <= '9')
      v = static_cast<unsigned>(ch - '0');
    else if (ch >= 'a' && ch <= 'f')
      v = static_cast<unsigned>(ch - 'a' + 10);
    else if (ch >= 'A' && ch <= 'F')
      v = static_cast<unsigned>(ch - 'A' + 10);
    else
      throw ParseError("invalid hex digit", c);
    for (std::size_t j = 0; j < 4; ++j)
      fp.bits[c * 4 + j] = (v >> (3 - j)) & 1u;
  }
  return fp;
}

} // namespace bridgedpi::chem
