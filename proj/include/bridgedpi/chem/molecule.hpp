#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace bridgedpi::chem {

enum class BondOrder : std::uint8_t { single = 1, double_ = 2, triple = 3, aromatic = 4 };

/// Contribution of a bond to its endpoints' valence. Aromatic bonds count 1;
/// the extra aromatic electron is accounted for on the atom.
constexpr int valence_contribution(BondOrder order) noexcept {
  return order == BondOrder::aromatic ? 1 : static_cast<int>(order);
}

struct Atom {
  std::string element;  // capitalised symbol, e.g. "C", "Cl"
  int atomic_number = 0;
  int charge = 0;
  bool aromatic = false;
  int hydrogens = 0;    // implicit + explicit H
  int degree = 0;       // heavy-atom neighbours
  bool in_ring = false;
};

struct Bond {
  std::size_t begin = 0;
  std::size_t end = 0;
  BondOrder order = BondOrder::single;

  std::size_t other(std::size_t atom) const noexcept { return atom == begin ? end : begin; }
};

/// Heavy-atom graph of a molecule.
struct MolecularGraph {
  std::vector<Atom> atoms;
  std::vector<Bond> bonds;

  std::size_t atom_count() const noexcept { return atoms.size(); }
  std::size_t bond_count() const noexcept { return bonds.size(); }

  /// Bond indices incident to each atom, in bond insertion order.
  std::vector<std::vector<std::size_t>> incidence() const {
    std::vector<std::vector<std::size_t>> out(atoms.size());
    for (std::size_t b = 0; b < bonds.size(); ++b) {
      out[bonds[b].begin].push_back(b);
      out[bonds[b].end].push_back(b);
    }
    return out;
  }

  bool has_bond(std::size_t a, std::size_t b) const noexcept {
    for (const auto &bond : bonds)
      if ((bond.begin == a && bond.end == b) || (bond.begin == b && bond.end == a))
        return true;
    return false;
  }
};

namespace detail {

inline constexpr std::array<std::string_view, 118> kElements = {
    "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg", "Al", "Si", "P",
    "S",  "Cl", "Ar", "K",  "Ca", "Sc", "Ti", "V",  "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn",
    "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Y",  "Zr", "Nb", "Mo", "Tc", "Ru", "Rh",
    "Pd", "Ag", "Cd", "In", "Sn", "Sb", "Te", "I",  "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd",
    "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W",  "Re",
    "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th",
    "Pa", "U",  "Np", "Pu", "Am", "Cm", "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db",
    "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og"};

} // namespace detail

/// Atomic number for a capitalised element symbol, 0 when unknown.
inline int atomic_number(std::string_view symbol) noexcept {
  for (std::size_t i = 0; i < detail::kElements.size(); ++i)
    if (detail::kElements[i] == symbol)
      return static_cast<int>(i) + 1;
  return 0;
}

/// Marks atoms lying on at least one cycle. A bond is a ring bond iff it is
/// not a bridge; bridges are found with Tarjan's low-link DFS.
inline void assign_ring_membership(MolecularGraph &mol) {
  const std::size_t n = mol.atoms.size();
  const auto inc = mol.incidence();
  std::vector<int> disc(n, -1), low(n, 0);
  std::vector<bool> bridge(mol.bonds.size(), false);
  int timer = 0;

  // Iterative DFS: (atom, parent bond, next incidence position).
  struct Frame {
    std::size_t atom;
    std::size_t parent_bond;
    std::size_t next;
  };
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  for (std::size_t root = 0; root < n; ++root) {
    if (disc[root] >= 0)
      continue;
    std::vector<Frame> stack{{root, kNone, 0}};
    disc[root] = low[root] = timer++;
    while (!stack.empty()) {
      Frame &f = stack.back();
      if (f.next < inc[f.atom].size()) {
        const std::size_t b = inc[f.atom][f.next++];
        if (b == f.parent_bond)
          continue;
        const std::size_t w = mol.bonds[b].other(f.atom);
        if (disc[w] < 0) {
          disc[w] = low[w] = timer++;
          stack.push_back({w, b, 0});
        } else {
          low[f.atom] = std::min(low[f.atom], disc[w]);
        }
      } else {
        const Frame done = f;
        stack.pop_back();
        if (!stack.empty()) {
          const std::size_t parent = stack.back().atom;
          low[parent] = std::min(low[parent], low[done.atom]);
          if (low[done.atom] > disc[parent])
            bridge[done.parent_bond] = true;
        }
      }
    }
  }

  for (auto &a : mol.atoms)
    a.in_ring = false;
  for (std::size_t b = 0; b < mol.bonds.size(); ++b) {
    if (bridge[b])
      continue;
    mol.atoms[mol.bonds[b].begin].in_ring = true;
    mol.atoms[mol.bonds[b].end].in_ring = true;
  }
}

} // namespace bridgedpi::chem
