#pragma once

#include <cctype>
#include <cstdlib>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bridgedpi/chem/molecule.hpp"
#include "bridgedpi/error.hpp"

namespace bridgedpi::chem {

class SmilesError : public ParseError {
public:
  using ParseError::ParseError;
};

namespace detail {

// Default valences of the organic subset, lowest first.
inline std::vector<int> default_valences(std::string_view element) {
  if (element == "B") return {3};
  if (element == "C") return {4};
  if (element == "N") return {3, 5};
  if (element == "O") return {2};
  if (element == "P") return {3, 5};
  if (element == "S") return {2, 4, 6};
  if (element == "F" || element == "Cl" || element == "Br" || element == "I") return {1};
  return {};
}

inline bool aromatic_capable(std::string_view element) {
  return element == "B" || element == "C" || element == "N" || element == "O" || element == "P" ||
         element == "S" || element == "Se" || element == "As" || element == "Te";
}

class SmilesParser {
public:
  explicit SmilesParser(std::string_view text) : text_(text) {}

  MolecularGraph parse() {
    // Anything after the first whitespace is a title.
    const auto ws = text_.find_first_of(" \t\r\n");
    if (ws != std::string_view::npos)
      text_ = text_.substr(0, ws);
    if (text_.empty())
      throw SmilesError("empty SMILES", 0);

    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == '(') {
        if (!prev_)
          throw SmilesError("branch without preceding atom", pos_);
        if (pending_bond_)
          throw SmilesError("bond symbol before branch", pending_bond_offset_);
        branches_.push_back({*prev_, pos_});
        branch_has_atom_ = false;
        ++pos_;
      } else if (c == ')') {
        if (branches_.empty())
          throw SmilesError("unbalanced parenthesis", pos_);
        if (!branch_has_atom_ || pending_bond_)
          throw SmilesError("empty branch", pos_);
        prev_ = branches_.back().atom;
        branches_.pop_back();
        ++pos_;
      } else if (c == '-' || c == '=' || c == '#' || c == ':' || c == '/' || c == '\\') {
        if (pending_bond_)
          throw SmilesError("consecutive bond symbols", pos_);
        pending_bond_ = c;
        pending_bond_offset_ = pos_;
        ++pos_;
      } else if (c == '.') {
        if (pending_bond_)
          throw SmilesError("bond symbol before '.'", pending_bond_offset_);
        if (!branches_.empty())
          throw SmilesError("'.' inside branch", pos_);
        prev_.reset();
        ++pos_;
      } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '%') {
        ring_closure();
      } else {
        atom();
      }
    }

    if (!branches_.empty())
      throw SmilesError("unbalanced parenthesis", branches_.back().offset);
    if (!rings_.empty())
      throw SmilesError("unclosed ring closure " + std::to_string(rings_.begin()->first),
                        rings_.begin()->second.offset);
    if (pending_bond_)
      throw SmilesError("dangling bond symbol", pending_bond_offset_);

    fold_explicit_hydrogens();
    finish_atoms();
    return std::move(mol_);
  }

private:
  struct BranchPoint {
    std::size_t atom;
    std::size_t offset;
  };
  struct OpenRing {
    std::size_t atom;
    std::optional<char> bond;
    std::size_t offset;
  };

  std::string_view text_;
  std::size_t pos_ = 0;
  MolecularGraph mol_;
  std::vector<bool> bracket_;
  std::optional<std::size_t> prev_;
  std::optional<char> pending_bond_;
  std::size_t pending_bond_offset_ = 0;
  std::vector<BranchPoint> branches_;
  bool branch_has_atom_ = true;
  std::map<int, OpenRing> rings_;

  static std::optional<BondOrder> order_for(char symbol) {
    switch (symbol) {
    case '-':
    case '/':
    case '\\':
      return BondOrder::single;
    case '=':
      return BondOrder::double_;
    case '#':
      return BondOrder::triple;
    case ':':
      return BondOrder::aromatic;
    default:
      return std::nullopt;
    }
  }

  BondOrder implied_order(std::size_t a, std::size_t b, std::optional<char> symbol) const {
    if (symbol)
      return *order_for(*symbol);
    return mol_.atoms[a].aromatic && mol_.atoms[b].aromatic ? BondOrder::aromatic
                                                           : BondOrder::single;
  }

  void add_bond(std::size_t a, std::size_t b, BondOrder order, std::size_t offset) {
    if (a == b)
      throw SmilesError("atom bonded to itself", offset);
    if (mol_.has_bond(a, b))
      throw SmilesError("duplicate bond", offset);
    mol_.bonds.push_back({a, b, order});
  }

  void ring_closure() {
    const std::size_t start = pos_;
    int number = 0;
    if (text_[pos_] == '%') {
      if (pos_ + 2 >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])) ||
          !std::isdigit(static_cast<unsigned char>(text_[pos_ + 2])))
        throw SmilesError("malformed %nn ring closure", pos_);
      number = (text_[pos_ + 1] - '0') * 10 + (text_[pos_ + 2] - '0');
      pos_ += 3;
    } else {
      number = text_[pos_] - '0';
      ++pos_;
    }
    if (!prev_)
      throw SmilesError("ring closure without preceding atom", start);

    auto bond = pending_bond_;
    pending_bond_.reset();
    auto it = rings_.find(number);
    if (it == rings_.end()) {
      rings_.emplace(number, OpenRing{*prev_, bond, start});
      return;
    }
    const OpenRing open = it->second;
    rings_.erase(it);
    if (open.bond && bond && order_for(*open.bond) != order_for(*bond))
      throw SmilesError("conflicting ring closure bond orders", start);
    const auto symbol = bond ? bond : open.bond;
    add_bond(open.atom, *prev_, implied_order(open.atom, *prev_, symbol), start);
  }

  void atom() {
    const std::size_t start = pos_;
    Atom atom;
    bool bracket = false;
    if (text_[pos_] == '[') {
      bracket = true;
      bracket_atom(atom);
    } else {
      organic_atom(atom);
    }

    const std::size_t index = mol_.atoms.size();
    mol_.atoms.push_back(std::move(atom));
    bracket_.push_back(bracket);
    branch_has_atom_ = true;

    if (prev_) {
      add_bond(*prev_, index, implied_order(*prev_, index, pending_bond_),
               pending_bond_ ? pending_bond_offset_ : start);
    } else if (pending_bond_) {
      throw SmilesError("bond symbol without preceding atom", pending_bond_offset_);
    }
    pending_bond_.reset();
    prev_ = index;
  }

  void organic_atom(Atom &atom) {
    const std::string_view rest = text_.substr(pos_);
    static constexpr std::string_view kTwoLetter[] = {"Cl", "Br"};
    for (auto sym : kTwoLetter) {
      if (rest.substr(0, 2) == sym) {
        atom.element = std::string(sym);
        pos_ += 2;
        atom.atomic_number = atomic_number(atom.element);
        return;
      }
    }
    const char c = rest.front();
    switch (c) {
    case 'B': case 'C': case 'N': case 'O': case 'P': case 'S': case 'F': case 'I':
      atom.element = std::string(1, c);
      break;
    case 'b': case 'c': case 'n': case 'o': case 'p': case 's':
      atom.element = std::string(1, static_cast<char>(std::toupper(c)));
      atom.aromatic = true;
      break;
    default:
      throw SmilesError(std::string("unknown atom symbol '") + c + "'", pos_);
    }
    atom.atomic_number = atomic_number(atom.element);
    ++pos_;
  }

  int read_int() {
    int value = 0;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
      value = value * 10 + (text_[pos_++] - '0');
    return value;
  }

  void bracket_atom(Atom &atom) {
    const std::size_t open = pos_++;
    auto at_end = [&] { return pos_ >= text_.size(); };
    auto unterminated = [&] { return SmilesError("unterminated bracket atom", open); };

    read_int(); // isotope, ignored
    if (at_end())
      throw unterminated();

    const std::size_t symbol_at = pos_;
    const char c = text_[pos_];
    if (std::islower(static_cast<unsigned char>(c))) {
      // Aromatic: two-letter forms first.
      static constexpr std::string_view kAromatic2[] = {"se", "as", "te"};
      std::string_view two = text_.substr(pos_, 2);
      bool matched = false;
      for (auto sym : kAromatic2) {
        if (two == sym) {
          atom.element = {static_cast<char>(std::toupper(sym[0])), sym[1]};
          pos_ += 2;
          matched = true;
          break;
        }
      }
      if (!matched) {
        if (c != 'b' && c != 'c' && c != 'n' && c != 'o' && c != 'p' && c != 's')
          throw SmilesError(std::string("unknown atom symbol '") + c + "'", symbol_at);
        atom.element = std::string(1, static_cast<char>(std::toupper(c)));
        ++pos_;
      }
      atom.aromatic = true;
    } else if (std::isupper(static_cast<unsigned char>(c))) {
      std::string two;
      if (pos_ + 1 < text_.size() && std::islower(static_cast<unsigned char>(text_[pos_ + 1])))
        two = std::string(text_.substr(pos_, 2));
      if (!two.empty() && atomic_number(two) != 0) {
        atom.element = two;
        pos_ += 2;
      } else {
        atom.element = std::string(1, c);
        ++pos_;
      }
    } else {
      throw SmilesError("missing element in bracket atom", symbol_at);
    }
    atom.atomic_number = atomic_number(atom.element);
    if (atom.atomic_number == 0)
      throw SmilesError("unknown atom symbol '" + atom.element + "'", symbol_at);

    // Chirality, ignored.
    if (!at_end() && text_[pos_] == '@') {
      while (!at_end() && text_[pos_] == '@')
        ++pos_;
      while (!at_end() && (std::isupper(static_cast<unsigned char>(text_[pos_])) &&
                           text_[pos_] != 'H'))
        ++pos_;
      read_int();
    }
    if (!at_end() && text_[pos_] == 'H') {
      ++pos_;
      const bool has_digits =
          !at_end() && std::isdigit(static_cast<unsigned char>(text_[pos_]));
      atom.hydrogens = has_digits ? read_int() : 1;
    }
    if (!at_end() && (text_[pos_] == '+' || text_[pos_] == '-')) {
      const char sign = text_[pos_++];
      int magnitude = 1;
      if (!at_end() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        magnitude = read_int();
      } else {
        while (!at_end() && text_[pos_] == sign) {
          ++magnitude;
          ++pos_;
        }
      }
      atom.charge = sign == '+' ? magnitude : -magnitude;
    }
    if (!at_end() && text_[pos_] == ':') {
      ++pos_;
      read_int(); // atom class, ignored
    }
    if (at_end() || text_[pos_] != ']')
      throw unterminated();
    ++pos_;
  }

  // Explicit neutral [H] atoms bonded to exactly one heavy atom become part
  // of that atom's hydrogen count.
  void fold_explicit_hydrogens() {
    const std::size_t n = mol_.atoms.size();
    std::vector<int> degree(n, 0);
    for (const auto &b : mol_.bonds) {
      ++degree[b.begin];
      ++degree[b.end];
    }
    std::vector<bool> remove(n, false);
    for (const auto &b : mol_.bonds) {
      for (auto [h, heavy] : {std::pair{b.begin, b.end}, std::pair{b.end, b.begin}}) {
        const Atom &a = mol_.atoms[h];
        if (a.atomic_number == 1 && a.charge == 0 && a.hydrogens == 0 && degree[h] == 1 &&
            mol_.atoms[heavy].atomic_number != 1 && b.order == BondOrder::single) {
          remove[h] = true;
        }
      }
    }
    if (std::none_of(remove.begin(), remove.end(), [](bool r) { return r; }))
      return;

    std::vector<std::size_t> remap(n, 0);
    MolecularGraph out;
    std::vector<bool> bracket;
    for (std::size_t i = 0; i < n; ++i) {
      if (remove[i])
        continue;
      remap[i] = out.atoms.size();
      out.atoms.push_back(mol_.atoms[i]);
      bracket.push_back(bracket_[i]);
    }
    for (const auto &b : mol_.bonds) {
      if (remove[b.begin]) {
        ++out.atoms[remap[b.end]].hydrogens;
        continue;
      }
      if (remove[b.end]) {
        ++out.atoms[remap[b.begin]].hydrogens;
        continue;
      }
      out.bonds.push_back({remap[b.begin], remap[b.end], b.order});
    }
    // Folded H on an organic-subset atom is on top of its implicit count.
    mol_ = std::move(out);
    bracket_ = std::move(bracket);
  }

  void finish_atoms() {
    std::vector<int> bond_sum(mol_.atoms.size(), 0);
    for (const auto &b : mol_.bonds) {
      const int v = valence_contribution(b.order);
      bond_sum[b.begin] += v;
      bond_sum[b.end] += v;
      ++mol_.atoms[b.begin].degree;
      ++mol_.atoms[b.end].degree;
    }
    for (std::size_t i = 0; i < mol_.atoms.size(); ++i) {
      Atom &a = mol_.atoms[i];
      if (a.aromatic && !aromatic_capable(a.element))
        throw SmilesError("element " + a.element + " cannot be aromatic", 0);
      if (bracket_[i])
        continue;
      // Organic subset: implicit H fill to the lowest default valence that
      // accommodates the bonds. Aromatic atoms spend one valence on the
      // pi system and only use their lowest valence.
      const auto valences = default_valences(a.element);
      const int explicit_h = a.hydrogens;
      const int used = bond_sum[i] + explicit_h + (a.aromatic ? 1 : 0);
      int implicit = 0;
      if (a.aromatic) {
        implicit = std::max(0, valences.front() - used);
      } else {
        for (int v : valences) {
          if (v >= used) {
            implicit = v - used;
            break;
          }
        }
      }
      a.hydrogens = explicit_h + implicit;
    }
    assign_ring_membership(mol_);
  }
};

} // namespace detail

/// Parses a SMILES string into a heavy-atom graph. Supports the organic
/// subset, bracket atoms with charge and explicit H, ring closures (0-9 and
/// %nn), branches, bond symbols and aromatic lowercase atoms. Stereo marks
/// and isotopes are accepted and dropped.
///
/// Throws SmilesError carrying the character offset of the problem.
inline MolecularGraph parse_smiles(std::string_view text) {
  return detail::SmilesParser(text).parse();
}

namespace detail {

inline std::string atom_token(const Atom &a) {
  std::string s = "[";
  if (a.aromatic) {
    s += static_cast<char>(std::tolower(static_cast<unsigned char>(a.element[0])));
    s += a.element.substr(1);
  } else {
    s += a.element;
  }
  if (a.hydrogens > 0) {
    s += 'H';
    if (a.hydrogens > 1)
      s += std::to_string(a.hydrogens);
  }
  if (a.charge != 0) {
    s += a.charge > 0 ? '+' : '-';
    if (std::abs(a.charge) > 1)
      s += std::to_string(std::abs(a.charge));
  }
  s += ']';
  return s;
}

inline char bond_symbol(BondOrder order) {
  switch (order) {
  case BondOrder::single:
    return '-';
  case BondOrder::double_:
    return '=';
  case BondOrder::triple:
    return '#';
  case BondOrder::aromatic:
    return ':';
  }
  return '-';
}

inline std::string ring_label(int n) {
  return n < 10 ? std::to_string(n) : "%" + std::to_string(n);
}

} // namespace detail

/// Writes the graph back as SMILES, visiting atoms depth-first in index
/// order. Every atom is bracketed with its hydrogen count and charge, and
/// every bond symbol is explicit, so re-parsing reproduces the graph.
inline std::string write_smiles(const MolecularGraph &mol) {
  const std::size_t n = mol.atoms.size();
  const auto inc = mol.incidence();
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  // Pass 1: DFS tree; non-tree bonds become ring closures opened at the
  // earlier-visited endpoint.
  std::vector<std::size_t> order(n, kNone), parent_bond(n, kNone);
  std::vector<std::vector<std::size_t>> children(n), ring_open(n), ring_close(n);
  std::vector<bool> tree_bond(mol.bonds.size(), false);
  std::vector<std::size_t> roots;
  std::size_t counter = 0;
  for (std::size_t root = 0; root < n; ++root) {
    if (order[root] != kNone)
      continue;
    roots.push_back(root);
    std::vector<std::pair<std::size_t, std::size_t>> stack{{root, 0}};
    order[root] = counter++;
    while (!stack.empty()) {
      auto &[atom, next] = stack.back();
      if (next == inc[atom].size()) {
        stack.pop_back();
        continue;
      }
      const std::size_t b = inc[atom][next++];
      const std::size_t w = mol.bonds[b].other(atom);
      if (order[w] == kNone) {
        order[w] = counter++;
        parent_bond[w] = b;
        tree_bond[b] = true;
        children[atom].push_back(b);
        stack.push_back({w, 0});
      }
    }
  }
  for (std::size_t b = 0; b < mol.bonds.size(); ++b) {
    if (tree_bond[b])
      continue;
    const auto &bond = mol.bonds[b];
    const bool begin_first = order[bond.begin] < order[bond.end];
    ring_open[begin_first ? bond.begin : bond.end].push_back(b);
    ring_close[begin_first ? bond.end : bond.begin].push_back(b);
  }

  // Pass 2: emit.
  std::string out;
  std::vector<int> ring_number(mol.bonds.size(), 0);
  std::vector<bool> in_use(100, false);
  auto emit = [&](auto &&self, std::size_t atom) -> void {
    out += detail::atom_token(mol.atoms[atom]);
    for (std::size_t b : ring_close[atom]) {
      out += detail::ring_label(ring_number[b]);
      in_use[static_cast<std::size_t>(ring_number[b])] = false;
    }
    for (std::size_t b : ring_open[atom]) {
      int r = 1;
      while (in_use[static_cast<std::size_t>(r)])
        ++r;
      in_use[static_cast<std::size_t>(r)] = true;
      ring_number[b] = r;
      out += detail::bond_symbol(mol.bonds[b].order);
      out += detail::ring_label(r);
    }
    const auto &kids = children[atom];
    for (std::size_t i = 0; i < kids.size(); ++i) {
      const bool last = i + 1 == kids.size();
      if (!last)
        out += '(';
      out += detail::bond_symbol(mol.bonds[kids[i]].order);
      self(self, mol.bonds[kids[i]].other(atom));
      if (!last)
        out += ')';
    }
  };
  for (std::size_t i = 0; i < roots.size(); ++i) {
    if (i > 0)
      out += '.';
    emit(emit, roots[i]);
  }
  return out;
}

} // namespace bridgedpi::chem
