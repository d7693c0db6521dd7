#pragma once

#include <array>
#include <cstddef>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "bridgedpi/error.hpp"

namespace bridgedpi::data {

using WarningSink = std::function<void(const std::string &)>;

inline void default_warning(const std::string &message) {
  std::cerr << "warning: " << message << '\n';
}

/// One labelled protein/drug pair.
struct PairRecord {
  std::string protein_id;
  std::string drug_id;
  std::string protein_sequence;
  std::string smiles;
  int label = 0;
};

inline constexpr std::array<std::string_view, 5> kColumns = {"protein_id", "drug_id",
                                                             "protein_sequence", "smiles", "label"};

namespace detail {

inline std::vector<std::string> split_tabs(const std::string &line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  for (;;) {
    const auto tab = line.find('\t', start);
    cells.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos)
      break;
    start = tab + 1;
  }
  return cells;
}

inline void strip_cr(std::string &line) {
  if (!line.empty() && line.back() == '\r')
    line.pop_back();
}

} // namespace detail

/// Reads a tab-separated dataset with a header naming (at least) the columns
/// protein_id, drug_id, protein_sequence, smiles, label, in any order.
/// Records keep file order; duplicates are retained.
inline std::vector<PairRecord> read_dataset(std::istream &in, const std::string &source,
                                            const WarningSink &warn = default_warning) {
  std::string line;
  if (!std::getline(in, line))
    throw DataError(source + ": missing header row");
  detail::strip_cr(line);
  const auto header = detail::split_tabs(line);
  std::array<std::size_t, 5> col{};
  for (std::size_t c = 0; c < kColumns.size(); ++c) {
    bool found = false;
    for (std::size_t h = 0; h < header.size(); ++h)
      if (header[h] == kColumns[c]) {
        col[c] = h;
        found = true;
      }
    if (!found)
      throw DataError(source + ": missing column '" + std::string(kColumns[c]) + "'");
  }

  std::vector<PairRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (line.empty())
      continue;
    const auto cells = detail::split_tabs(line);
    if (cells.size() != header.size())
      throw DataError(source + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields, found " +
                      std::to_string(cells.size()));
    PairRecord r{cells[col[0]], cells[col[1]], cells[col[2]], cells[col[3]], 0};
    const auto &label = cells[col[4]];
    if (label == "1")
      r.label = 1;
    else if (label != "0")
      throw DataError(source + ":" + std::to_string(line_no) + ": label '" + label +
                      "' is not 0 or 1");
    if (r.protein_id.empty() || r.drug_id.empty())
      throw DataError(source + ":" + std::to_string(line_no) + ": empty identifier");
    records.push_back(std::move(r));
  }
  if (records.empty())
    warn(source + ": dataset has no records");
  return records;
}

inline std::vector<PairRecord> load_dataset(const std::string &path,
                                            const WarningSink &warn = default_warning) {
  std::ifstream in(path);
  if (!in)
    throw DataError("cannot read dataset '" + path + "'");
  return read_dataset(in, path, warn);
}

inline void write_dataset(std::ostream &out, const std::vector<PairRecord> &records) {
  out << "protein_id\tdrug_id\tprotein_sequence\tsmiles\tlabel\n";
  for (const auto &r : records)
    out << r.protein_id << '\t' << r.drug_id << '\t' << r.protein_sequence << '\t' << r.smiles
        << '\t' << r.label << '\n';
}

inline void save_dataset(const std::string &path, const std::vector<PairRecord> &records) {
  std::ofstream out(path);
  if (!out)
    throw DataError("cannot write dataset '" + path + "'");
  write_dataset(out, records);
}

/// Distinct protein ids in order of first appearance. Conflicting sequences
/// under one id are rejected.
inline std::vector<std::string> distinct_proteins(const std::vector<PairRecord> &records) {
  std::map<std::string, const std::string *> seen;
  std::vector<std::string> order;
  for (const auto &r : records) {
    auto [it, inserted] = seen.emplace(r.protein_id, &r.protein_sequence);
    if (inserted)
      order.push_back(r.protein_id);
    else if (*it->second != r.protein_sequence)
      throw DataError("protein id '" + r.protein_id + "' has conflicting sequences");
  }
  return order;
}

} // namespace bridgedpi::data
