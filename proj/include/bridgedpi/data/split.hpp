#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bridgedpi/data/dataset.hpp"

namespace bridgedpi::data {

/// Index lists into a record vector. `test_seen[i]` tells whether the
/// protein of record test[i] occurs in the training partition; likewise for
/// `valid_seen`.
struct DatasetSplit {
  std::vector<std::size_t> train, valid, test;
  std::vector<bool> valid_seen, test_seen;
};

struct SplitFractions {
  double train = 0.8;
  double valid = 0.1;
  double test = 0.1;
  /// Share of distinct proteins withheld from training entirely.
  double unseen_proteins = 0.2;
};

namespace detail {

inline std::size_t rounded(double x) { return static_cast<std::size_t>(std::llround(x)); }

inline void flag_seen(const std::vector<PairRecord> &records, DatasetSplit &split) {
  std::set<std::string> train_proteins;
  for (auto i : split.train)
    train_proteins.insert(records[i].protein_id);
  split.valid_seen.clear();
  split.test_seen.clear();
  for (auto i : split.valid)
    split.valid_seen.push_back(train_proteins.count(records[i].protein_id) > 0);
  for (auto i : split.test)
    split.test_seen.push_back(train_proteins.count(records[i].protein_id) > 0);
}

} // namespace detail

/// Withholds a seeded subset of proteins from training. Records of withheld
/// proteins all go to test; test is then topped up with records of the
/// remaining proteins (at least one) to its quota, valid is filled to its
/// quota, and the rest train.
inline DatasetSplit split_seen_unseen(const std::vector<PairRecord> &records,
                                      const SplitFractions &f, std::uint64_t seed) {
  const double total = f.train + f.valid + f.test;
  if (std::abs(total - 1.0) > 1e-9 || f.train <= 0.0 || f.valid < 0.0 || f.test <= 0.0)
    throw DataError("split fractions must be non-negative, train/test positive, and sum to 1");
  if (!(f.unseen_proteins > 0.0 && f.unseen_proteins < 1.0))
    throw DataError("unseen protein fraction must lie in (0, 1)");

  auto proteins = distinct_proteins(records);
  if (proteins.size() < 2)
    throw DataError("too few distinct proteins (" + std::to_string(proteins.size()) +
                    ") to withhold any from training");
  std::mt19937_64 rng(seed);
  std::shuffle(proteins.begin(), proteins.end(), rng);
  const std::size_t withheld_count = std::clamp<std::size_t>(
      detail::rounded(f.unseen_proteins * static_cast<double>(proteins.size())), 1,
      proteins.size() - 1);
  const std::set<std::string> withheld(proteins.begin(),
                                       proteins.begin() + static_cast<long>(withheld_count));

  DatasetSplit split;
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < records.size(); ++i)
    (withheld.count(records[i].protein_id) ? split.test : rest).push_back(i);
  std::shuffle(rest.begin(), rest.end(), rng);

  const double n = static_cast<double>(records.size());
  const std::size_t test_quota = detail::rounded(f.test * n);
  const std::size_t valid_quota = detail::rounded(f.valid * n);
  std::size_t pos = 0;
  const std::size_t seen_in_test =
      std::max<std::size_t>(1, test_quota > split.test.size() ? test_quota - split.test.size() : 0);
  for (; pos < rest.size() && pos < seen_in_test; ++pos)
    split.test.push_back(rest[pos]);
  for (std::size_t k = 0; pos < rest.size() && k < valid_quota; ++k, ++pos)
    split.valid.push_back(rest[pos]);
  for (; pos < rest.size(); ++pos)
    split.train.push_back(rest[pos]);
  if (split.train.empty())
    throw DataError("split left the training partition empty");
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.valid.begin(), split.valid.end());
  std::sort(split.test.begin(), split.test.end());
  detail::flag_seen(records, split);
  return split;
}

/// Seeded k-fold partition: fold `fold` is validation, the others train.
/// Folds differ in size by at most one record.
inline DatasetSplit kfold(const std::vector<PairRecord> &records, std::size_t k, std::size_t fold,
                          std::uint64_t seed) {
  if (k < 2 || k > records.size())
    throw DataError("k-fold needs 2 <= k <= record count");
  if (fold >= k)
    throw DataError("fold index " + std::to_string(fold) + " out of range for k = " +
                    std::to_string(k));
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t base = records.size() / k, extra = records.size() % k;
  DatasetSplit split;
  std::size_t start = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    auto &target = f == fold ? split.valid : split.train;
    target.insert(target.end(), order.begin() + static_cast<long>(start),
                  order.begin() + static_cast<long>(start + size));
    start += size;
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.valid.begin(), split.valid.end());
  detail::flag_seen(records, split);
  return split;
}

/// One line per record: index, partition (train/valid/test), seen flag.
inline std::string split_manifest(const DatasetSplit &split, std::size_t record_count) {
  std::vector<std::string> partition(record_count, "unused");
  std::vector<int> seen(record_count, 0);
  for (auto i : split.train) {
    partition.at(i) = "train";
    seen[i] = 1;
  }
  for (std::size_t k = 0; k < split.valid.size(); ++k) {
    partition.at(split.valid[k]) = "valid";
    seen[split.valid[k]] = split.valid_seen[k];
  }
  for (std::size_t k = 0; k < split.test.size(); ++k) {
    partition.at(split.test[k]) = "test";
    seen[split.test[k]] = split.test_seen[k];
  }
  std::ostringstream out;
  for (std::size_t i = 0; i < record_count; ++i)
    out << i << '\t' << partition[i] << '\t' << seen[i] << '\n';
  return out.str();
}

} // namespace bridgedpi::data
