#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "bridgedpi/error.hpp"

namespace bridgedpi::metrics {

namespace detail {

template <typename Label> void check_labels(std::size_t n_scores, const std::vector<Label> &labels) {
  if (n_scores != labels.size())
    throw DataError("scores and labels differ in length (" + std::to_string(n_scores) + " vs " +
                    std::to_string(labels.size()) + ")");
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (!(labels[i] == Label(0) || labels[i] == Label(1)))
      throw DataError("label at index " + std::to_string(i) + " is not 0 or 1");
}

} // namespace detail

/// Area under the ROC curve via the Mann-Whitney statistic with average
/// ranks for ties (a tied positive/negative pair counts 1/2).
template <typename Score, typename Label>
double roc_auc(const std::vector<Score> &scores, const std::vector<Label> &labels) {
  detail::check_labels(scores.size(), labels);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]])
      ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j); // ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == Label(1)) {
        positive_rank_sum += avg_rank;
        ++positives;
      }
    i = j;
  }
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0)
    throw DataError("AUC undefined: labels contain a single class");
  const double p = static_cast<double>(positives);
  const double u = positive_rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(negatives));
}

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;
};

/// ROC curve with one point per distinct score (descending), starting at
/// (0, 0). Tied scores move diagonally.
template <typename Score, typename Label>
std::vector<RocPoint> roc_curve(const std::vector<Score> &scores, const std::vector<Label> &labels) {
  detail::check_labels(scores.size(), labels);
  const std::size_t n = scores.size();
  const auto positives =
      static_cast<std::size_t>(std::count(labels.begin(), labels.end(), Label(1)));
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0)
    throw DataError("ROC curve undefined: labels contain a single class");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<RocPoint> curve{{0.0, 0.0, std::numeric_limits<double>::infinity()}};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == Label(1) ? tp : fp)++;
      ++j;
    }
    curve.push_back({static_cast<double>(fp) / static_cast<double>(negatives),
                     static_cast<double>(tp) / static_cast<double>(positives),
                     static_cast<double>(scores[order[i]])});
    i = j;
  }
  return curve;
}

inline double trapezoid_area(const std::vector<RocPoint> &curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i)
    area += (curve[i].fpr - curve[i - 1].fpr) * (curve[i].tpr + curve[i - 1].tpr) / 2.0;
  return area;
}

/// Threshold metrics plus AUC. Undefined ratios are reported as 0 with the
/// matching flag set; an undefined AUC is NaN with auc_defined = false.
struct EvalReport {
  double auc = std::numeric_limits<double>::quiet_NaN();
  double acc = 0.0, precision = 0.0, recall = 0.0, f1 = 0.0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0, n = 0;
  bool auc_defined = false;
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
};

/// Prediction rule: positive when score >= threshold.
template <typename Score, typename Label>
EvalReport threshold_metrics(const std::vector<Score> &scores, const std::vector<Label> &labels,
                             double threshold = 0.5) {
  detail::check_labels(scores.size(), labels);
  EvalReport r;
  r.n = scores.size();
  for (std::size_t i = 0; i < r.n; ++i) {
    const bool predicted = static_cast<double>(scores[i]) >= threshold;
    const bool actual = labels[i] == Label(1);
    if (predicted && actual)
      ++r.tp;
    else if (predicted)
      ++r.fp;
    else if (actual)
      ++r.fn;
    else
      ++r.tn;
  }
  auto ratio = [](std::size_t num, std::size_t den, bool &undefined) {
    undefined = den == 0;
    return undefined ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  bool unused = false;
  r.acc = ratio(r.tp + r.tn, r.n, unused);
  r.precision = ratio(r.tp, r.tp + r.fp, r.precision_undefined);
  r.recall = ratio(r.tp, r.tp + r.fn, r.recall_undefined);
  r.f1_undefined = r.precision + r.recall == 0.0;
  r.f1 = r.f1_undefined ? 0.0 : 2.0 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

/// threshold_metrics plus AUC when both classes are present.
template <typename Score, typename Label>
EvalReport evaluate(const std::vector<Score> &scores, const std::vector<Label> &labels,
                    double threshold = 0.5) {
  auto r = threshold_metrics(scores, labels, threshold);
  if (r.tp + r.fn > 0 && r.fp + r.tn > 0) {
    r.auc = roc_auc(scores, labels);
    r.auc_defined = true;
  }
  return r;
}

inline std::string csv_header() { return "stratum,n,auc,acc,precision,recall,f1,tp,fp,tn,fn"; }

inline std::string csv_row(const std::string &stratum, const EvalReport &r) {
  std::ostringstream out;
  out << std::setprecision(10) << stratum << ',' << r.n << ',';
  if (r.auc_defined)
    out << r.auc;
  else
    out << "NA";
  out << ',' << r.acc << ',' << r.precision << ',' << r.recall << ',' << r.f1 << ',' << r.tp << ','
      << r.fp << ',' << r.tn << ',' << r.fn;
  return out.str();
}

/// Fixed-width table; undefined values are marked with '*' or shown as NA.
inline std::string format_table(const std::vector<std::pair<std::string, EvalReport>> &rows) {
  std::ostringstream out;
  out << std::left << std::setw(10) << "stratum" << std::right << std::setw(7) << "n"
      << std::setw(9) << "AUC" << std::setw(9) << "ACC" << std::setw(10) << "Prec"
      << std::setw(9) << "Recall" << std::setw(9) << "F1" << '\n';
  auto cell = [&](double v, bool undefined, int width) {
    std::ostringstream c;
    c << std::fixed << std::setprecision(4) << v << (undefined ? "*" : "");
    out << std::setw(width) << c.str();
  };
  for (const auto &[name, r] : rows) {
    out << std::left << std::setw(10) << name << std::right << std::setw(7) << r.n;
    if (r.auc_defined)
      cell(r.auc, false, 9);
    else
      out << std::setw(9) << "NA";
    cell(r.acc, r.n == 0, 9);
    cell(r.precision, r.precision_undefined, 10);
    cell(r.recall, r.recall_undefined, 9);
    cell(r.f1, r.f1_undefined, 9);
    out << '\n';
  }
  return out.str();
}

} // namespace bridgedpi::metrics
