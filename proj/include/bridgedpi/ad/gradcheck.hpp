#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "bridgedpi/ad/tensor.hpp"

namespace bridgedpi::ad {

struct GradCheckOptions {
  double step = 1e-6;
  /// Coordinates sampled per parameter; 0 checks every coordinate.
  std::size_t max_coords_per_param = 0;
  std::uint64_t seed = 0;
  /// Coordinates for which this returns false are skipped (kink exclusion).
  std::function<bool(std::size_t param, std::size_t coord)> include;
  /// Coordinates whose analytic and numeric gradients are both below this
  /// magnitude are counted in `negligible` instead of being compared.
  double min_magnitude = 0.0;
};

struct ParamGradError {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t negligible = 0;
};

struct GradCheckReport {
  std::vector<ParamGradError> params;
  double max_rel_error = 0.0;

  bool passed(double tolerance) const { return max_rel_error <= tolerance; }
};

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

/// Compares reverse-mode gradients of a scalar function against central
/// differences (f(x+h) - f(x-h)) / 2h. The function must be deterministic;
/// two plain evaluations that disagree raise an error.
template <typename T>
GradCheckReport finite_difference_check(const std::function<Tensor<T>()> &fn,
                                        std::vector<std::pair<std::string, Tensor<T>>> params,
                                        const GradCheckOptions &options = {}) {
  const double base_a = static_cast<double>(fn().item());
  const double base_b = static_cast<double>(fn().item());
  if (base_a != base_b)
    throw Error("finite_difference_check: function is not deterministic");

  for (auto &[name, p] : params) {
    p.set_requires_grad(true);
    p.clear_grad();
  }
  {
    Tape<T> tape;
    Tensor<T> out;
    {
      typename Tape<T>::Recording rec(tape);
      out = fn();
    }
    tape.backward(out);
  }

  GradCheckReport report;
  std::mt19937_64 rng(options.seed);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto &[name, p] = params[pi];
    std::vector<T> analytic(p.size(), T{0});
    if (p.has_grad())
      std::copy(p.grad().begin(), p.grad().end(), analytic.begin());

    std::vector<std::size_t> coords(p.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.max_coords_per_param && coords.size() > options.max_coords_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coords_per_param);
      std::sort(coords.begin(), coords.end());
    }

    ParamGradError entry{name, 0.0, 0};
    auto values = p.data_mut();
    for (std::size_t c : coords) {
      if (options.include && !options.include(pi, c))
        continue;
      const T saved = values[c];
      values[c] = static_cast<T>(static_cast<double>(saved) + options.step);
      const double plus = static_cast<double>(fn().item());
      values[c] = static_cast<T>(static_cast<double>(saved) - options.step);
      const double minus = static_cast<double>(fn().item());
      values[c] = saved;
      const double numeric = (plus - minus) / (2.0 * options.step);
      if (std::abs(numeric) < options.min_magnitude &&
          std::abs(static_cast<double>(analytic[c])) < options.min_magnitude) {
        ++entry.negligible;
        continue;
      }
      entry.max_rel_error =
          std::max(entry.max_rel_error, relative_error(static_cast<double>(analytic[c]), numeric));
      ++entry.checked;
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.params.push_back(std::move(entry));
  }
  return report;
}

} // namespace bridgedpi::ad
