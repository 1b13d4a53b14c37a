// Central finite-difference check of an analytic gradient.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "pico/error.hpp"

namespace pico {

// Evaluates the loss at `params`; when `grad` is non-null also writes the
// analytic gradient (same length as params) into it.
using LossClosure = std::function<double(std::span<const double> params, std::vector<double>* grad)>;

struct GradCheckOptions {
  double tolerance = 1e-4;
  double step = 1e-5;
  // Relative error is |a - n| / max(|a|, |n|, denominator_floor).
  double denominator_floor = 1e-6;
  std::size_t max_coordinates = 10000;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_parameter_index = 0;
  std::size_t coordinates_checked = 0;
  bool passed = true;
};

inline double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

inline GradCheckReport gradient_check(const LossClosure& loss, std::vector<double> params,
                                      const GradCheckOptions& options = {}) {
  std::vector<double> analytic(params.size(), 0.0);
  const double first = loss(params, &analytic);
  const double second = loss(params, nullptr);
  if (first != second) {
    throw DeterminismError("gradient_check: loss closure is not deterministic");
  }

  std::vector<std::size_t> coords(params.size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (coords.size() > options.max_coordinates) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(options.max_coordinates);
    std::sort(coords.begin(), coords.end());
  }

  GradCheckReport report;
  for (std::size_t idx : coords) {
    const double saved = params[idx];
    params[idx] = saved + options.step;
    const double up = loss(params, nullptr);
    params[idx] = saved - options.step;
    const double down = loss(params, nullptr);
    params[idx] = saved;
    const double numeric = (up - down) / (2.0 * options.step);
    const double err = relative_error(analytic[idx], numeric, options.denominator_floor);
    if (err > report.max_relative_error || report.coordinates_checked == 0) {
      report.max_relative_error = err;
      report.worst_parameter_index = idx;
    }
    ++report.coordinates_checked;
  }
  report.passed = report.max_relative_error < options.tolerance;
  return report;
}

}  // namespace pico
