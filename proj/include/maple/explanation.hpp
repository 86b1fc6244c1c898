#pragma once

#include "maple/common.hpp"

#include <utility>
#include <vector>

namespace maple {

/// intercept + sum_j coefficient_j * x_j over an explicit feature subset.
struct LinearForm {
  double intercept = 0.0;
  /// (feature index >= 1, coefficient), ascending by feature index.
  std::vector<std::pair<int, double>> coefficients;

  double predict_at(Row x) const {
    double s = intercept;
    for (const auto& [j, c] : coefficients) s += c * x[static_cast<std::size_t>(j)];
    return s;
  }
};

}  // namespace maple
