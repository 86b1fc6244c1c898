#pragma once

#include "maple/common.hpp"
#include "maple/forest.hpp"

#include <utility>
#include <vector>

namespace maple {

struct WeightEntry {
  std::size_t index = 0;
  double weight = 0.0;
};

/// Local training distribution at a query: sparse, non-negative, sums to one.
struct LocalWeights {
  std::vector<double> query;
  /// Non-zero entries in ascending index order.
  std::vector<WeightEntry> entries;

  double weight(std::size_t index) const;
  double total() const;
  /// Entries ordered by descending weight, ties by ascending index.
  std::vector<WeightEntry> sorted_by_weight() const;
};

/// 1 iff x and x' reach the same leaf of `tree`.
int connection(const RegressionTree& tree, Row x, Row x_other);

/// Per-tree leaf membership of the training rows, built once per fitted ensemble.
class Neighborhoods {
 public:
  Neighborhoods() = default;
  Neighborhoods(const Ensemble& ensemble, const Matrix& X_train);

  std::size_t training_rows() const { return n_; }
  std::size_t trees() const { return members_.size(); }
  const std::vector<std::size_t>& members(std::size_t tree, int leaf) const {
    return members_[tree][static_cast<std::size_t>(leaf)];
  }
  int training_leaf(std::size_t tree, std::size_t row) const { return leaf_of_[tree][row]; }

  /// Leaf reached by x in every tree.
  std::vector<int> route(const Ensemble& ensemble, Row x) const;

  LocalWeights weights(const Ensemble& ensemble, Row x) const;

 private:
  std::size_t n_ = 0;
  std::vector<std::vector<std::vector<std::size_t>>> members_;
  std::vector<std::vector<int>> leaf_of_;
};

/// Weights from scratch; prefer `Neighborhoods` when issuing many queries.
LocalWeights local_weights(const Ensemble& ensemble, const Matrix& X_train, Row x);

/// Weighted Gram matrix X'WX and moment vector X'Wy over every column.
struct WeightedGram {
  Matrix gram;
  Vector moment;
};

WeightedGram weighted_gram(const Matrix& X, const Vector& y, const LocalWeights& w);

/// Solves the ridge-augmented normal equations restricted to `columns` (ascending,
/// containing 0). The ridge applies to every column but 0. Throws singular_system
/// when the system is numerically rank deficient.
Vector solve_weighted_ls(const WeightedGram& g, std::span<const int> columns, double ridge);

/// Dense convenience: argmin sum_i w_i (y_i - b'z_i)^2 + ridge * |b_{1..}|^2.
Vector weighted_least_squares(const Matrix& Z, const Vector& y, const Vector& w, double ridge);

/// b' x restricted to `columns`, summed in column order.
double evaluate_linear(const Vector& beta, std::span<const int> columns, Row x);

double silo_predict(const Ensemble& ensemble, const Matrix& X_train, const Vector& y_train, Row x, double ridge);

}  // namespace maple
