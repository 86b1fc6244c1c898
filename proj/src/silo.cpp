#include "maple/silo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace maple {

double LocalWeights::weight(std::size_t index) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), index,
                             [](const WeightEntry& e, std::size_t i) { return e.index < i; });
  return it != entries.end() && it->index == index ? it->weight : 0.0;
}

double LocalWeights::total() const {
  double s = 0.0;
  for (const auto& e : entries) s += e.weight;
  return s;
}

std::vector<WeightEntry> LocalWeights::sorted_by_weight() const {
  auto out = entries;
  std::stable_sort(out.begin(), out.end(), [](const WeightEntry& a, const WeightEntry& b) { return a.weight > b.weight; });
  return out;
}

int connection(const RegressionTree& tree, Row x, Row x_other) {
  return tree.leaf_index(x) == tree.leaf_index(x_other) ? 1 : 0;
}

Neighborhoods::Neighborhoods(const Ensemble& ensemble, const Matrix& X_train)
    : n_(static_cast<std::size_t>(X_train.rows())) {
  require(ensemble.size() >= 1, "ensemble is not fitted");
  members_.resize(ensemble.size());
  leaf_of_.resize(ensemble.size());
  for (std::size_t k = 0; k < ensemble.size(); ++k) {
    const auto& tree = ensemble.trees[k];
    members_[k].resize(tree.leaf_count());
    leaf_of_[k].resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      const int leaf = tree.leaf_index(row_of(X_train, static_cast<Eigen::Index>(i)));
      leaf_of_[k][i] = leaf;
      members_[k][static_cast<std::size_t>(leaf)].push_back(i);
    }
  }
}

std::vector<int> Neighborhoods::route(const Ensemble& ensemble, Row x) const {
  std::vector<int> leaves(ensemble.size());
  for (std::size_t k = 0; k < ensemble.size(); ++k) leaves[k] = ensemble.trees[k].leaf_index(x);
  return leaves;
}

LocalWeights Neighborhoods::weights(const Ensemble& ensemble, Row x) const {
  require(ensemble.size() == members_.size(), "neighborhoods were built for a different ensemble");
  std::vector<double> acc(n_, 0.0);
  for (std::size_t k = 0; k < ensemble.size(); ++k) {
    const auto& m = members_[k][static_cast<std::size_t>(ensemble.trees[k].leaf_index(x))];
    if (m.empty()) fail(ErrorCode::runtime, "query reached a leaf with no training members");
    const double share = 1.0 / static_cast<double>(m.size());
    for (auto i : m) acc[i] += share;
  }
  const double inv_k = 1.0 / static_cast<double>(ensemble.size());
  LocalWeights w;
  w.query.assign(x.begin(), x.end());
  for (std::size_t i = 0; i < n_; ++i)
    if (acc[i] > 0.0) w.entries.push_back({i, acc[i] * inv_k});
  return w;
}

LocalWeights local_weights(const Ensemble& ensemble, const Matrix& X_train, Row x) {
  return Neighborhoods(ensemble, X_train).weights(ensemble, x);
}

WeightedGram weighted_gram(const Matrix& X, const Vector& y, const LocalWeights& w) {
  const auto m = X.cols();
  WeightedGram g{Matrix::Zero(m, m), Vector::Zero(m)};
  for (const auto& e : w.entries) {
    const auto i = static_cast<Eigen::Index>(e.index);
    const auto xi = X.row(i);
    g.gram.noalias() += e.weight * xi.transpose() * xi;
    g.moment.noalias() += (e.weight * y(i)) * xi.transpose();
  }
  return g;
}

Vector solve_weighted_ls(const WeightedGram& g, std::span<const int> columns, double ridge) {
  require(ridge >= 0.0, "ridge must be non-negative");
  require(!columns.empty(), "no columns to fit");
  const auto m = static_cast<Eigen::Index>(columns.size());
  Eigen::MatrixXd a(m, m);
  Eigen::VectorXd b(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto cr = columns[static_cast<std::size_t>(r)];
    b(r) = g.moment(cr);
    for (Eigen::Index c = 0; c < m; ++c) a(r, c) = g.gram(cr, columns[static_cast<std::size_t>(c)]);
    if (cr != 0) a(r, r) += ridge;
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  const auto d = ldlt.vectorD();
  const double scale = d.cwiseAbs().maxCoeff();
  if (ldlt.info() != Eigen::Success || !(scale > 0.0) || d.minCoeff() <= 1e-12 * scale)
    fail(ErrorCode::singular_system, "weighted least-squares system is singular; increase the ridge");
  return ldlt.solve(b);
}

Vector weighted_least_squares(const Matrix& Z, const Vector& y, const Vector& w, double ridge) {
  require(Z.rows() == y.size() && Z.rows() == w.size(), "weighted_least_squares: size mismatch");
  LocalWeights lw;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    require(w(i) >= 0.0, "weights must be non-negative");
    if (w(i) > 0.0) lw.entries.push_back({static_cast<std::size_t>(i), w(i)});
  }
  std::vector<int> columns(static_cast<std::size_t>(Z.cols()));
  std::iota(columns.begin(), columns.end(), 0);
  return solve_weighted_ls(weighted_gram(Z, y, lw), columns, ridge);
}

double evaluate_linear(const Vector& beta, std::span<const int> columns, Row x) {
  double s = 0.0;
  for (std::size_t c = 0; c < columns.size(); ++c) s += beta(static_cast<Eigen::Index>(c)) * x[static_cast<std::size_t>(columns[c])];
  return s;
}

double silo_predict(const Ensemble& ensemble, const Matrix& X_train, const Vector& y_train, Row x, double ridge) {
  const auto w = local_weights(ensemble, X_train, x);
  std::vector<int> columns(static_cast<std::size_t>(X_train.cols()));
  std::iota(columns.begin(), columns.end(), 0);
  const auto beta = solve_weighted_ls(weighted_gram(X_train, y_train, w), columns, ridge);
  return evaluate_linear(beta, columns, x);
}

}  // namespace maple
