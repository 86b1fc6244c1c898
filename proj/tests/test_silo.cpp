#include "maple/data.hpp"
#include "maple/silo.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

using namespace maple;
using fixtures::design;
using fixtures::point;

namespace {

std::vector<int> all_columns(Eigen::Index cols) {
  std::vector<int> c(static_cast<std::size_t>(cols));
  std::iota(c.begin(), c.end(), 0);
  return c;
}

}  // namespace

TEST_SUITE("silo") {

TEST_CASE("weights for one tree") {
  // leaf A = rows {0, 1}, leaf B = row 2
  const Matrix X = design({{0.1}, {0.3}, {0.9}});
  const auto e = fixtures::forest_of({fixtures::stump(1, 0.5, 0, 0)}, X);
  const auto w = local_weights(e, X, point({0.2}));
  CHECK(w.weight(0) == 0.5);
  CHECK(w.weight(1) == 0.5);
  CHECK(w.weight(2) == 0.0);
  CHECK(w.entries.size() == 2);
}

TEST_CASE("weights average over trees") {
  // tree 1 groups the query with rows {0, 1}; tree 2 with rows {1, 2}
  const Matrix X = design({{0.1}, {0.3}, {0.9}});
  const auto e = fixtures::forest_of({fixtures::stump(1, 0.5, 0, 0), fixtures::stump(1, 0.2, 0, 0)}, X);
  const auto w = local_weights(e, X, point({0.3}));
  CHECK(w.weight(0) == 0.25);
  CHECK(w.weight(1) == 0.5);
  CHECK(w.weight(2) == 0.25);
  const auto sorted = w.sorted_by_weight();
  CHECK(sorted[0].index == 1);
  CHECK(sorted[1].index == 0);
  CHECK(sorted[2].index == 2);
}

TEST_CASE("weights are normalized and match the definition") {
  const auto ds = gen_synthetic({SyntheticKind::sil, 120, 4, 0.1, 11});
  EnsembleConfig cfg;
  cfg.n_trees = 25;
  cfg.seed = 2;
  const auto e = fit_random_forest(ds.X, ds.y, cfg);
  const Neighborhoods nb(e, ds.X);
  const Matrix queries = fixtures::uniform_design(1000, 4, 99);
  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    const auto w = nb.weights(e, row_of(queries, q));
    REQUIRE(std::abs(w.total() - 1.0) < 1e-9);
    for (const auto& entry : w.entries) REQUIRE(entry.weight > 0.0);
  }
  for (Eigen::Index q = 0; q < 20; ++q) {
    const auto w = nb.weights(e, row_of(queries, q));
    const auto ref = oracle::weights(e, ds.X, row_of(queries, q));
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(w.weight(i) - ref[i]) < 1e-12);
  }
}

TEST_CASE("positive weight exactly when a leaf is shared") {
  const auto ds = gen_synthetic({SyntheticKind::step, 80, 3, 0.1, 12});
  EnsembleConfig cfg;
  cfg.n_trees = 10;
  const auto e = fit_random_forest(ds.X, ds.y, cfg);
  const auto x = point({0.4, 0.6, 0.1});
  const auto w = local_weights(e, ds.X, x);
  for (std::size_t i = 0; i < 80; ++i) {
    bool shared = false;
    for (const auto& t : e.trees) shared |= connection(t, x, row_of(ds.X, static_cast<Eigen::Index>(i))) == 1;
    CHECK((w.weight(i) > 0.0) == shared);
  }
}

TEST_CASE("weighted sum of responses equals the full-training leaf-mean forest") {
  for (auto kind : {EnsembleKind::rf, EnsembleKind::gbrt}) {
    const auto ds = gen_synthetic({SyntheticKind::sil, 100, 3, 0.2, 13});
    EnsembleConfig cfg;
    cfg.n_trees = 30;
    const auto e = fit_ensemble(kind, ds.X, ds.y, cfg);
    // Reinterpret every tree as a plain averaging forest over the full training set.
    auto averaged = with_full_training_leaf_means(e, ds.X, ds.y);
    const Matrix queries = fixtures::uniform_design(50, 3, 5);
    for (Eigen::Index q = 0; q < queries.rows(); ++q) {
      const auto x = row_of(queries, q);
      const auto w = local_weights(e, ds.X, x);
      double lhs = 0.0;
      for (const auto& entry : w.entries) lhs += entry.weight * ds.y(static_cast<Eigen::Index>(entry.index));
      double rhs = 0.0;
      for (const auto& t : averaged.trees) rhs += t.predict(x);
      rhs /= static_cast<double>(averaged.size());
      CHECK(std::abs(lhs - rhs) < 1e-9);
    }
  }
}

TEST_CASE("connection") {
  const auto leaf = fixtures::single_leaf(0.0);
  CHECK(connection(leaf, point({0.1}), point({0.9})) == 1);
  const auto s = fixtures::stump(1, 0.5, 0, 0);
  CHECK(connection(s, point({0.2}), point({0.7})) == 0);
  CHECK(connection(s, point({0.7}), point({0.2})) == 0);
  CHECK(connection(s, point({0.7}), point({0.7})) == 1);
  const auto ds = gen_synthetic({SyntheticKind::sil, 60, 2, 0.1, 1});
  EnsembleConfig cfg;
  cfg.n_trees = 5;
  cfg.min_samples_leaf = 3;
  const auto e = fit_random_forest(ds.X, ds.y, cfg);
  const Matrix q = fixtures::uniform_design(40, 2, 3);
  for (const auto& t : e.trees)
    for (Eigen::Index i = 0; i + 1 < q.rows(); ++i) {
      CHECK(connection(t, row_of(q, i), row_of(q, i + 1)) == connection(t, row_of(q, i + 1), row_of(q, i)));
      CHECK(connection(t, row_of(q, i), row_of(q, i)) == 1);
    }
}

TEST_CASE("weighted least squares matches the normal equations") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t n = 10 + static_cast<std::size_t>(rep) % 41;
    const std::size_t p = 1 + static_cast<std::size_t>(rep) % 5;
    const Matrix Z = fixtures::uniform_design(n, p, static_cast<std::uint64_t>(rep));
    Vector y(static_cast<Eigen::Index>(n)), w(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      y(i) = 3.0 * u(rng) - 1.0;
      w(i) = u(rng) < 0.2 ? 0.0 : u(rng);
    }
    for (double ridge : {1e-6, 0.5}) {
      const Vector beta = weighted_least_squares(Z, y, w, ridge);
      const auto ref = oracle::normal_equations(Z, y, w, ridge);
      for (std::size_t j = 0; j < ref.size(); ++j) CHECK(std::abs(beta(static_cast<Eigen::Index>(j)) - ref[j]) < 1e-8);
    }
  }
}

TEST_CASE("column-restricted solve matches the dense solve on the sub-design") {
  const Matrix Z = fixtures::uniform_design(40, 4, 8);
  const Vector y = Z.col(2) * 2.0 - Z.col(4);
  Vector w = Vector::Constant(40, 1.0 / 40.0);
  LocalWeights lw;
  for (std::size_t i = 0; i < 40; ++i) lw.entries.push_back({i, 1.0 / 40.0});
  const std::vector<int> cols{0, 2, 4};
  const Vector beta = solve_weighted_ls(weighted_gram(Z, y, lw), cols, 1e-6);
  Matrix sub(40, 3);
  sub << Z.col(0), Z.col(2), Z.col(4);
  const auto ref = oracle::normal_equations(sub, y, w, 1e-6);
  for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(beta(static_cast<Eigen::Index>(j)) - ref[j]) < 1e-8);
}

TEST_CASE("single-leaf ensemble reduces to OLS on exact linear data") {
  const Matrix X = fixtures::uniform_design(30, 1, 4);
  const Vector y = 2.0 * X.col(1);
  const auto e = fixtures::forest_of({fixtures::single_leaf(0.0)}, X);
  for (double x1 : {-1.0, 0.0, 0.25, 0.8, 3.0}) {
    CHECK(std::abs(silo_predict(e, X, y, point({x1}), 0.0) - 2.0 * x1) < 1e-9);
    // weights sum to one, so the default ridge shrinks the slope by about ridge / Var(x1)
    CHECK(std::abs(silo_predict(e, X, y, point({x1}), 1e-6) - 2.0 * x1) < 1e-4);
  }
}

TEST_CASE("weight on a single point") {
  const Matrix X = design({{0.1, 0.4}, {0.6, 0.2}, {0.9, 0.8}});
  Vector y(3);
  y << 1.5, -2.0, 4.0;
  LocalWeights w;
  w.entries = {{1, 1.0}};
  const auto g = weighted_gram(X, y, w);
  const auto cols = all_columns(X.cols());
  CHECK(capture_error([&] { solve_weighted_ls(g, cols, 0.0); }).code == ErrorCode::singular_system);
  const Vector beta = solve_weighted_ls(g, cols, 1e-6);
  CHECK(evaluate_linear(beta, cols, row_of(X, 1)) == doctest::Approx(-2.0).epsilon(1e-4));
}

TEST_CASE("silo on the noiseless linear synthetic recovers the slope") {
  const auto raw = gen_synthetic({SyntheticKind::linear, 400, 5, 0.0, 3});
  const auto sp = split(raw.rows(), 3);
  const auto ds = standardize(raw, sp);
  const auto train = take_rows(ds, sp.train);
  EnsembleConfig cfg;
  cfg.seed = 3;
  const auto e = fit_random_forest(train.X, train.y, cfg);
  const Neighborhoods nb(e, train.X);
  const auto cols = all_columns(train.X.cols());
  // true standardized slope on x1
  const double slope = ds.scaling->scale[1] / ds.scaling->y_scale;
  for (Eigen::Index q = 0; q < 10; ++q) {
    const auto x = row_of(train.X, q);
    const Vector beta = solve_weighted_ls(weighted_gram(train.X, train.y, nb.weights(e, x)), cols, 1e-6);
    CHECK(std::abs(beta(1) - slope) < 0.02);
    for (Eigen::Index j = 2; j < beta.size(); ++j) CHECK(std::abs(beta(j)) < 0.02);
  }
}

TEST_CASE("invalid inputs") {
  const Matrix Z = fixtures::uniform_design(5, 1, 1);
  const Vector y = Vector::Zero(5);
  CHECK(capture_error([&] { weighted_least_squares(Z, y, Vector::Ones(4), 0.1); }).code == ErrorCode::invalid_argument);
  CHECK(capture_error([&] { weighted_least_squares(Z, y, Vector::Ones(5), -1.0); }).code == ErrorCode::invalid_argument);
  CHECK(capture_error([&] { Neighborhoods(Ensemble{}, Z); }).code == ErrorCode::invalid_argument);
}

}  // TEST_SUITE
