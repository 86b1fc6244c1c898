#include "maple/data.hpp"
#include "maple/eval.hpp"
#include "maple/forest.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace maple;
using fixtures::design;
using fixtures::point;

namespace {

EnsembleConfig all_features(std::size_t p, std::size_t msl = 10) {
  EnsembleConfig c;
  c.max_features = p;
  c.min_samples_leaf = msl;
  return c;
}

bool same_structure(const RegressionTree& a, const RegressionTree& b) {
  if (a.nodes.size() != b.nodes.size() || a.leaf_values != b.leaf_values) return false;
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    const auto& x = a.nodes[i];
    const auto& y = b.nodes[i];
    if (x.feature != y.feature || x.threshold != y.threshold || x.left != y.left || x.right != y.right ||
        x.leaf_id != y.leaf_id)
      return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("forest") {

TEST_CASE("resolve_config defaults") {
  const auto rf = resolve_config({}, EnsembleKind::rf, 12);
  CHECK(rf.n_trees == 100);
  CHECK(rf.min_samples_leaf == 10);
  CHECK(rf.max_features == 4);
  CHECK_FALSE(rf.max_depth);
  CHECK(resolve_config({}, EnsembleKind::rf, 2).max_features == 1);
  const auto gb = resolve_config({}, EnsembleKind::gbrt, 12);
  CHECK(gb.max_features == 12);
  CHECK(gb.max_depth == 3u);
  CHECK(gb.learning_rate == 0.1);
  EnsembleConfig zero;
  zero.n_trees = 0;
  CHECK(capture_error([&] { resolve_config(zero, EnsembleKind::gbrt, 3); }).code == ErrorCode::invalid_argument);
}

TEST_CASE("constant response gives a single leaf with zero root reduction") {
  const Matrix X = fixtures::uniform_design(30, 3, 1);
  const Vector y = Vector::Constant(30, 2.5);
  std::mt19937_64 rng(0);
  const std::vector<std::size_t> rows{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20, 21};
  const auto tree = fit_tree(X, y, rows, all_features(3, 1), rng);
  CHECK(tree.nodes.size() == 1);
  CHECK(tree.leaf_values == std::vector<double>{2.5});
  CHECK(tree.root_split_feature == -1);
  CHECK(tree.root_impurity_reduction == 0.0);
}

TEST_CASE("separable 1-D data splits at the midpoint") {
  const Matrix X = design({{0.0}, {0.1}, {0.9}, {1.0}});
  Vector y(4);
  y << 0, 0, 1, 1;
  std::mt19937_64 rng(0);
  const std::vector<std::size_t> rows{0, 1, 2, 3};
  const auto tree = fit_tree(X, y, rows, all_features(1, 1), rng);
  REQUIRE(tree.nodes.size() == 3);
  CHECK(tree.root_split_feature == 1);
  CHECK(tree.nodes[0].threshold == doctest::Approx(0.5));
  CHECK(tree.predict(point({0.05})) == 0.0);
  CHECK(tree.predict(point({0.95})) == 1.0);
  // Δ = 4 * Var = 1, normalized by the 4 root rows
  CHECK(tree.root_impurity_reduction == doctest::Approx(0.25));
}

TEST_CASE("ties go to the lowest feature") {
  // features 1 and 2 identical: both give the same reduction
  const Matrix X = design({{0.0, 0.0}, {0.2, 0.2}, {0.8, 0.8}, {1.0, 1.0}});
  Vector y(4);
  y << 0, 0, 1, 1;
  std::mt19937_64 rng(0);
  const std::vector<std::size_t> rows{0, 1, 2, 3};
  CHECK(fit_tree(X, y, rows, all_features(2, 1), rng).root_split_feature == 1);
}

TEST_CASE("min_samples_leaf and max_depth stop growth") {
  const auto ds = gen_synthetic({SyntheticKind::linear, 80, 2, 0.0, 3});
  std::vector<std::size_t> rows(80);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  std::mt19937_64 rng(0);
  auto cfg = all_features(2, 10);
  auto tree = fit_tree(ds.X, ds.y, rows, cfg, rng);
  tree.count_members(ds.X);
  for (auto c : tree.leaf_counts) CHECK(c >= 10);
  cfg.max_depth = 1;
  const auto stump = fit_tree(ds.X, ds.y, rows, cfg, rng);
  CHECK(stump.leaf_count() == 2);
  CHECK(capture_error([&] { fit_tree(ds.X, ds.y, std::vector<std::size_t>{}, cfg, rng); }).code ==
        ErrorCode::invalid_argument);
}

TEST_CASE("leaf_index routing") {
  const auto leaf = fixtures::single_leaf(3.0);
  CHECK(leaf.leaf_index(point({0.1})) == 0);
  CHECK(leaf.leaf_index(point({123.0})) == 0);
  const auto s = fixtures::stump(1, 0.5, -1.0, 1.0);
  CHECK(leaf_index(s, point({0.2})) == 0);
  CHECK(leaf_index(s, point({0.7})) == 1);
  CHECK(leaf_index(s, point({0.5})) == 0);
}

TEST_CASE("ensemble of constant trees predicts the constant") {
  const Matrix X = design({{0.0}, {1.0}});
  auto e = fixtures::forest_of({fixtures::single_leaf(4.0), fixtures::single_leaf(4.0)}, X);
  CHECK(predict_ensemble(e, point({0.3})) == 4.0);
}

TEST_CASE("root split matches an exhaustive search") {
  for (auto kind : {SyntheticKind::linear, SyntheticKind::sil, SyntheticKind::step}) {
    const auto ds = gen_synthetic({kind, 120, 4, 0.1, 21});
    auto cfg = all_features(4, 5);
    cfg.n_trees = 12;
    cfg.seed = 4;
    const auto e = fit_random_forest(ds.X, ds.y, cfg);
    for (const auto& tree : e.trees) {
      const auto ref = oracle::best_split(ds.X, ds.y, tree.sample_rows, 5);
      CHECK(tree.root_split_feature == ref.feature);
      CHECK(tree.nodes[0].threshold == doctest::Approx(ref.threshold).epsilon(1e-12));
      CHECK(std::abs(tree.root_impurity_reduction - ref.reduction / static_cast<double>(tree.sample_rows.size())) <
            1e-9);
    }
  }
}

TEST_CASE("first boosted tree's root split matches an exhaustive search on residuals") {
  const auto ds = gen_synthetic({SyntheticKind::sil, 90, 3, 0.1, 6});
  EnsembleConfig cfg;
  cfg.n_trees = 1;
  cfg.min_samples_leaf = 5;
  const auto e = fit_gbrt(ds.X, ds.y, cfg);
  const Vector residual = ds.y.array() - ds.y.mean();
  std::vector<std::size_t> rows(90);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  const auto ref = oracle::best_split(ds.X, residual, rows, 5);
  CHECK(e.trees[0].root_split_feature == ref.feature);
  CHECK(std::abs(e.trees[0].root_impurity_reduction - ref.reduction / 90.0) < 1e-9);
}

TEST_CASE("noiseless step data: root splits on the active feature") {
  const auto ds = gen_synthetic({SyntheticKind::step, 200, 5, 0.0, 7});
  auto cfg = all_features(5);
  cfg.seed = 7;
  const auto e = fit_random_forest(ds.X, ds.y, cfg);
  std::size_t active = 0;
  for (const auto& t : e.trees) active += t.root_split_feature == 1;
  CHECK(active >= 95);
}

TEST_CASE("one tree without bootstrap equals a directly grown tree") {
  const auto ds = gen_synthetic({SyntheticKind::sil, 60, 3, 0.1, 2});
  auto cfg = all_features(3, 5);
  cfg.n_trees = 1;
  cfg.bootstrap = false;
  cfg.seed = 9;
  const auto e = fit_random_forest(ds.X, ds.y, cfg);
  std::mt19937_64 rng(9);
  std::vector<std::size_t> rows(60);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  const auto tree = fit_tree(ds.X, ds.y, rows, resolve_config(cfg, EnsembleKind::rf, 3), rng);
  for (Eigen::Index i = 0; i < 60; ++i) CHECK(e.predict(row_of(ds.X, i)) == tree.predict(row_of(ds.X, i)));
}

TEST_CASE("fits are deterministic and independent of the thread count") {
  const auto ds = gen_synthetic({SyntheticKind::linear, 100, 5, 0.1, 3});
  EnsembleConfig cfg;
  cfg.n_trees = 20;
  cfg.seed = 5;
  const auto a = fit_random_forest(ds.X, ds.y, cfg);
  cfg.threads = 3;
  const auto b = fit_random_forest(ds.X, ds.y, cfg);
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(same_structure(a.trees[k], b.trees[k]));
  cfg.seed = 6;
  const auto c = fit_random_forest(ds.X, ds.y, cfg);
  bool any_diff = false;
  for (std::size_t k = 0; k < a.size(); ++k) any_diff |= !same_structure(a.trees[k], c.trees[k]);
  CHECK(any_diff);
}

TEST_CASE("random forest fits the linear synthetic") {
  const auto raw = gen_synthetic({SyntheticKind::linear, 200, 5, 0.1, 1});
  const auto sp = split(raw.rows(), 1);
  const auto ds = standardize(raw, sp);
  EnsembleConfig cfg;
  cfg.max_features = 5;
  cfg.seed = 1;
  const auto e = fit_random_forest(ds, sp, cfg);
  const auto test = take_rows(ds, sp.test);
  Vector pred(test.X.rows());
  for (Eigen::Index i = 0; i < pred.size(); ++i) pred(i) = e.predict(row_of(test.X, i));
  CHECK(rmse(pred, test.y) < 0.35);
}

TEST_CASE("too few rows for min_samples_leaf") {
  const auto ds = gen_synthetic({SyntheticKind::linear, 15, 2, 0.1, 1});
  EnsembleConfig cfg;
  CHECK(capture_error([&] { fit_random_forest(ds.X, ds.y, cfg); }).code == ErrorCode::invalid_argument);
  CHECK(capture_error([&] { fit_gbrt(ds.X, ds.y, cfg); }).code == ErrorCode::invalid_argument);
}

TEST_CASE("gbrt: one step with unit learning rate") {
  const auto ds = gen_synthetic({SyntheticKind::step, 80, 2, 0.1, 4});
  EnsembleConfig cfg;
  cfg.n_trees = 1;
  cfg.learning_rate = 1.0;
  const auto e = fit_gbrt(ds.X, ds.y, cfg);
  CHECK(e.gbrt_base == doctest::Approx(ds.y.mean()));
  for (Eigen::Index i = 0; i < 80; ++i)
    CHECK(e.predict(row_of(ds.X, i)) == doctest::Approx(ds.y.mean() + e.trees[0].predict(row_of(ds.X, i))));
}

TEST_CASE("gbrt: zero learning rate predicts the training mean") {
  const auto ds = gen_synthetic({SyntheticKind::sil, 60, 3, 0.1, 4});
  EnsembleConfig cfg;
  cfg.n_trees = 5;
  cfg.learning_rate = 0.0;
  const auto e = fit_gbrt(ds.X, ds.y, cfg);
  for (Eigen::Index i = 0; i < 60; ++i) CHECK(e.predict(row_of(ds.X, i)) == doctest::Approx(ds.y.mean()));
}

TEST_CASE("gbrt: training error never increases across rounds") {
  const auto ds = gen_synthetic({SyntheticKind::sil, 150, 4, 0.1, 8});
  const auto e = fit_gbrt(ds.X, ds.y, {});
  Vector fitted = Vector::Constant(150, e.gbrt_base);
  double previous = rmse(fitted, ds.y);
  for (const auto& tree : e.trees) {
    for (Eigen::Index i = 0; i < 150; ++i) fitted(i) += e.gbrt_learning_rate * tree.predict(row_of(ds.X, i));
    const double now = rmse(fitted, ds.y);
    CHECK(now <= previous + 1e-12);
    previous = now;
  }
}

TEST_CASE("full-training leaf means") {
  const Matrix X = design({{0.1}, {0.2}, {0.8}, {0.9}});
  Vector y(4);
  y << 1, 3, 10, 20;
  const auto e = fixtures::forest_of({fixtures::stump(1, 0.5, 0.0, 0.0)}, X);
  const auto m = with_full_training_leaf_means(e, X, y);
  CHECK(m.trees[0].leaf_values == std::vector<double>{2.0, 15.0});
  CHECK(m.trees[0].leaf_counts == std::vector<std::size_t>{2, 2});
}

TEST_CASE("ensemble kind names") {
  CHECK(parse_ensemble_kind("gbrt") == EnsembleKind::gbrt);
  CHECK(to_string(EnsembleKind::rf) == "rf");
  CHECK(capture_error([] { parse_ensemble_kind("xgb"); }).code == ErrorCode::invalid_argument);
}

}  // TEST_SUITE
