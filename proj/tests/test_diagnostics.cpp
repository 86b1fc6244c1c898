#include "fig3.hpp"
#include "maple/diagnostics.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace maple;
using fixtures::point;

namespace {

MapleModel single_leaf_model(const Matrix& X, const Vector& y) {
  Ensemble e;
  e.trees = {fixtures::single_leaf(0.0), fixtures::single_leaf(0.0)};
  std::vector<std::string> names;
  for (Eigen::Index j = 1; j < X.cols(); ++j) names.push_back("x" + std::to_string(j));
  return MapleModel(e, X, y, static_cast<std::size_t>(X.cols() - 1), 1e-6, FitMode::self, names);
}

}  // namespace

TEST_SUITE("diagnostics") {

TEST_CASE("influential points follow weight then index order") {
  const Matrix X = fixtures::uniform_design(10, 2, 1);
  const auto m = single_leaf_model(X, Vector::Zero(10));
  const auto infl = influential_points(m, point({0.5, 0.5}), 3);
  REQUIRE(infl.members.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(infl.members[i].index == i);
  const auto all = influential_points(m, point({0.5, 0.5}), 10);
  double total = 0.0;
  for (const auto& e : all.members) total += e.weight;
  CHECK(total == doctest::Approx(1.0));
  CHECK(capture_error([&] { influential_points(m, point({0.5, 0.5}), 0); }).code == ErrorCode::invalid_argument);
  CHECK(capture_error([&] { influential_points(m, point({0.5, 0.5}), 11); }).code == ErrorCode::invalid_argument);
}

TEST_CASE("influence set is a prefix of the sorted weights") {
  const auto s = fig3::fit(SyntheticKind::sil, 3);
  const auto x = point({0.3, 0.5, 0.5, 0.5, 0.5});
  const auto sorted = s.model.weights(x).sorted_by_weight();
  const auto infl = influential_points(s.model, x, 20);
  for (std::size_t i = 0; i < std::min<std::size_t>(20, sorted.size()); ++i) {
    CHECK(infl.members[i].index == sorted[i].index);
    CHECK(infl.members[i].weight == sorted[i].weight);
  }
}

TEST_CASE("step: members near a high query sit past the last jump") {
  const auto s = fig3::fit(SyntheticKind::step, 1);
  const auto infl = influential_points(s.model, point({0.9, 0.5, 0.5, 0.5, 0.5}), 20);
  for (const auto& e : infl.members) CHECK(s.model.X_train()(static_cast<Eigen::Index>(e.index), 1) >= 2.0 / 3.0);
}

TEST_CASE("box stats") {
  const auto b = box_stats({5, 1, 4, 2, 3});
  CHECK(b.min == 1);
  CHECK(b.q1 == 2);
  CHECK(b.median == 3);
  CHECK(b.q3 == 4);
  CHECK(b.max == 5);
  CHECK(b.mean == 3);
  const auto one = box_stats({2.5});
  CHECK(one.min == 2.5);
  CHECK(one.q1 == 2.5);
  CHECK(one.median == 2.5);
  CHECK(one.max == 2.5);
  const auto four = box_stats({0, 1, 2, 3});
  CHECK(four.q1 == doctest::Approx(0.75));
  CHECK(four.median == doctest::Approx(1.5));
  CHECK(capture_error([] { box_stats({}); }).code == ErrorCode::invalid_argument);
}

TEST_CASE("inactive-feature boxplots resemble the marginal") {
  const auto s = fig3::fit(SyntheticKind::linear, 2);
  const auto infl = influential_points(s.model, point({0.5, 0.5, 0.5, 0.5, 0.5}), 20);
  for (int j = 2; j <= 5; ++j) {
    const auto b = feature_boxplot(infl, s.model.X_train(), j);
    CHECK(b.min <= b.q1);
    CHECK(b.q1 <= b.median);
    CHECK(b.median <= b.q3);
    CHECK(b.q3 <= b.max);
    CHECK(std::abs(b.median - 0.5) <= 0.15 + 1e-12);
  }
  CHECK(capture_error([&] { feature_boxplot(InfluenceSet{}, s.model.X_train(), 1); }).code ==
        ErrorCode::invalid_argument);
}

TEST_CASE("grid diagnostic shape and determinism") {
  const auto s = fig3::fit(SyntheticKind::sil, 4);
  const auto a = fig3::scan(s, 4);
  const auto b = fig3::scan(s, 4);
  REQUIRE(a.per_cell.size() == 11);
  CHECK(a.grid == even_grid(0.0, 1.0, 11));
  for (std::size_t c = 0; c < 11; ++c) {
    CHECK(a.per_cell[c].per_repeat.size() == 10);
    CHECK(a.per_cell[c].pooled.median == b.per_cell[c].pooled.median);
    CHECK(a.per_cell[c].pooled.q1 == b.per_cell[c].pooled.q1);
  }
  GridOptions opt;
  CHECK(capture_error([&] { grid_diagnostic(s.model, s.data.X, 1, {}, opt); }).code == ErrorCode::invalid_argument);
  CHECK(capture_error([&] { grid_diagnostic(s.model, s.data.X, 6, {0.5}, opt); }).code == ErrorCode::invalid_argument);
}

TEST_CASE("uniform-range sampler") {
  const auto s = fig3::fit(SyntheticKind::linear, 5);
  GridOptions opt;
  opt.sampler = SamplerKind::uniform_range;
  opt.repeats = 3;
  const auto gd = grid_diagnostic(s.model, s.data.X, 1, even_grid(0.0, 1.0, 5), opt);
  CHECK(gd.per_cell.size() == 5);
  CHECK(gd.sampler == SamplerKind::uniform_range);
}

TEST_CASE("influence study shapes on one seed") {
  SUBCASE("linear: interior medians track the grid") {
    const auto gd = fig3::scan(fig3::fit(SyntheticKind::linear, 0), 0);
    for (std::size_t c = 1; c + 1 < gd.grid.size(); ++c)
      CHECK(std::abs(gd.per_cell[c].pooled.median - gd.grid[c]) < 0.15);
    CHECK_FALSE(detect_global_pattern(gd).pattern_detected);
  }
  SUBCASE("sil: narrower in the transition") {
    const auto gd = fig3::scan(fig3::fit(SyntheticKind::sil, 0), 0);
    CHECK(gd.per_cell[5].pooled.iqr() < gd.per_cell[0].pooled.iqr());
    CHECK(gd.per_cell[5].pooled.iqr() < gd.per_cell[10].pooled.iqr());
  }
  SUBCASE("step: disjoint across the jump") {
    const auto gd = fig3::scan(fig3::fit(SyntheticKind::step, 0), 0);
    CHECK(iqr_overlap(gd.per_cell[2].pooled, gd.per_cell[5].pooled) < 0.10);
    const auto v = detect_global_pattern(gd);
    CHECK(v.pattern_detected);
    CHECK(v.score > 0.8);
  }
}

TEST_CASE("constant response gives no pattern") {
  auto ds = gen_synthetic({SyntheticKind::linear, 200, 5, 0.0, 1});
  const std::vector<double> flat(200, 0.3);
  SplitAssignment all;
  for (std::size_t i = 0; i < 200; ++i) all.train.push_back(i);
  MapleConfig cfg;
  cfg.fixed_d = 5;
  cfg.ensemble.n_trees = 20;
  const auto m = fit_blackbox(ds, all, flat, cfg);
  GridOptions opt;
  const auto gd = grid_diagnostic(m, ds.X, 1, even_grid(0.0, 1.0, 11), opt);
  const auto v = detect_global_pattern(gd);
  CHECK_FALSE(v.pattern_detected);
  CHECK(v.score == 0.0);
}

TEST_CASE("pattern detector on hand-built cells") {
  auto cell = [](double g, double q1, double med, double q3) {
    GridCell c;
    c.grid_value = g;
    c.pooled = {q1 - 0.05, q1, med, q3, q3 + 0.05, med};
    return c;
  };
  GridDiagnostic smooth;
  GridDiagnostic jump;
  for (int i = 0; i <= 10; ++i) {
    const double g = i / 10.0;
    smooth.grid.push_back(g);
    smooth.per_cell.push_back(cell(g, g - 0.05, g, g + 0.05));
    const double level = g < 0.5 ? 0.25 : 0.75;
    jump.grid.push_back(g);
    jump.per_cell.push_back(cell(g, level - 0.05, level, level + 0.05));
  }
  const auto vs = detect_global_pattern(smooth);
  CHECK(vs.score == doctest::Approx(0.0).epsilon(1e-9));
  CHECK_FALSE(vs.skewed);
  CHECK_FALSE(vs.pattern_detected);
  const auto vj = detect_global_pattern(jump);
  CHECK(vj.pattern_detected);
  CHECK(vj.score > 0.8);
  CHECK(vj.skewed);

  GridDiagnostic two;
  two.grid = {0.0, 1.0};
  two.per_cell = {cell(0, 0, 0, 0), cell(1, 1, 1, 1)};
  CHECK(capture_error([&] { detect_global_pattern(two); }).code == ErrorCode::invalid_argument);
  auto repeated = smooth;
  repeated.grid[3] = repeated.grid[2];
  CHECK(capture_error([&] { detect_global_pattern(repeated); }).code == ErrorCode::invalid_argument);
}

TEST_CASE("iqr overlap") {
  const BoxStats a{0, 0.0, 0.5, 1.0, 1, 0.5};
  const BoxStats b{0, 0.5, 1.0, 1.5, 2, 1.0};
  const BoxStats c{0, 2.0, 2.5, 3.0, 3, 2.5};
  CHECK(iqr_overlap(a, b) == doctest::Approx(0.5));
  CHECK(iqr_overlap(a, c) == 0.0);
  CHECK(iqr_overlap(a, a) == 1.0);
}

TEST_CASE("exemplar fit score") {
  SUBCASE("single-leaf ensemble scores 1 everywhere") {
    const Matrix X = fixtures::uniform_design(15, 2, 3);
    const auto m = single_leaf_model(X, X.col(1));
    const auto w = m.weights(point({0.1, 0.1}));
    CHECK(exemplar_fit_score(m, w, point({0.9, 0.4})) == doctest::Approx(1.0));
  }
  SUBCASE("disjoint support scores 0") {
    const Matrix X = fixtures::design({{0.1}, {0.2}, {0.8}, {0.9}});
    Ensemble e = fixtures::forest_of({fixtures::stump(1, 0.5, 0, 1)}, X);
    MapleModel m(e, X, Vector::LinSpaced(4, 0, 1), 1, 1e-6, FitMode::self, {"a"});
    CHECK(exemplar_fit_score(m, m.weights(point({0.1})), point({0.9})) == 0.0);
    CHECK(exemplar_fit_score(m, m.weights(point({0.1})), point({0.15})) == 1.0);
  }
  SUBCASE("bounded and matching the definition on random instances") {
    const auto s = fig3::fit(SyntheticKind::sil, 6, 120);
    const Matrix q = fixtures::uniform_design(30, 5, 8);
    for (Eigen::Index i = 0; i + 1 < q.rows(); ++i) {
      const auto w = s.model.weights(row_of(q, i));
      const double score = exemplar_fit_score(s.model, w, row_of(q, i + 1));
      CHECK(score >= 0.0);
      CHECK(score <= 1.0);
      double ref = 0.0;
      const auto& trees = s.model.ensemble().trees;
      for (const auto& e : w.entries) {
        double together = 0.0;
        for (const auto& t : trees)
          together += connection(t, row_of(s.model.X_train(), static_cast<Eigen::Index>(e.index)), row_of(q, i + 1));
        ref += e.weight * together / static_cast<double>(trees.size());
      }
      CHECK(std::abs(score - ref) < 1e-12);
    }
  }
}

TEST_CASE("exemplar decision rule") {
  CHECK(std::holds_alternative<NoApplicable>(choose_by_scores({0.0, 0.0}, 0.1, 0.05)));
  const auto amb = choose_by_scores({0.8, 0.79}, 0.1, 0.05);
  REQUIRE(std::holds_alternative<Ambiguous>(amb));
  CHECK(std::get<Ambiguous>(amb).candidates == std::vector<std::size_t>{0, 1});
  const auto chosen = choose_by_scores({0.2, 0.9, 0.5}, 0.1, 0.05);
  REQUIRE(std::holds_alternative<Chosen>(chosen));
  CHECK(std::get<Chosen>(chosen).index == 1);
  CHECK(capture_error([] { choose_by_scores({}, 0.1, 0.05); }).code == ErrorCode::invalid_argument);
}

TEST_CASE("step: the nearby exemplar is chosen") {
  const auto s = fig3::fit(SyntheticKind::step, 7);
  const auto lib = build_library(s.model, {point({0.1, 0.5, 0.5, 0.5, 0.5}), point({0.9, 0.5, 0.5, 0.5, 0.5})});
  std::vector<double> scores;
  const auto choice = choose_exemplar(lib, s.model, point({0.95, 0.5, 0.5, 0.5, 0.5}), &scores);
  REQUIRE(std::holds_alternative<Chosen>(choice));
  CHECK(std::get<Chosen>(choice).index == 1);
  CHECK(scores.size() == 2);
  CHECK(capture_error([&] { build_library(s.model, {}, 1.5); }).code == ErrorCode::invalid_argument);
  CHECK(capture_error([&] { choose_exemplar(ExemplarLibrary{}, s.model, point({0.5, 0.5, 0.5, 0.5, 0.5})); }).code ==
        ErrorCode::invalid_argument);
}

}  // TEST_SUITE
