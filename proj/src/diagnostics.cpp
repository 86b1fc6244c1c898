#include "maple/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace maple {

InfluenceSet influential_points(const LocalWeights& w, std::size_t n_train, std::size_t k) {
  require(k >= 1 && k <= n_train, "k must lie in [1, n]");
  InfluenceSet out;
  out.query = w.query;
  out.k = k;
  auto sorted = w.sorted_by_weight();
  if (sorted.size() > k) sorted.resize(k);
  out.members = std::move(sorted);
  // Zero-weight points follow in ascending index order.
  for (std::size_t i = 0; out.members.size() < k && i < n_train; ++i)
    if (w.weight(i) == 0.0) out.members.push_back({i, 0.0});
  return out;
}

InfluenceSet influential_points(const MapleModel& m, Row x, std::size_t k) {
  return influential_points(m.weights(x), static_cast<std::size_t>(m.X_train().rows()), k);
}

BoxStats box_stats(std::vector<double> values) {
  require(!values.empty(), "cannot summarize an empty set");
  std::sort(values.begin(), values.end());
  const auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
  };
  BoxStats s;
  s.min = values.front();
  s.max = values.back();
  s.q1 = quantile(0.25);
  s.median = quantile(0.5);
  s.q3 = quantile(0.75);
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  return s;
}

BoxStats feature_boxplot(const InfluenceSet& infl, const Matrix& X_train, int j) {
  require(!infl.members.empty(), "empty influence set");
  require(j >= 0 && j < X_train.cols(), "feature index out of range");
  std::vector<double> values;
  values.reserve(infl.members.size());
  for (const auto& e : infl.members) values.push_back(X_train(static_cast<Eigen::Index>(e.index), j));
  return box_stats(std::move(values));
}

std::string to_string(SamplerKind s) { return s == SamplerKind::empirical_marginals ? "empirical_marginals" : "uniform_range"; }

std::vector<double> even_grid(double lo, double hi, std::size_t n) {
  require(n >= 1, "grid needs at least one point");
  if (n == 1) return {lo};
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return g;
}

GridDiagnostic grid_diagnostic(const MapleModel& m, const Matrix& reference, int j, const std::vector<double>& grid,
                               const GridOptions& opt) {
  require(!grid.empty(), "empty grid");
  require(j >= 1 && static_cast<std::size_t>(j) <= m.features(), "feature index out of range");
  require(reference.cols() == m.X_train().cols() && reference.rows() >= 1, "reference rows do not match the model");
  require(opt.repeats >= 1, "repeats must be >= 1");

  std::vector<double> lo(static_cast<std::size_t>(reference.cols())), hi(lo.size());
  for (Eigen::Index c = 0; c < reference.cols(); ++c) {
    lo[static_cast<std::size_t>(c)] = reference.col(c).minCoeff();
    hi[static_cast<std::size_t>(c)] = reference.col(c).maxCoeff();
  }

  std::mt19937_64 rng(opt.seed);
  std::uniform_int_distribution<Eigen::Index> pick_row(0, reference.rows() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  GridDiagnostic gd;
  gd.feature = j;
  gd.grid = grid;
  gd.repeats = opt.repeats;
  gd.k = opt.k;
  gd.sampler = opt.sampler;
  std::vector<double> probe(static_cast<std::size_t>(reference.cols()));
  for (double g : grid) {
    GridCell cell;
    cell.grid_value = g;
    std::vector<double> pooled;
    for (std::size_t r = 0; r < opt.repeats; ++r) {
      probe[0] = 1.0;
      for (std::size_t c = 1; c < probe.size(); ++c) {
        if (opt.sampler == SamplerKind::empirical_marginals)
          probe[c] = reference(pick_row(rng), static_cast<Eigen::Index>(c));
        else
          probe[c] = lo[c] + (hi[c] - lo[c]) * unit(rng);
      }
      probe[static_cast<std::size_t>(j)] = g;
      const auto infl = influential_points(m, probe, opt.k);
      std::vector<double> values;
      for (const auto& e : infl.members) values.push_back(m.X_train()(static_cast<Eigen::Index>(e.index), j));
      pooled.insert(pooled.end(), values.begin(), values.end());
      cell.per_repeat.push_back(box_stats(std::move(values)));
    }
    cell.pooled = box_stats(std::move(pooled));
    gd.per_cell.push_back(std::move(cell));
  }
  return gd;
}

double iqr_overlap(const BoxStats& a, const BoxStats& b) {
  const double overlap = std::min(a.q3, b.q3) - std::max(a.q1, b.q1);
  const double narrow = std::min(a.iqr(), b.iqr());
  if (narrow <= 0.0) return overlap >= 0.0 ? 1.0 : 0.0;
  return std::clamp(overlap / narrow, 0.0, 1.0);
}

namespace {

double increment_cv(const std::vector<double>& track) {
  const std::size_t m = track.size() - 1;
  double mean = 0.0;
  for (std::size_t c = 0; c < m; ++c) mean += track[c + 1] - track[c];
  mean /= static_cast<double>(m);
  double var = 0.0;
  for (std::size_t c = 0; c < m; ++c) var += std::pow(track[c + 1] - track[c] - mean, 2);
  var /= static_cast<double>(m);
  return std::abs(mean) > 0.0 ? std::sqrt(var) / std::abs(mean) : 0.0;
}

}  // namespace

PatternVerdict detect_global_pattern(const GridDiagnostic& gd, const PatternThresholds& t) {
  require(gd.per_cell.size() >= 3, "pattern detection needs at least 3 grid cells");
  const bool distinct = std::adjacent_find(gd.grid.begin(), gd.grid.end(), std::greater_equal<>()) == gd.grid.end();
  require(distinct, "grid values must be strictly increasing");

  const auto& cells = gd.per_cell;
  const std::size_t n = cells.size();
  PatternVerdict v;
  for (std::size_t c = 0; c + 1 < n; ++c)
    v.max_iqr_gap = std::max(v.max_iqr_gap, 1.0 - iqr_overlap(cells[c].pooled, cells[c + 1].pooled));

  std::vector<double> q1(n), med(n), q3(n);
  double mean_iqr = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    q1[c] = cells[c].pooled.q1;
    med[c] = cells[c].pooled.median;
    q3[c] = cells[c].pooled.q3;
    mean_iqr += cells[c].pooled.iqr() / static_cast<double>(n);
  }
  if (std::abs(med.back() - med.front()) > mean_iqr)
    v.score = (increment_cv(q1) + increment_cv(med) + increment_cv(q3)) / 3.0;

  // End cells sit on the edge of the data, where one-sided neighbourhoods are expected.
  for (std::size_t c = 1; c + 1 < n; ++c)
    if (std::abs(cells[c].pooled.median - cells[c].grid_value) > t.skew_iqr_multiple * cells[c].pooled.iqr())
      v.skewed = true;
  v.pattern_detected = v.score > t.abruptness || v.skewed;
  return v;
}

double exemplar_fit_score(const MapleModel& m, const LocalWeights& exemplar_weights, Row x) {
  const auto& nb = m.neighborhoods();
  const auto leaves = nb.route(m.ensemble(), x);
  const double inv_k = 1.0 / static_cast<double>(leaves.size());
  double score = 0.0;
  for (const auto& e : exemplar_weights.entries) {
    std::size_t together = 0;
    for (std::size_t k = 0; k < leaves.size(); ++k)
      if (nb.training_leaf(k, e.index) == leaves[k]) ++together;
    score += e.weight * static_cast<double>(together) * inv_k;
  }
  return std::clamp(score, 0.0, 1.0);
}

ExemplarLibrary build_library(const MapleModel& m, const std::vector<std::vector<double>>& queries, double threshold,
                              double margin) {
  require(threshold >= 0.0 && threshold <= 1.0, "applicability threshold must lie in [0, 1]");
  require(margin >= 0.0 && margin <= 1.0, "ambiguity margin must lie in [0, 1]");
  ExemplarLibrary lib;
  lib.applicability_threshold = threshold;
  lib.ambiguity_margin = margin;
  for (const auto& q : queries) lib.exemplars.push_back({q, m.explain(q)});
  return lib;
}

ExemplarChoice choose_by_scores(const std::vector<double>& scores, double threshold, double margin) {
  require(!scores.empty(), "empty exemplar library");
  const auto best_it = std::max_element(scores.begin(), scores.end());
  const double best = *best_it;
  if (best < threshold) return NoApplicable{};
  Ambiguous tied;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (best - scores[i] <= margin) tied.candidates.push_back(i);
  if (tied.candidates.size() > 1) return tied;
  return Chosen{static_cast<std::size_t>(best_it - scores.begin())};
}

ExemplarChoice choose_exemplar(const ExemplarLibrary& lib, const MapleModel& m, Row x, std::vector<double>* scores_out) {
  require(!lib.exemplars.empty(), "empty exemplar library");
  std::vector<double> scores;
  for (const auto& ex : lib.exemplars) scores.push_back(exemplar_fit_score(m, ex.explanation.weights, x));
  auto choice = choose_by_scores(scores, lib.applicability_threshold, lib.ambiguity_margin);
  if (scores_out) *scores_out = std::move(scores);
  return choice;
}

}  // namespace maple
