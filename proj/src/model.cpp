#include "maple/model.hpp"

#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace maple {

std::string to_string(FitMode mode) { return mode == FitMode::self ? "self" : "blackbox"; }

FitMode parse_fit_mode(const std::string& name) {
  if (name == "self") return FitMode::self;
  if (name == "blackbox") return FitMode::blackbox;
  fail(ErrorCode::parse, "unknown fit mode '" + name + "'");
}

std::optional<double> Explanation::coefficient(int feature) const {
  for (const auto& [j, c] : form.coefficients)
    if (j == feature) return c;
  return std::nullopt;
}

MapleModel::MapleModel(Ensemble ensemble, Matrix X_train, Vector y_fit, std::size_t d, double ridge, FitMode mode,
                       std::vector<std::string> feature_names)
    : ensemble_(std::move(ensemble)),
      X_train_(std::move(X_train)),
      y_fit_(std::move(y_fit)),
      d_(d),
      ridge_(ridge),
      mode_(mode),
      feature_names_(std::move(feature_names)) {
  require(X_train_.rows() == y_fit_.size(), "training matrix and response differ in length");
  require(X_train_.cols() >= 2, "training matrix needs at least one feature");
  require(ridge_ >= 0.0, "ridge must be non-negative");
  require(d_ >= 1 && d_ <= features(), "d must lie in [1, p]");
  require(feature_names_.size() == features(), "feature name count does not match the design");
  scores_ = feature_scores(ensemble_, features());
  ranking_ = rank_features(scores_);
  neighborhoods_ = Neighborhoods(ensemble_, X_train_);
}

std::vector<int> MapleModel::selected() const {
  return {ranking_.begin(), ranking_.begin() + static_cast<std::ptrdiff_t>(d_)};
}

std::vector<int> MapleModel::columns_for(std::size_t d) const {
  std::vector<int> cols{0};
  cols.insert(cols.end(), ranking_.begin(), ranking_.begin() + static_cast<std::ptrdiff_t>(d));
  std::sort(cols.begin(), cols.end());
  return cols;
}

LinearForm MapleModel::form_from(const Vector& beta, std::span<const int> columns) const {
  LinearForm f;
  f.intercept = beta(0);
  for (std::size_t c = 1; c < columns.size(); ++c) f.coefficients.emplace_back(columns[c], beta(static_cast<Eigen::Index>(c)));
  return f;
}

LinearForm MapleModel::local_fit(Row x, std::size_t d) const {
  require(x.size() == static_cast<std::size_t>(X_train_.cols()), "query has the wrong dimension");
  require(d >= 1 && d <= features(), "d must lie in [1, p]");
  const auto cols = columns_for(d);
  const auto gram = weighted_gram(X_train_, y_fit_, weights(x));
  return form_from(solve_weighted_ls(gram, cols, ridge_), cols);
}

double MapleModel::predict(Row x) const { return local_fit(x, d_).predict_at(x); }

Explanation MapleModel::explain(Row x) const {
  require(x.size() == static_cast<std::size_t>(X_train_.cols()), "query has the wrong dimension");
  Explanation e;
  e.query.assign(x.begin(), x.end());
  e.weights = weights(x);
  const auto cols = columns_for(d_);
  e.form = form_from(solve_weighted_ls(weighted_gram(X_train_, y_fit_, e.weights), cols, ridge_), cols);
  for (int j = 1; j <= static_cast<int>(features()); ++j)
    if (!std::binary_search(cols.begin(), cols.end(), j)) e.not_selected.push_back(j);
  return e;
}

std::vector<std::size_t> sweep_values(std::size_t p, bool log_spaced) {
  std::vector<std::size_t> out;
  if (!log_spaced || p <= 200) {
    for (std::size_t d = 1; d <= p; ++d) out.push_back(d);
    return out;
  }
  constexpr std::size_t steps = 40;
  std::set<std::size_t> values;
  for (std::size_t i = 0; i < steps; ++i) {
    const double e = std::log(static_cast<double>(p)) * static_cast<double>(i) / static_cast<double>(steps - 1);
    values.insert(std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(std::exp(e))), 1, p));
  }
  values.insert(p);
  return {values.begin(), values.end()};
}

namespace {

struct Prepared {
  Matrix X_train;
  Vector y_train;
  Matrix X_val;
  Vector y_val;
};

Prepared prepare(const Dataset& ds, const SplitAssignment& split, std::span<const double> targets) {
  require(!split.train.empty(), "empty training split");
  Prepared p;
  const auto tr = take_rows(ds, split.train);
  const auto va = take_rows(ds, split.val);
  p.X_train = tr.X;
  p.X_val = va.X;
  p.y_train.resize(static_cast<Eigen::Index>(split.train.size()));
  p.y_val.resize(static_cast<Eigen::Index>(split.val.size()));
  for (std::size_t i = 0; i < split.train.size(); ++i) p.y_train(static_cast<Eigen::Index>(i)) = targets[split.train[i]];
  for (std::size_t i = 0; i < split.val.size(); ++i) p.y_val(static_cast<Eigen::Index>(i)) = targets[split.val[i]];
  return p;
}

std::vector<int> ascending_columns(const std::vector<int>& ranking, std::size_t d) {
  std::vector<int> cols{0};
  cols.insert(cols.end(), ranking.begin(), ranking.begin() + static_cast<std::ptrdiff_t>(d));
  std::sort(cols.begin(), cols.end());
  return cols;
}

// Squared validation error of every candidate d, one row per validation point.
std::vector<SweepPoint> validation_sweep(const MapleModel& m, const Matrix& X_val, const Vector& y_val,
                                         const std::vector<std::size_t>& ds, std::size_t threads) {
  const auto n_val = static_cast<std::size_t>(X_val.rows());
  std::vector<std::vector<double>> sq(n_val, std::vector<double>(ds.size(), 0.0));
  detail::parallel_for(n_val, threads, [&](std::size_t v) {
    const auto x = row_of(X_val, static_cast<Eigen::Index>(v));
    const auto gram = weighted_gram(m.X_train(), m.y_fit(), m.weights(x));
    for (std::size_t c = 0; c < ds.size(); ++c) {
      const auto cols = ascending_columns(m.ranking(), ds[c]);
      const double pred = evaluate_linear(solve_weighted_ls(gram, cols, m.ridge()), cols, x);
      const double err = pred - y_val(static_cast<Eigen::Index>(v));
      sq[v][c] = err * err;
    }
  });
  std::vector<SweepPoint> out;
  for (std::size_t c = 0; c < ds.size(); ++c) {
    double total = 0.0;
    for (std::size_t v = 0; v < n_val; ++v) total += sq[v][c];
    out.push_back({ds[c], std::sqrt(total / static_cast<double>(n_val))});
  }
  return out;
}

// Causal RMSE of the d-restricted explanation against the d-restricted predictor.
std::vector<SweepPoint> causal_sweep(const MapleModel& m, const Matrix& X_val, const std::vector<std::size_t>& ds,
                                     const CausalConfig& cfg) {
  require(cfg.sigma > 0.0 && cfg.draws_per_point >= 1, "invalid causal configuration");
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> total(ds.size(), 0.0);
  std::size_t count = 0;
  std::vector<double> xp(static_cast<std::size_t>(X_val.cols()));
  for (Eigen::Index v = 0; v < X_val.rows(); ++v) {
    const auto x = row_of(X_val, v);
    const auto gram_x = weighted_gram(m.X_train(), m.y_fit(), m.weights(x));
    std::vector<Vector> betas;
    for (auto d : ds) betas.push_back(solve_weighted_ls(gram_x, ascending_columns(m.ranking(), d), m.ridge()));
    for (std::size_t draw = 0; draw < cfg.draws_per_point; ++draw) {
      xp[0] = 1.0;
      for (std::size_t j = 1; j < xp.size(); ++j) xp[j] = x[j] + cfg.sigma * gauss(rng);
      const auto gram_p = weighted_gram(m.X_train(), m.y_fit(), m.weights(xp));
      for (std::size_t c = 0; c < ds.size(); ++c) {
        const auto cols = ascending_columns(m.ranking(), ds[c]);
        const double target = evaluate_linear(solve_weighted_ls(gram_p, cols, m.ridge()), cols, xp);
        const double err = evaluate_linear(betas[c], cols, xp) - target;
        total[c] += err * err;
      }
      ++count;
    }
  }
  std::vector<SweepPoint> out;
  for (std::size_t c = 0; c < ds.size(); ++c) out.push_back({ds[c], std::sqrt(total[c] / static_cast<double>(count))});
  return out;
}

MapleModel fit_impl(const Dataset& ds, const SplitAssignment& split, std::span<const double> targets,
                    const MapleConfig& cfg, FitMode mode) {
  const auto data = prepare(ds, split, targets);
  const std::size_t p = ds.features();
  auto ecfg = cfg.ensemble;
  auto ensemble = fit_ensemble(cfg.kind, data.X_train, data.y_train, ecfg);

  if (cfg.fixed_d) {
    return MapleModel(std::move(ensemble), data.X_train, data.y_train, *cfg.fixed_d, cfg.ridge, mode, ds.feature_names);
  }
  if (split.val.empty()) fail(ErrorCode::invalid_argument, "d selection needs a non-empty validation split");

  MapleModel probe(std::move(ensemble), data.X_train, data.y_train, p, cfg.ridge, mode, ds.feature_names);
  const auto candidates = sweep_values(p, cfg.log_spaced_sweep);
  const auto sweep = cfg.selection == DSelection::validation_rmse
                         ? validation_sweep(probe, data.X_val, data.y_val, candidates, std::max<std::size_t>(1, ecfg.threads))
                         : causal_sweep(probe, data.X_val, candidates, cfg.causal);

  std::size_t best = 0;
  for (std::size_t c = 1; c < sweep.size(); ++c)
    if (sweep[c].value < sweep[best].value) best = c;

  MapleModel model(probe.ensemble(), probe.X_train(), probe.y_fit(), sweep[best].d, cfg.ridge, mode, ds.feature_names);
  model.set_sweep(sweep, cfg.selection);
  return model;
}

}  // namespace

MapleModel fit(const Dataset& ds, const SplitAssignment& split, const MapleConfig& cfg) {
  return fit_impl(ds, split, std::span<const double>(ds.y.data(), ds.rows()), cfg, FitMode::self);
}

MapleModel fit_blackbox(const Dataset& ds, const SplitAssignment& split, std::span<const double> predictions,
                        const MapleConfig& cfg) {
  if (predictions.size() != ds.rows())
    fail(ErrorCode::invalid_argument, "black-box predictions have " + std::to_string(predictions.size()) +
                                          " values but the dataset has " + std::to_string(ds.rows()) + " rows");
  return fit_impl(ds, split, predictions, cfg, FitMode::blackbox);
}

}  // namespace maple
