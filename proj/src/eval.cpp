#include "maple/eval.hpp"

#include "maple/model.hpp"
#include "parallel.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>
#include <random>

namespace maple {

double causal_metric(const Explainer& explainer, const Predictor& model, const Matrix& test_X, const CausalConfig& cfg) {
  require(cfg.sigma > 0.0, "sigma must be positive");
  require(cfg.draws_per_point >= 1, "draws_per_point must be >= 1");
  require(test_X.rows() >= 1, "no test rows");
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> xp(static_cast<std::size_t>(test_X.cols()));
  double total = 0.0;
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < test_X.rows(); ++i) {
    const auto x = row_of(test_X, i);
    const auto exp_x = explainer(x);
    for (const auto& [j, c] : exp_x.coefficients)
      require(j >= 1 && j < test_X.cols(), "explanation refers to a feature outside the test matrix");
    for (std::size_t draw = 0; draw < cfg.draws_per_point; ++draw) {
      xp[0] = 1.0;
      for (std::size_t j = 1; j < xp.size(); ++j) xp[j] = x[j] + cfg.sigma * gauss(rng);
      const double err = exp_x.predict_at(xp) - model(xp);
      total += err * err;
      ++count;
    }
  }
  return std::sqrt(total / static_cast<double>(count));
}

double standard_metric(const Explainer& explainer, const Predictor& model, const Matrix& test_X) {
  require(test_X.rows() >= 1, "no test rows");
  double total = 0.0;
  for (Eigen::Index i = 0; i < test_X.rows(); ++i) {
    const auto x = row_of(test_X, i);
    const auto exp_x = explainer(x);
    for (const auto& [j, c] : exp_x.coefficients)
      require(j >= 1 && j < test_X.cols(), "explanation refers to a feature outside the test matrix");
    const double err = exp_x.predict_at(x) - model(x);
    total += err * err;
  }
  return std::sqrt(total / static_cast<double>(test_X.rows()));
}

double rmse(std::span<const double> pred, std::span<const double> truth) {
  require(pred.size() == truth.size(), "rmse: length mismatch");
  require(!pred.empty(), "rmse: empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    total += d * d;
  }
  return std::sqrt(total / static_cast<double>(pred.size()));
}

Explainer constant_explainer(Predictor model) {
  return [model = std::move(model)](Row x) { return LinearForm{model(x), {}}; };
}

KernelRidge::KernelRidge(const Matrix& X, const Vector& y, double ridge, double bandwidth) : X_(X), bandwidth_(bandwidth) {
  require(X.rows() == y.size() && X.rows() >= 2, "kernel ridge needs at least two aligned rows");
  require(ridge > 0.0, "kernel ridge penalty must be positive");
  const auto n = X.rows();
  const auto feats = X.rightCols(X.cols() - 1);
  Eigen::MatrixXd sq(n, n);
  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    sq(i, i) = 0.0;
    for (Eigen::Index k = i + 1; k < n; ++k) {
      const double d2 = (feats.row(i) - feats.row(k)).squaredNorm();
      sq(i, k) = sq(k, i) = d2;
      dists.push_back(std::sqrt(d2));
    }
  }
  if (bandwidth_ <= 0.0) {
    auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
    std::nth_element(dists.begin(), mid, dists.end());
    bandwidth_ = *mid;
    if (dists.size() % 2 == 0) bandwidth_ = 0.5 * (bandwidth_ + *std::max_element(dists.begin(), mid));
    if (!(bandwidth_ > 0.0)) bandwidth_ = 1.0;
  }
  const double gamma = 1.0 / (2.0 * bandwidth_ * bandwidth_);
  Eigen::MatrixXd K = (-gamma * sq.array()).exp().matrix();
  K.diagonal().array() += ridge;
  alpha_ = K.llt().solve(y);
}

double KernelRidge::predict(Row x) const {
  const double gamma = 1.0 / (2.0 * bandwidth_ * bandwidth_);
  double s = 0.0;
  for (Eigen::Index i = 0; i < X_.rows(); ++i) {
    double d2 = 0.0;
    for (Eigen::Index j = 1; j < X_.cols(); ++j) {
      const double d = X_(i, j) - x[static_cast<std::size_t>(j)];
      d2 += d * d;
    }
    s += alpha_(i) * std::exp(-gamma * d2);
  }
  return s;
}

PairedTest paired_t_test(const std::string& first, const std::vector<double>& a, const std::string& second,
                         const std::vector<double>& b, double alpha) {
  require(a.size() == b.size(), "paired test needs equal-length samples");
  PairedTest out{first, second};
  const std::size_t n = a.size();
  if (n == 0) return out;
  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = a[i] - b[i];
  const double mean = std::accumulate(diff.begin(), diff.end(), 0.0) / static_cast<double>(n);
  out.mean_difference = mean;
  if (n < 2) return out;
  double ss = 0.0;
  for (double d : diff) ss += (d - mean) * (d - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (sd == 0.0) {
    out.p_value = mean == 0.0 ? 1.0 : 0.0;
    out.t_statistic = mean == 0.0 ? 0.0 : std::copysign(INFINITY, mean);
  } else {
    out.t_statistic = mean / (sd / std::sqrt(static_cast<double>(n)));
    boost::math::students_t dist(static_cast<double>(n - 1));
    out.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(out.t_statistic)));
  }
  out.significant = out.p_value < alpha;
  return out;
}

MethodSummary summarize(const std::string& name, std::vector<double> values) {
  require(!values.empty(), "no values to summarize");
  MethodSummary s{name, std::move(values)};
  const double n = static_cast<double>(s.values.size());
  s.mean = std::accumulate(s.values.begin(), s.values.end(), 0.0) / n;
  if (s.values.size() > 1) {
    double ss = 0.0;
    for (double v : s.values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

MetricKind parse_metric(const std::string& name) {
  if (name == "rmse") return MetricKind::rmse;
  if (name == "causal") return MetricKind::causal;
  if (name == "standard") return MetricKind::standard;
  fail(ErrorCode::invalid_argument, "unknown metric '" + name + "' (expected causal, standard or rmse)");
}

std::string to_string(MetricKind m) {
  switch (m) {
    case MetricKind::rmse: return "rmse";
    case MetricKind::causal: return "causal";
    case MetricKind::standard: return "standard";
  }
  return "rmse";
}

bool is_known_method(const std::string& method) {
  static const std::vector<std::string> known{"maple_rf", "maple_gbrt", "silo_rf", "silo_gbrt", "rf", "gbrt", "lm", "constant"};
  return std::find(known.begin(), known.end(), method) != known.end();
}

namespace {

struct MethodParts {
  std::string family;  // maple, silo, rf, gbrt, lm, constant
  EnsembleKind kind = EnsembleKind::rf;
};

MethodParts parse_method(const std::string& m) {
  if (!is_known_method(m)) fail(ErrorCode::invalid_argument, "protocol references unavailable method '" + m + "'");
  if (m == "rf" || m == "gbrt") return {m, parse_ensemble_kind(m)};
  if (m == "lm" || m == "constant") return {m};
  const auto us = m.find('_');
  return {m.substr(0, us), parse_ensemble_kind(m.substr(us + 1))};
}

// A fitted method, usable as predictor and (where meaningful) as explainer.
struct Fitted {
  Predictor predict;
  Explainer explain;
};

Fitted fit_method(const std::string& method, const Dataset& ds, const SplitAssignment& split, const std::vector<double>& targets,
                  bool blackbox, const Protocol& proto, std::uint64_t seed) {
  const auto parts = parse_method(method);
  auto ecfg = proto.ensemble;
  ecfg.seed = seed;
  ecfg.threads = proto.threads;

  if (parts.family == "maple" || parts.family == "silo") {
    MapleConfig cfg;
    cfg.kind = parts.kind;
    cfg.ensemble = ecfg;
    cfg.ridge = proto.ridge;
    if (parts.family == "silo") cfg.fixed_d = ds.features();
    auto model = std::make_shared<MapleModel>(blackbox ? fit_blackbox(ds, split, targets, cfg) : fit(ds, split, cfg));
    return {[model](Row x) { return model->predict(x); }, [model](Row x) { return model->local_fit(x, model->d()); }};
  }

  const auto train = take_rows(ds, split.train);
  Vector y(static_cast<Eigen::Index>(split.train.size()));
  for (std::size_t i = 0; i < split.train.size(); ++i) y(static_cast<Eigen::Index>(i)) = targets[split.train[i]];

  if (parts.family == "rf" || parts.family == "gbrt") {
    auto e = std::make_shared<Ensemble>(fit_ensemble(parts.kind, train.X, y, ecfg));
    return {[e](Row x) { return e->predict(x); }, nullptr};
  }
  if (parts.family == "lm") {
    const auto beta = weighted_least_squares(train.X, y, Vector::Ones(y.size()), proto.ridge);
    LinearForm form{beta(0), {}};
    for (Eigen::Index j = 1; j < beta.size(); ++j) form.coefficients.emplace_back(static_cast<int>(j), beta(j));
    return {[form](Row x) { return form.predict_at(x); }, [form](Row) { return form; }};
  }
  const double mean = y.mean();
  return {[mean](Row) { return mean; }, nullptr};
}

void score_trial(const Protocol& proto, const Dataset& raw, std::size_t t, std::uint64_t seed,
                   std::vector<double>& out) {
  const auto sp = split(raw.rows(), seed);
  const auto ds = standardize(raw, sp);
  const auto test = take_rows(ds, sp.test);
  require(!sp.test.empty(), "test split is empty");
  const bool blackbox = !proto.blackbox.empty();

  std::vector<double> targets(ds.y.data(), ds.y.data() + ds.y.size());
  Predictor scored;
  if (blackbox) {
    if (proto.blackbox != "kernel_ridge") fail(ErrorCode::invalid_argument, "unknown black box '" + proto.blackbox + "'");
    const auto train = take_rows(ds, sp.train);
    auto kr = std::make_shared<KernelRidge>(train.X, train.y);
    for (std::size_t i = 0; i < ds.rows(); ++i) targets[i] = kr->predict(row_of(ds.X, static_cast<Eigen::Index>(i)));
    scored = [kr](Row x) { return kr->predict(x); };
  }

  std::map<std::string, Fitted> cache;
  const auto get = [&](const std::string& method, bool on_targets) -> const Fitted& {
    auto it = cache.find(method);
    if (it == cache.end()) it = cache.emplace(method, fit_method(method, ds, sp, targets, on_targets, proto, seed)).first;
    return it->second;
  };

  if (proto.metric == MetricKind::rmse) {
    for (const auto& m : proto.methods) {
      const auto& f = get(m, blackbox);
      std::vector<double> pred, truth;
      for (std::size_t i = 0; i < sp.test.size(); ++i) {
        pred.push_back(f.predict(row_of(test.X, static_cast<Eigen::Index>(i))));
        truth.push_back(targets[sp.test[i]]);
      }
      out.push_back(rmse(pred, truth));
    }
    return;
  }

  if (!blackbox) {
    // Self mode: the explained model is fit on the labels; other explainers are
    // fit on its responses.
    const auto& explained = get(proto.explained, false);
    scored = explained.predict;
    std::vector<double> responses(ds.rows());
    for (std::size_t i = 0; i < ds.rows(); ++i) responses[i] = scored(row_of(ds.X, static_cast<Eigen::Index>(i)));
    for (const auto& m : proto.methods) {
      Explainer ex;
      if (m == proto.explained) {
        ex = explained.explain;
      } else if (m == "constant") {
        ex = constant_explainer(scored);
      } else {
        auto f = fit_method(m, ds, sp, responses, true, proto, seed);
        ex = f.explain;
      }
      if (!ex) fail(ErrorCode::invalid_argument, "method '" + m + "' does not produce local explanations");
      CausalConfig c = proto.causal;
      c.seed = proto.causal.seed + t;
      out.push_back(proto.metric == MetricKind::causal ? causal_metric(ex, scored, test.X, c) : standard_metric(ex, scored, test.X));
    }
    return;
  }

  for (const auto& m : proto.methods) {
    Explainer ex = m == "constant" ? constant_explainer(scored) : get(m, true).explain;
    if (!ex) fail(ErrorCode::invalid_argument, "method '" + m + "' does not produce local explanations");
    CausalConfig c = proto.causal;
    c.seed = proto.causal.seed + t;
    out.push_back(proto.metric == MetricKind::causal ? causal_metric(ex, scored, test.X, c) : standard_metric(ex, scored, test.X));
  }
}

}  // namespace

TrialReport run_trials(const Protocol& protocol, std::size_t n_trials, std::uint64_t base_seed) {
  require(n_trials >= 1, "need at least one trial");
  require(!protocol.methods.empty(), "protocol lists no methods");
  for (const auto& m : protocol.methods) parse_method(m);
  if (protocol.metric != MetricKind::rmse && protocol.blackbox.empty()) parse_method(protocol.explained);

  std::vector<std::vector<double>> per_trial(n_trials);
  auto inner = protocol;
  inner.threads = 1;
  detail::parallel_for(n_trials, protocol.threads, [&](std::size_t t) {
    score_trial(inner, protocol.dataset, t, base_seed + t, per_trial[t]);
  });

  TrialReport r;
  r.protocol = protocol.name;
  r.metric = to_string(protocol.metric);
  r.trials = n_trials;
  r.base_seed = base_seed;
  for (std::size_t m = 0; m < protocol.methods.size(); ++m) {
    std::vector<double> values;
    for (const auto& trial : per_trial) values.push_back(trial[m]);
    r.methods.push_back(summarize(protocol.methods[m], std::move(values)));
  }
  for (std::size_t m = 1; m < r.methods.size(); ++m)
    r.comparisons.push_back(paired_t_test(r.methods[0].name, r.methods[0].values, r.methods[m].name, r.methods[m].values));
  return r;
}

}  // namespace maple
