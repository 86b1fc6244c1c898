#include "maple/maple.h"

#include "maple/serialize.hpp"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

struct maple_dataset {
  maple::Dataset data;
};

struct maple_model {
  maple::ModelBundle bundle;
};

namespace {

thread_local std::string last_error;

maple_status status_of(maple::ErrorCode code) {
  switch (code) {
    case maple::ErrorCode::invalid_argument: return MAPLE_ERR_INVALID_ARGUMENT;
    case maple::ErrorCode::io: return MAPLE_ERR_IO;
    case maple::ErrorCode::parse: return MAPLE_ERR_PARSE;
    case maple::ErrorCode::singular_system: return MAPLE_ERR_SINGULAR;
    case maple::ErrorCode::runtime: return MAPLE_ERR_RUNTIME;
  }
  return MAPLE_ERR_RUNTIME;
}

template <typename Body>
maple_status guarded(Body&& body) {
  try {
    body();
    last_error.clear();
    return MAPLE_OK;
  } catch (const maple::Error& e) {
    last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return MAPLE_ERR_RUNTIME;
  } catch (const std::exception& e) {
    last_error = e.what();
    return MAPLE_ERR_RUNTIME;
  }
}

void need(const void* p, const char* what) {
  if (!p) maple::fail(maple::ErrorCode::invalid_argument, std::string(what) + " must not be NULL");
}

char* copy_string(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

// Resolves a point spec into a model-space row.
std::vector<double> resolve_point(const maple::ModelBundle& b, const char* spec) {
  need(spec, "point");
  const auto& m = b.model;
  const std::size_t p = m.features();
  std::string text(spec);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) maple::fail(maple::ErrorCode::invalid_argument, "empty point");

  if (text[first] == '[') {
    maple::Json j;
    try {
      j = maple::Json::parse(text);
    } catch (const nlohmann::json::exception&) {
      maple::fail(maple::ErrorCode::invalid_argument, "malformed point: not a JSON array");
    }
    if (!j.is_array() || j.size() != p)
      maple::fail(maple::ErrorCode::invalid_argument,
                  "point has " + std::to_string(j.is_array() ? j.size() : 0) + " values, the model expects " + std::to_string(p));
    std::vector<double> x(p + 1, 1.0);
    for (std::size_t i = 0; i < p; ++i) {
      if (!j[i].is_number()) maple::fail(maple::ErrorCode::invalid_argument, "point values must be numbers");
      x[i + 1] = j[i].get<double>();
    }
    if (b.scaling) b.scaling->apply_row(x);
    return x;
  }

  std::size_t pos = 0;
  unsigned long long index = 0;
  try {
    index = std::stoull(text, &pos);
  } catch (const std::exception&) {
    maple::fail(maple::ErrorCode::invalid_argument, "malformed point '" + text + "': expected a JSON array or a row index");
  }
  if (text.find_first_not_of(" \t\r\n", pos) != std::string::npos || text[first] == '-')
    maple::fail(maple::ErrorCode::invalid_argument, "malformed point '" + text + "': expected a JSON array or a row index");
  if (index >= static_cast<unsigned long long>(m.X_train().rows()))
    maple::fail(maple::ErrorCode::invalid_argument, "row index " + text + " is out of range");
  const auto r = maple::row_of(m.X_train(), static_cast<Eigen::Index>(index));
  return {r.begin(), r.end()};
}

maple::Dataset in_model_units(const maple::ModelBundle& b, const maple::Dataset& ds) {
  if (ds.feature_names != b.model.feature_names())
    maple::fail(maple::ErrorCode::invalid_argument, "dataset features do not match the model's features");
  maple::Dataset out = ds;
  if (b.scaling) {
    for (Eigen::Index i = 0; i < out.X.rows(); ++i) {
      b.scaling->apply_row({out.X.data() + i * out.X.cols(), static_cast<std::size_t>(out.X.cols())});
      out.y(i) = b.scaling->apply_y(out.y(i));
    }
  }
  return out;
}

maple::Json summary(const maple::ModelBundle& b) {
  const auto& m = b.model;
  maple::Json j;
  j["ensemble"] = maple::to_string(m.ensemble().kind);
  j["mode"] = maple::to_string(m.mode());
  j["d"] = m.d();
  maple::Json selected = maple::Json::array();
  for (int f : m.selected()) selected.push_back(m.feature_names()[static_cast<std::size_t>(f - 1)]);
  j["selected"] = std::move(selected);
  double val = 0.0;
  for (const auto& s : m.sweep())
    if (s.d == m.d()) val = s.value;
  j[m.selection() == maple::DSelection::validation_rmse ? "validation_rmse" : "validation_causal"] = val;
  if (b.test_X.rows() > 0) {
    maple::Vector pred(b.test_X.rows());
    for (Eigen::Index i = 0; i < b.test_X.rows(); ++i) pred(i) = m.predict(maple::row_of(b.test_X, i));
    j["test_rmse"] = maple::rmse(pred, b.test_y);
  }
  j["scores"] = maple::scores_to_json(m.scores(), m.feature_names());
  return j;
}

}  // namespace

extern "C" {

const char* maple_version(void) { return "0.1.0"; }

const char* maple_last_error(void) { return last_error.c_str(); }

void maple_string_free(char* s) { std::free(s); }

void maple_doubles_free(double* values) { std::free(values); }

void maple_train_options_init(maple_train_options* o) {
  if (!o) return;
  o->ensemble = "rf";
  o->n_trees = 100;
  o->min_samples_leaf = 10;
  o->max_features = 0;
  o->max_depth = 0;
  o->learning_rate = 0.1;
  o->ridge = 1e-6;
  o->seed = 0;
  o->threads = 1;
  o->causal_selection = 0;
  o->sigma = 0.1;
  o->draws = 5;
}

void maple_eval_overrides_init(maple_eval_overrides* o) {
  if (!o) return;
  o->metric = nullptr;
  o->sigma = 0.0;
  o->draws = 0;
  o->trials = 0;
  o->has_seed = 0;
  o->seed = 0;
  o->threads = 1;
}

maple_status maple_synth_csv(const char* kind, size_t n, size_t p, double noise, uint64_t seed, const char* path) {
  return guarded([&] {
    need(kind, "kind");
    need(path, "path");
    maple::SyntheticSpec spec{maple::parse_synthetic_kind(kind), n, p, noise, seed};
    maple::write_csv(maple::gen_synthetic(spec), path);
  });
}

maple_status maple_dataset_load_csv(const char* path, const char* target, maple_dataset** out) {
  return guarded([&] {
    need(path, "path");
    need(target, "target");
    need(out, "out");
    *out = nullptr;
    *out = new maple_dataset{maple::load_csv(path, target)};
  });
}

void maple_dataset_free(maple_dataset* ds) { delete ds; }

maple_status maple_dataset_shape(const maple_dataset* ds, size_t* rows, size_t* features) {
  return guarded([&] {
    need(ds, "dataset");
    if (rows) *rows = ds->data.rows();
    if (features) *features = ds->data.features();
  });
}

maple_status maple_read_predictions_csv(const char* path, double** values, size_t* count) {
  return guarded([&] {
    need(path, "path");
    need(values, "values");
    need(count, "count");
    std::ifstream in(path);
    if (!in) maple::fail(maple::ErrorCode::io, std::string("cannot open '") + path + "'");
    std::vector<double> v;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
      ++row;
      const auto first = line.find_first_not_of(" \t\r\n");
      if (first == std::string::npos) continue;
      if (line.find(',') != std::string::npos)
        maple::fail(maple::ErrorCode::parse, "predictions file must have exactly one column (line " + std::to_string(row) + ")");
      char* end = nullptr;
      const double x = std::strtod(line.c_str() + first, &end);
      const bool clean = end != line.c_str() + first && line.find_first_not_of(" \t\r\n", static_cast<std::size_t>(end - line.c_str())) == std::string::npos;
      if (!clean || !std::isfinite(x)) {
        if (row == 1 && v.empty()) continue;  // header
        maple::fail(maple::ErrorCode::parse, "non-numeric prediction on line " + std::to_string(row));
      }
      v.push_back(x);
    }
    auto* buf = static_cast<double*>(std::malloc(std::max<std::size_t>(1, v.size()) * sizeof(double)));
    if (!buf) throw std::bad_alloc();
    std::copy(v.begin(), v.end(), buf);
    *values = buf;
    *count = v.size();
  });
}

maple_status maple_model_train(const maple_dataset* ds, const maple_train_options* options,
                               const double* blackbox_predictions, size_t n_predictions, maple_model** out) {
  return guarded([&] {
    need(ds, "dataset");
    need(out, "out");
    *out = nullptr;
    maple_train_options defaults;
    maple_train_options_init(&defaults);
    const auto& o = options ? *options : defaults;

    maple::MapleConfig cfg;
    cfg.kind = maple::parse_ensemble_kind(o.ensemble ? o.ensemble : "rf");
    cfg.ensemble.n_trees = o.n_trees;
    cfg.ensemble.min_samples_leaf = o.min_samples_leaf;
    cfg.ensemble.max_features = o.max_features;
    if (o.max_depth > 0) cfg.ensemble.max_depth = o.max_depth;
    cfg.ensemble.learning_rate = o.learning_rate;
    cfg.ensemble.seed = o.seed;
    cfg.ensemble.threads = o.threads;
    cfg.ridge = o.ridge;
    if (o.causal_selection) {
      cfg.selection = maple::DSelection::causal_metric;
      cfg.causal = {o.sigma, o.draws, o.seed};
    }

    const auto& raw = ds->data;
    const auto sp = maple::split(raw.rows(), o.seed);
    const auto std_ds = maple::standardize(raw, sp);

    std::vector<double> targets(std_ds.y.data(), std_ds.y.data() + std_ds.y.size());
    std::optional<maple::MapleModel> model;
    if (blackbox_predictions) {
      if (n_predictions != raw.rows())
        maple::fail(maple::ErrorCode::invalid_argument, "black-box predictions have " + std::to_string(n_predictions) +
                                                            " rows but the dataset has " + std::to_string(raw.rows()));
      for (std::size_t i = 0; i < raw.rows(); ++i) targets[i] = std_ds.scaling->apply_y(blackbox_predictions[i]);
      model.emplace(maple::fit_blackbox(std_ds, sp, targets, cfg));
    } else {
      model.emplace(maple::fit(std_ds, sp, cfg));
    }

    const auto test = maple::take_rows(std_ds, sp.test);
    maple::Vector test_y(static_cast<Eigen::Index>(sp.test.size()));
    for (std::size_t i = 0; i < sp.test.size(); ++i) test_y(static_cast<Eigen::Index>(i)) = targets[sp.test[i]];
    *out = new maple_model{maple::ModelBundle{std::move(*model), std_ds.scaling, test.X, test_y, sp}};
  });
}

void maple_model_free(maple_model* model) { delete model; }

maple_status maple_model_save(const maple_model* model, const char* path) {
  return guarded([&] {
    need(model, "model");
    need(path, "path");
    maple::save_bundle(model->bundle, path);
  });
}

maple_status maple_model_load(const char* path, maple_model** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = nullptr;
    *out = new maple_model{maple::load_bundle(path)};
  });
}

maple_status maple_model_summary_json(const maple_model* model, char** out) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    *out = copy_string(maple::dump(summary(model->bundle)));
  });
}

maple_status maple_model_dimension(const maple_model* model, size_t* features, size_t* d) {
  return guarded([&] {
    need(model, "model");
    if (features) *features = model->bundle.model.features();
    if (d) *d = model->bundle.model.d();
  });
}

maple_status maple_model_predict(const maple_model* model, const char* point, double* out) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    const auto x = resolve_point(model->bundle, point);
    *out = model->bundle.model.predict(x);
  });
}

maple_status maple_model_predict_dataset_json(const maple_model* model, const maple_dataset* ds, char** out) {
  return guarded([&] {
    need(model, "model");
    need(ds, "dataset");
    need(out, "out");
    const auto data = in_model_units(model->bundle, ds->data);
    std::vector<double> pred;
    for (Eigen::Index i = 0; i < data.X.rows(); ++i) pred.push_back(model->bundle.model.predict(maple::row_of(data.X, i)));
    maple::Json j;
    j["predictions"] = pred;
    j["rmse"] = maple::rmse(pred, std::span<const double>(data.y.data(), static_cast<std::size_t>(data.y.size())));
    *out = copy_string(maple::dump(j));
  });
}

maple_status maple_model_explain_json(const maple_model* model, const char* point, size_t top_k, char** out) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    const auto x = resolve_point(model->bundle, point);
    const auto& m = model->bundle.model;
    *out = copy_string(maple::dump(maple::explanation_to_json(m.explain(x), m.feature_names(), top_k)));
  });
}

maple_status maple_model_diagnose(const maple_model* model, const maple_dataset* reference, const char* feature,
                                  size_t grid_points, size_t repeats, size_t k, uint64_t seed, char** csv_out,
                                  char** verdict_out) {
  return guarded([&] {
    need(model, "model");
    need(reference, "reference dataset");
    need(feature, "feature");
    const auto& m = model->bundle.model;
    const auto& names = m.feature_names();
    const auto it = std::find(names.begin(), names.end(), std::string(feature));
    if (it == names.end()) maple::fail(maple::ErrorCode::invalid_argument, std::string("unknown feature '") + feature + "'");
    const int j = static_cast<int>(it - names.begin()) + 1;
    maple::require(grid_points >= 3, "need at least 3 grid points");
    maple::require(k >= 1 && k <= static_cast<std::size_t>(m.X_train().rows()), "k must lie in [1, training rows]");

    const auto ref = in_model_units(model->bundle, reference->data);
    const auto col = m.X_train().col(j);
    const auto grid = maple::even_grid(col.minCoeff(), col.maxCoeff(), grid_points);
    maple::GridOptions opt;
    opt.repeats = repeats;
    opt.k = k;
    opt.seed = seed;
    const auto gd = maple::grid_diagnostic(m, ref.X, j, grid, opt);
    const auto verdict = maple::detect_global_pattern(gd);
    std::ostringstream line;
    line << (verdict.pattern_detected ? "pattern_detected" : "none") << " score=" << verdict.score;
    if (csv_out) *csv_out = copy_string(maple::grid_to_csv(gd));
    if (verdict_out) *verdict_out = copy_string(line.str());
  });
}

maple_status maple_model_choose_exemplar_json(const maple_model* model, const char* exemplars_json, const char* point,
                                              double threshold, double margin, char** out) {
  return guarded([&] {
    need(model, "model");
    need(exemplars_json, "exemplars");
    need(out, "out");
    const auto& b = model->bundle;
    maple::Json list;
    try {
      list = maple::Json::parse(exemplars_json);
    } catch (const nlohmann::json::exception&) {
      maple::fail(maple::ErrorCode::parse, "exemplars must be a JSON array of points");
    }
    if (!list.is_array() || list.empty()) maple::fail(maple::ErrorCode::invalid_argument, "exemplar library is empty");
    std::vector<std::vector<double>> queries;
    for (const auto& e : list) queries.push_back(resolve_point(b, e.dump().c_str()));
    const auto lib = maple::build_library(b.model, queries, threshold, margin);
    const auto x = resolve_point(b, point);
    std::vector<double> scores;
    const auto choice = maple::choose_exemplar(lib, b.model, x, &scores);

    maple::Json j;
    j["scores"] = scores;
    if (const auto* c = std::get_if<maple::Chosen>(&choice)) {
      j["decision"] = "chosen";
      j["exemplar"] = c->index;
      j["explanation"] = maple::explanation_to_json(lib.exemplars[c->index].explanation, b.model.feature_names(), 0);
    } else if (const auto* a = std::get_if<maple::Ambiguous>(&choice)) {
      j["decision"] = "ambiguous";
      j["candidates"] = a->candidates;
    } else {
      j["decision"] = "no_applicable";
    }
    *out = copy_string(maple::dump(j));
  });
}

maple_status maple_eval_model_json(const maple_model* model, const char* metric, double sigma, size_t draws,
                                   size_t trials, uint64_t seed, char** report_json, char** markdown) {
  return guarded([&] {
    need(model, "model");
    need(metric, "metric");
    maple::require(trials >= 1, "trials must be >= 1");
    const auto& b = model->bundle;
    const auto& m = b.model;
    maple::require(b.test_X.rows() >= 1, "model bundle has no held-out rows");
    const auto kind = maple::parse_metric(metric);
    if (kind != maple::MetricKind::rmse && m.mode() == maple::FitMode::blackbox)
      maple::fail(maple::ErrorCode::invalid_argument,
                  "explanation metrics need a callable model; this bundle was fit to black-box predictions given as data");

    const maple::Explainer explainer = [&m](maple::Row x) { return m.local_fit(x, m.d()); };
    const maple::Predictor predictor = [&m](maple::Row x) { return m.predict(x); };
    std::vector<double> values;
    for (std::size_t t = 0; t < trials; ++t) {
      switch (kind) {
        case maple::MetricKind::rmse: {
          maple::Vector pred(b.test_X.rows());
          for (Eigen::Index i = 0; i < b.test_X.rows(); ++i) pred(i) = m.predict(maple::row_of(b.test_X, i));
          values.push_back(maple::rmse(pred, b.test_y));
          break;
        }
        case maple::MetricKind::causal:
          values.push_back(maple::causal_metric(explainer, predictor, b.test_X, {sigma, draws, seed + t}));
          break;
        case maple::MetricKind::standard:
          values.push_back(maple::standard_metric(explainer, predictor, b.test_X));
          break;
      }
    }
    maple::TrialReport r;
    r.protocol = "model";
    r.metric = maple::to_string(kind);
    r.trials = trials;
    r.base_seed = seed;
    r.methods.push_back(maple::summarize("maple_" + maple::to_string(m.ensemble().kind), std::move(values)));
    if (report_json) *report_json = copy_string(maple::dump(maple::to_json(r)));
    if (markdown) *markdown = copy_string(maple::to_markdown(r));
  });
}

maple_status maple_eval_protocol_json(const char* protocol_path, const maple_eval_overrides* overrides,
                                      char** report_json, char** markdown) {
  return guarded([&] {
    need(protocol_path, "protocol path");
    const std::filesystem::path path(protocol_path);
    auto pf = maple::protocol_from_json(maple::read_json_file(path), path.parent_path());
    if (overrides) {
      if (overrides->metric) pf.protocol.metric = maple::parse_metric(overrides->metric);
      if (overrides->sigma > 0.0) pf.protocol.causal.sigma = overrides->sigma;
      if (overrides->draws > 0) pf.protocol.causal.draws_per_point = overrides->draws;
      if (overrides->trials > 0) pf.trials = overrides->trials;
      if (overrides->has_seed) {
        pf.seed = overrides->seed;
        pf.protocol.causal.seed = overrides->seed;
      }
      pf.protocol.threads = std::max<std::size_t>(1, overrides->threads);
    }
    const auto r = maple::run_trials(pf.protocol, pf.trials, pf.seed);
    if (report_json) *report_json = copy_string(maple::dump(maple::to_json(r)));
    if (markdown) *markdown = copy_string(maple::to_markdown(r));
  });
}

}  // extern "C"
