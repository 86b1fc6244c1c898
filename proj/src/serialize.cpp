#include "maple/serialize.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace maple {

namespace {

template <typename T>
T get(const Json& j, const char* key) {
  if (!j.contains(key)) fail(ErrorCode::parse, std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::parse, std::string("field '") + key + "': " + e.what());
  }
}

Json matrix_without_constant(const Matrix& X) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    Json r = Json::array();
    for (Eigen::Index j = 1; j < X.cols(); ++j) r.push_back(X(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

Matrix matrix_with_constant(const Json& rows, std::size_t p) {
  if (!rows.is_array()) fail(ErrorCode::parse, "matrix must be an array of rows");
  Matrix X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(p + 1));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (!r.is_array() || r.size() != p) fail(ErrorCode::parse, "matrix row " + std::to_string(i) + " has the wrong length");
    X(static_cast<Eigen::Index>(i), 0) = 1.0;
    for (std::size_t j = 0; j < p; ++j) X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j + 1)) = r[j].get<double>();
  }
  return X;
}

Json vector_json(const Vector& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector vector_from(const Json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

const std::string& name_of(const std::vector<std::string>& names, int j) {
  return names.at(static_cast<std::size_t>(j - 1));
}

std::string selection_name(DSelection s) { return s == DSelection::validation_rmse ? "validation_rmse" : "causal_metric"; }

DSelection parse_selection(const std::string& s) {
  if (s == "validation_rmse") return DSelection::validation_rmse;
  if (s == "causal_metric") return DSelection::causal_metric;
  fail(ErrorCode::parse, "unknown d selection '" + s + "'");
}

}  // namespace

Json to_json(const EnsembleConfig& cfg) {
  Json j;
  j["n_trees"] = cfg.n_trees;
  j["min_samples_leaf"] = cfg.min_samples_leaf;
  j["max_features"] = cfg.max_features;
  j["max_depth"] = cfg.max_depth ? Json(*cfg.max_depth) : Json(nullptr);
  j["learning_rate"] = cfg.learning_rate;
  j["seed"] = cfg.seed;
  j["bootstrap"] = cfg.bootstrap;
  return j;
}

EnsembleConfig ensemble_config_from_json(const Json& j) {
  EnsembleConfig cfg;
  if (j.contains("n_trees")) cfg.n_trees = get<std::size_t>(j, "n_trees");
  if (j.contains("min_samples_leaf")) cfg.min_samples_leaf = get<std::size_t>(j, "min_samples_leaf");
  if (j.contains("max_features")) cfg.max_features = get<std::size_t>(j, "max_features");
  if (j.contains("max_depth") && !j["max_depth"].is_null()) cfg.max_depth = get<std::size_t>(j, "max_depth");
  if (j.contains("learning_rate")) cfg.learning_rate = get<double>(j, "learning_rate");
  if (j.contains("seed")) cfg.seed = get<std::uint64_t>(j, "seed");
  if (j.contains("bootstrap")) cfg.bootstrap = get<bool>(j, "bootstrap");
  return cfg;
}

Json to_json(const Ensemble& e) {
  Json j;
  j["kind"] = to_string(e.kind);
  j["config"] = to_json(e.config);
  j["base"] = e.gbrt_base;
  j["learning_rate"] = e.gbrt_learning_rate;
  Json trees = Json::array();
  for (const auto& t : e.trees) {
    Json nodes = Json::array();
    for (const auto& n : t.nodes) {
      Json rec;
      if (n.is_leaf()) {
        const auto leaf = static_cast<std::size_t>(n.leaf_id);
        rec["leaf_id"] = n.leaf_id;
        rec["count"] = leaf < t.leaf_counts.size() ? t.leaf_counts[leaf] : 0;
        rec["value"] = t.leaf_values[leaf];
      } else {
        rec["feature"] = n.feature;
        rec["threshold"] = n.threshold;
        rec["left"] = n.left;
        rec["right"] = n.right;
      }
      nodes.push_back(std::move(rec));
    }
    Json tj;
    tj["nodes"] = std::move(nodes);
    tj["root_split_feature"] = t.root_split_feature;
    tj["root_impurity_reduction"] = t.root_impurity_reduction;
    trees.push_back(std::move(tj));
  }
  j["trees"] = std::move(trees);
  return j;
}

Ensemble ensemble_from_json(const Json& j) {
  Ensemble e;
  e.kind = parse_ensemble_kind(get<std::string>(j, "kind"));
  if (j.contains("config")) e.config = ensemble_config_from_json(j["config"]);
  e.gbrt_base = get<double>(j, "base");
  e.gbrt_learning_rate = get<double>(j, "learning_rate");
  const auto& trees = j.at("trees");
  if (!trees.is_array() || trees.empty()) fail(ErrorCode::parse, "ensemble has no trees");
  for (const auto& tj : trees) {
    RegressionTree t;
    const auto& nodes = tj.at("nodes");
    if (!nodes.is_array() || nodes.empty()) fail(ErrorCode::parse, "tree has no nodes");
    std::size_t leaves = 0;
    for (const auto& rec : nodes)
      if (rec.contains("leaf_id")) ++leaves;
    t.leaf_values.assign(leaves, 0.0);
    t.leaf_counts.assign(leaves, 0);
    std::vector<bool> seen(leaves, false);
    const auto n_nodes = static_cast<int>(nodes.size());
    for (const auto& rec : nodes) {
      TreeNode n;
      if (rec.contains("leaf_id")) {
        n.leaf_id = get<int>(rec, "leaf_id");
        if (n.leaf_id < 0 || static_cast<std::size_t>(n.leaf_id) >= leaves || seen[static_cast<std::size_t>(n.leaf_id)])
          fail(ErrorCode::parse, "leaf ids must be dense and unique");
        seen[static_cast<std::size_t>(n.leaf_id)] = true;
        t.leaf_values[static_cast<std::size_t>(n.leaf_id)] = get<double>(rec, "value");
        t.leaf_counts[static_cast<std::size_t>(n.leaf_id)] = get<std::size_t>(rec, "count");
      } else {
        n.feature = get<int>(rec, "feature");
        n.threshold = get<double>(rec, "threshold");
        n.left = get<int>(rec, "left");
        n.right = get<int>(rec, "right");
        if (n.feature < 1) fail(ErrorCode::parse, "internal nodes must split on a feature >= 1");
        if (n.left <= 0 || n.right <= 0 || n.left >= n_nodes || n.right >= n_nodes)
          fail(ErrorCode::parse, "child index out of range");
      }
      t.nodes.push_back(n);
    }
    t.root_split_feature = get<int>(tj, "root_split_feature");
    t.root_impurity_reduction = get<double>(tj, "root_impurity_reduction");
    e.trees.push_back(std::move(t));
  }
  return e;
}

Json to_json(const LocalWeights& w, std::optional<std::size_t> query_id) {
  Json j;
  if (query_id) j["query_id"] = *query_id;
  Json entries = Json::array();
  for (const auto& e : w.sorted_by_weight()) entries.push_back({{"index", e.index}, {"weight", e.weight}});
  j["entries"] = std::move(entries);
  return j;
}

Json scores_to_json(const FeatureScores& s, const std::vector<std::string>& names) {
  Json j = Json::object();
  for (int f : rank_features(s)) j[name_of(names, f)] = s.score(f);
  return j;
}

Json explanation_to_json(const Explanation& e, const std::vector<std::string>& names, std::size_t top_k) {
  Json j;
  j["query"] = std::vector<double>(e.query.begin() + 1, e.query.end());
  j["prediction"] = e.predict_at(e.query);
  j["intercept"] = e.intercept();
  Json coeffs = Json::object();
  for (const auto& [f, c] : e.form.coefficients) coeffs[name_of(names, f)] = c;
  j["coefficients"] = std::move(coeffs);
  Json missing = Json::array();
  for (int f : e.not_selected) missing.push_back(name_of(names, f));
  j["not_selected"] = std::move(missing);
  Json top = Json::array();
  const auto sorted = e.weights.sorted_by_weight();
  for (std::size_t i = 0; i < std::min(top_k, sorted.size()); ++i)
    top.push_back({{"index", sorted[i].index}, {"weight", sorted[i].weight}});
  j["top_weights"] = std::move(top);
  return j;
}

Json to_json(const ModelBundle& b) {
  const auto& m = b.model;
  Json j;
  j["format"] = "maple-model";
  j["version"] = 1;
  j["mode"] = to_string(m.mode());
  j["d"] = m.d();
  j["ridge"] = m.ridge();
  j["feature_names"] = m.feature_names();
  Json selected = Json::array();
  for (int f : m.selected()) selected.push_back(name_of(m.feature_names(), f));
  j["selected"] = std::move(selected);
  j["scores"] = scores_to_json(m.scores(), m.feature_names());
  j["selection"] = selection_name(m.selection());
  Json curve = Json::array();
  for (const auto& s : m.sweep()) curve.push_back({{"d", s.d}, {"value", s.value}});
  j["validation_curve"] = std::move(curve);
  if (b.scaling) {
    j["standardization"] = {{"mean", b.scaling->mean},
                            {"scale", b.scaling->scale},
                            {"y_mean", b.scaling->y_mean},
                            {"y_scale", b.scaling->y_scale}};
  } else {
    j["standardization"] = nullptr;
  }
  j["ensemble"] = to_json(m.ensemble());
  j["training"] = {{"X", matrix_without_constant(m.X_train())}, {"y", vector_json(m.y_fit())}};
  j["test"] = {{"X", matrix_without_constant(b.test_X)}, {"y", vector_json(b.test_y)}};
  if (b.split) {
    j["split"] = {{"seed", b.split->seed}, {"train", b.split->train}, {"val", b.split->val}, {"test", b.split->test}};
  } else {
    j["split"] = nullptr;
  }
  return j;
}

ModelBundle bundle_from_json(const Json& j) {
  if (!j.is_object() || j.value("format", "") != "maple-model") fail(ErrorCode::parse, "not a model bundle");
  try {
    const auto names = get<std::vector<std::string>>(j, "feature_names");
    const auto p = names.size();
    auto ensemble = ensemble_from_json(j.at("ensemble"));
    auto X = matrix_with_constant(j.at("training").at("X"), p);
    auto y = vector_from(j.at("training").at("y"));
    MapleModel model(std::move(ensemble), std::move(X), std::move(y), get<std::size_t>(j, "d"), get<double>(j, "ridge"),
                     parse_fit_mode(get<std::string>(j, "mode")), names);
    const auto selected = get<std::vector<std::string>>(j, "selected");
    const auto recomputed = model.selected();
    for (std::size_t i = 0; i < selected.size(); ++i)
      if (selected[i] != names[static_cast<std::size_t>(recomputed[i] - 1)])
        fail(ErrorCode::parse, "stored feature selection disagrees with the ensemble's root splits");
    std::vector<SweepPoint> sweep;
    for (const auto& s : j.at("validation_curve")) sweep.push_back({get<std::size_t>(s, "d"), get<double>(s, "value")});
    model.set_sweep(std::move(sweep), parse_selection(j.value("selection", "validation_rmse")));

    ModelBundle b{std::move(model), std::nullopt, Matrix(), Vector(), std::nullopt};
    if (!j.at("standardization").is_null()) {
      const auto& s = j["standardization"];
      b.scaling = Standardization{get<std::vector<double>>(s, "mean"), get<std::vector<double>>(s, "scale"),
                                  get<double>(s, "y_mean"), get<double>(s, "y_scale")};
      if (b.scaling->mean.size() != p + 1 || b.scaling->scale.size() != p + 1)
        fail(ErrorCode::parse, "standardization has the wrong length");
    }
    b.test_X = matrix_with_constant(j.at("test").at("X"), p);
    b.test_y = vector_from(j.at("test").at("y"));
    if (j.contains("split") && !j["split"].is_null()) {
      const auto& s = j["split"];
      b.split = SplitAssignment{get<std::vector<std::size_t>>(s, "train"), get<std::vector<std::size_t>>(s, "val"),
                                get<std::vector<std::size_t>>(s, "test"), get<std::uint64_t>(s, "seed")};
    }
    return b;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::parse, std::string("malformed model bundle: ") + e.what());
  }
}

void save_bundle(const ModelBundle& b, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io, "cannot write '" + path.string() + "'");
  out << dump(to_json(b)) << '\n';
  if (!out) fail(ErrorCode::io, "failed writing '" + path.string() + "'");
}

ModelBundle load_bundle(const std::filesystem::path& path) { return bundle_from_json(read_json_file(path)); }

Json to_json(const BoxStats& s) {
  return {{"min", s.min}, {"q1", s.q1}, {"median", s.median}, {"q3", s.q3}, {"max", s.max}, {"mean", s.mean}};
}

Json to_json(const GridDiagnostic& gd, const std::vector<std::string>& names) {
  Json j;
  j["feature"] = name_of(names, gd.feature);
  j["grid"] = gd.grid;
  j["repeats"] = gd.repeats;
  j["k"] = gd.k;
  j["sampler"] = to_string(gd.sampler);
  Json cells = Json::array();
  for (const auto& c : gd.per_cell) {
    Json reps = Json::array();
    for (const auto& r : c.per_repeat) reps.push_back(to_json(r));
    cells.push_back({{"grid_value", c.grid_value}, {"pooled", to_json(c.pooled)}, {"per_repeat", std::move(reps)}});
  }
  j["per_cell"] = std::move(cells);
  return j;
}

std::string grid_to_csv(const GridDiagnostic& gd) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "grid_value,repeat,min,q1,median,q3,max\n";
  for (const auto& c : gd.per_cell)
    for (std::size_t r = 0; r < c.per_repeat.size(); ++r) {
      const auto& s = c.per_repeat[r];
      out << c.grid_value << ',' << r << ',' << s.min << ',' << s.q1 << ',' << s.median << ',' << s.q3 << ',' << s.max << '\n';
    }
  return out.str();
}

Json to_json(const TrialReport& r) {
  Json j;
  j["protocol"] = r.protocol;
  j["metric"] = r.metric;
  j["trials"] = r.trials;
  j["base_seed"] = r.base_seed;
  Json methods = Json::array();
  for (const auto& m : r.methods)
    methods.push_back({{"name", m.name}, {"mean", m.mean}, {"sd", m.sd}, {"values", m.values}});
  j["methods"] = std::move(methods);
  Json comps = Json::array();
  for (const auto& c : r.comparisons) {
    comps.push_back({{"first", c.first},
                     {"second", c.second},
                     {"mean_difference", c.mean_difference},
                     {"t_statistic", std::isfinite(c.t_statistic) ? Json(c.t_statistic) : Json(nullptr)},
                     {"p_value", c.p_value},
                     {"significant", c.significant}});
  }
  j["comparisons"] = std::move(comps);
  return j;
}

std::string to_markdown(const TrialReport& r) {
  std::ostringstream out;
  out << "| Dataset |";
  for (const auto& m : r.methods) out << ' ' << m.name << " |";
  out << "\n|---|";
  for (std::size_t i = 0; i < r.methods.size(); ++i) out << "---|";
  out << "\n| " << r.protocol << " |";
  for (std::size_t i = 0; i < r.methods.size(); ++i) {
    std::ostringstream cell;
    cell << std::setprecision(4) << r.methods[i].mean;
    const bool marked = i > 0 && r.comparisons[i - 1].significant;
    out << ' ' << (marked ? "<u>" + cell.str() + "</u>" : cell.str()) << " |";
  }
  out << "\n\n" << r.metric << " averaged over " << r.trials << " trial" << (r.trials == 1 ? "" : "s")
      << "; underlined entries differ significantly from " << (r.methods.empty() ? "" : r.methods[0].name)
      << " (paired t-test, alpha 0.05).\n";
  return out.str();
}

ProtocolFile protocol_from_json(const Json& j, const std::filesystem::path& base_dir) {
  try {
    ProtocolFile pf;
    auto& p = pf.protocol;
    p.name = j.value("name", "experiment");
    std::filesystem::path data = get<std::string>(j, "dataset");
    if (data.is_relative()) data = base_dir / data;
    auto ds = load_csv(data, get<std::string>(j, "target"));
    if (j.contains("drop")) {
      const auto drop = get<std::vector<std::string>>(j, "drop");
      std::vector<Eigen::Index> keep{0};
      std::vector<std::string> names;
      for (std::size_t c = 0; c < ds.feature_names.size(); ++c) {
        if (std::find(drop.begin(), drop.end(), ds.feature_names[c]) == drop.end()) {
          keep.push_back(static_cast<Eigen::Index>(c + 1));
          names.push_back(ds.feature_names[c]);
        }
      }
      Matrix X(ds.X.rows(), static_cast<Eigen::Index>(keep.size()));
      for (std::size_t c = 0; c < keep.size(); ++c) X.col(static_cast<Eigen::Index>(c)) = ds.X.col(keep[c]);
      ds.X = std::move(X);
      ds.feature_names = std::move(names);
    }
    p.dataset = std::move(ds);
    if (j.contains("methods")) p.methods = get<std::vector<std::string>>(j, "methods");
    if (j.contains("metric")) p.metric = parse_metric(get<std::string>(j, "metric"));
    if (j.contains("sigma")) p.causal.sigma = get<double>(j, "sigma");
    if (j.contains("draws")) p.causal.draws_per_point = get<std::size_t>(j, "draws");
    if (j.contains("ridge")) p.ridge = get<double>(j, "ridge");
    if (j.contains("blackbox") && !j["blackbox"].is_null()) p.blackbox = get<std::string>(j, "blackbox");
    if (j.contains("explained")) p.explained = get<std::string>(j, "explained");
    if (j.contains("ensemble")) p.ensemble = ensemble_config_from_json(j["ensemble"]);
    if (j.contains("trials")) pf.trials = get<std::size_t>(j, "trials");
    if (j.contains("seed")) pf.seed = get<std::uint64_t>(j, "seed");
    p.causal.seed = pf.seed;
    return pf;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::parse, std::string("malformed protocol: ") + e.what());
  }
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::parse, "'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

std::string dump(const Json& j) { return j.dump(2); }

}  // namespace maple
