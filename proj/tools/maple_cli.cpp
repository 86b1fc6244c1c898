// Command-line front end over the C API.
#include "maple/maple.h"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

namespace {

constexpr int exit_usage = 1;
constexpr int exit_runtime = 2;

struct Failure {
  int code;
  std::string message;
};

void check(maple_status st) {
  if (st != MAPLE_OK) throw Failure{exit_runtime, maple_last_error()};
}

void usage_error(const std::string& message) { throw Failure{exit_usage, message}; }

struct StringDeleter {
  void operator()(char* s) const { maple_string_free(s); }
};
using OwnedString = std::unique_ptr<char, StringDeleter>;

struct DatasetDeleter {
  void operator()(maple_dataset* d) const { maple_dataset_free(d); }
};
using Dataset = std::unique_ptr<maple_dataset, DatasetDeleter>;

struct ModelDeleter {
  void operator()(maple_model* m) const { maple_model_free(m); }
};
using Model = std::unique_ptr<maple_model, ModelDeleter>;

Dataset load_dataset(const std::string& path, const std::string& target) {
  maple_dataset* raw = nullptr;
  check(maple_dataset_load_csv(path.c_str(), target.c_str(), &raw));
  return Dataset(raw);
}

Model load_model(const std::string& path) {
  maple_model* raw = nullptr;
  check(maple_model_load(path.c_str(), &raw));
  return Model(raw);
}

void print_line(const char* s) {
  std::fputs(s, stdout);
  std::fputc('\n', stdout);
}

std::string read_text_or_literal(const std::string& value) {
  std::ifstream in(value);
  if (!in) return value;
  return std::string(std::istreambuf_iterator<char>(in), {});
}

struct SynthArgs {
  std::string kind;
  std::size_t n = 200;
  std::size_t p = 5;
  double noise = 0.1;
  std::uint64_t seed = 0;
  std::string out;
};

struct TrainArgs {
  std::string data;
  std::string target = "y";
  std::string ensemble = "rf";
  std::size_t trees = 100;
  std::size_t min_leaf = 10;
  std::size_t max_features = 0;
  std::size_t max_depth = 0;
  double learning_rate = 0.1;
  double ridge = 1e-6;
  std::uint64_t seed = 0;
  std::string blackbox;
  std::string out;
  std::string select = "validation";
  double sigma = 0.1;
  std::size_t draws = 5;
};

struct PointArgs {
  std::string model;
  std::string point;
  std::string data;
  std::string target = "y";
  std::size_t topk = 10;
};

struct DiagnoseArgs {
  std::string model;
  std::string data;
  std::string target = "y";
  std::string feature;
  std::size_t grid_points = 11;
  std::size_t repeats = 10;
  std::size_t k = 20;
  std::uint64_t seed = 0;
  std::string out;
};

struct ExemplarArgs {
  std::string model;
  std::string exemplars;
  std::string point;
  double threshold = 0.1;
  double margin = 0.05;
};

struct EvalArgs {
  std::string model;
  std::string protocol;
  std::string metric;
  double sigma = 0.1;
  std::size_t draws = 5;
  std::size_t trials = 1;
  std::uint64_t seed = 0;
  std::string markdown;
};

void run_synth(const SynthArgs& a) {
  if (a.n == 0) usage_error("--n must be positive");
  if (a.p == 0) usage_error("--p must be positive");
  if (a.noise < 0) usage_error("--noise must be non-negative");
  check(maple_synth_csv(a.kind.c_str(), a.n, a.p, a.noise, a.seed, a.out.c_str()));
  std::cerr << "wrote " << a.n << " rows to " << a.out << "\n";
}

void run_train(const TrainArgs& a, std::size_t threads) {
  if (a.trees == 0) usage_error("--trees must be positive");
  if (a.min_leaf == 0) usage_error("--min-leaf must be positive");
  if (a.ridge < 0) usage_error("--ridge must be non-negative");
  auto ds = load_dataset(a.data, a.target);

  maple_train_options o;
  maple_train_options_init(&o);
  o.ensemble = a.ensemble.c_str();
  o.n_trees = a.trees;
  o.min_samples_leaf = a.min_leaf;
  o.max_features = a.max_features;
  o.max_depth = a.max_depth;
  o.learning_rate = a.learning_rate;
  o.ridge = a.ridge;
  o.seed = a.seed;
  o.threads = threads;
  o.causal_selection = a.select == "causal";
  o.sigma = a.sigma;
  o.draws = a.draws;

  double* preds = nullptr;
  std::size_t n_preds = 0;
  if (!a.blackbox.empty()) check(maple_read_predictions_csv(a.blackbox.c_str(), &preds, &n_preds));
  std::unique_ptr<double, void (*)(double*)> owned(preds, maple_doubles_free);

  maple_model* raw = nullptr;
  check(maple_model_train(ds.get(), &o, preds, n_preds, &raw));
  Model model(raw);
  check(maple_model_save(model.get(), a.out.c_str()));

  char* s = nullptr;
  check(maple_model_summary_json(model.get(), &s));
  OwnedString summary(s);
  print_line(summary.get());
  std::size_t p = 0, d = 0;
  check(maple_model_dimension(model.get(), &p, &d));
  std::cerr << "trained " << a.ensemble << " MAPLE with d=" << d << " of " << p << " features; saved " << a.out << "\n";
}

void run_predict(const PointArgs& a) {
  auto model = load_model(a.model);
  if (a.point.empty() == a.data.empty()) usage_error("give exactly one of --point or --data");
  if (!a.point.empty()) {
    double v = 0.0;
    check(maple_model_predict(model.get(), a.point.c_str(), &v));
    char buf[64];
    std::snprintf(buf, sizeof buf, "{\"prediction\": %.17g}", v);
    print_line(buf);
    return;
  }
  auto ds = load_dataset(a.data, a.target);
  char* s = nullptr;
  check(maple_model_predict_dataset_json(model.get(), ds.get(), &s));
  OwnedString out(s);
  print_line(out.get());
}

void run_explain(const PointArgs& a) {
  auto model = load_model(a.model);
  char* s = nullptr;
  check(maple_model_explain_json(model.get(), a.point.c_str(), a.topk, &s));
  OwnedString out(s);
  print_line(out.get());
}

void run_diagnose(const DiagnoseArgs& a) {
  if (a.grid_points < 3) usage_error("--grid-points must be at least 3");
  if (a.repeats == 0) usage_error("--repeats must be positive");
  if (a.k == 0) usage_error("--k must be positive");
  auto model = load_model(a.model);
  auto ref = load_dataset(a.data, a.target);
  char* csv = nullptr;
  char* verdict = nullptr;
  check(maple_model_diagnose(model.get(), ref.get(), a.feature.c_str(), a.grid_points, a.repeats, a.k, a.seed, &csv,
                             &verdict));
  OwnedString csv_owned(csv), verdict_owned(verdict);
  if (a.out.empty()) {
    std::fputs(csv, stdout);
  } else {
    std::ofstream f(a.out, std::ios::binary);
    if (!f || !(f << csv)) throw Failure{exit_runtime, "cannot write '" + a.out + "'"};
  }
  print_line(verdict);
}

void run_exemplar(const ExemplarArgs& a) {
  auto model = load_model(a.model);
  const auto library = read_text_or_literal(a.exemplars);
  char* s = nullptr;
  check(maple_model_choose_exemplar_json(model.get(), library.c_str(), a.point.c_str(), a.threshold, a.margin, &s));
  OwnedString out(s);
  print_line(out.get());
}

void emit_report(char* json, char* md, const std::string& markdown_path) {
  OwnedString j(json), m(md);
  print_line(j.get());
  if (markdown_path.empty()) {
    std::cerr << m.get();
  } else {
    std::ofstream f(markdown_path, std::ios::binary);
    if (!f || !(f << m.get())) throw Failure{exit_runtime, "cannot write '" + markdown_path + "'"};
  }
}

void run_eval(const EvalArgs& a, bool sigma_set, bool draws_set, bool trials_set, bool seed_set,
              std::size_t threads) {
  if (a.model.empty() == a.protocol.empty()) usage_error("give exactly one of --model or --protocol");
  if (trials_set && a.trials == 0) usage_error("--trials must be positive");
  if (sigma_set && a.sigma <= 0) usage_error("--sigma must be positive");
  if (draws_set && a.draws == 0) usage_error("--draws must be positive");
  char* json = nullptr;
  char* md = nullptr;
  if (!a.model.empty()) {
    auto model = load_model(a.model);
    const std::string metric = a.metric.empty() ? "rmse" : a.metric;
    check(maple_eval_model_json(model.get(), metric.c_str(), a.sigma, a.draws, a.trials, a.seed, &json, &md));
  } else {
    maple_eval_overrides o;
    maple_eval_overrides_init(&o);
    if (!a.metric.empty()) o.metric = a.metric.c_str();
    if (sigma_set) o.sigma = a.sigma;
    if (draws_set) o.draws = a.draws;
    if (trials_set) o.trials = a.trials;
    o.has_seed = seed_set;
    o.seed = a.seed;
    o.threads = threads;
    check(maple_eval_protocol_json(a.protocol.c_str(), &o, &json, &md));
  }
  emit_report(json, md, a.markdown);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Local linear explanations from tree-ensemble neighbourhoods"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", std::string(maple_version()));
  std::size_t threads = 1;
  app.add_option("--threads", threads, "Worker threads for fitting and evaluation")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  SynthArgs sy;
  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset");
  synth->add_option("--kind", sy.kind, "linear, sil or step")->required()->check(CLI::IsMember({"linear", "sil", "step"}));
  synth->add_option("--n", sy.n, "Rows")->capture_default_str();
  synth->add_option("--p", sy.p, "Features")->capture_default_str();
  synth->add_option("--noise", sy.noise, "Noise standard deviation")->capture_default_str();
  synth->add_option("--seed", sy.seed)->capture_default_str();
  synth->add_option("--out", sy.out, "Output CSV")->required();

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Fit a model and save the bundle");
  train->add_option("--data", tr.data, "CSV with a header row")->required();
  train->add_option("--target", tr.target)->capture_default_str();
  train->add_option("--ensemble", tr.ensemble)->check(CLI::IsMember({"rf", "gbrt"}))->capture_default_str();
  train->add_option("--trees", tr.trees)->capture_default_str();
  train->add_option("--min-leaf", tr.min_leaf)->capture_default_str();
  train->add_option("--max-features", tr.max_features, "0 selects the ensemble default")->capture_default_str();
  train->add_option("--max-depth", tr.max_depth, "0 selects the ensemble default")->capture_default_str();
  train->add_option("--learning-rate", tr.learning_rate)->capture_default_str();
  train->add_option("--ridge", tr.ridge)->capture_default_str();
  train->add_option("--seed", tr.seed)->capture_default_str();
  train->add_option("--blackbox-preds", tr.blackbox, "One-column CSV of model outputs, one per data row");
  train->add_option("--select", tr.select, "How d is chosen")
      ->check(CLI::IsMember({"validation", "causal"}))
      ->capture_default_str();
  train->add_option("--sigma", tr.sigma, "Perturbation scale for --select causal")->capture_default_str();
  train->add_option("--draws", tr.draws, "Draws per point for --select causal")->capture_default_str();
  train->add_option("--out", tr.out, "Model bundle path")->required();

  PointArgs pr;
  auto* predict = app.add_subcommand("predict", "Predict in standardized units");
  predict->add_option("--model", pr.model)->required();
  predict->add_option("--point", pr.point, "JSON array of raw feature values or a training row index");
  predict->add_option("--data", pr.data, "CSV to predict row by row");
  predict->add_option("--target", pr.target)->capture_default_str();

  PointArgs ex;
  auto* explain = app.add_subcommand("explain", "Local explanation for one point");
  explain->add_option("--model", ex.model)->required();
  explain->add_option("--point", ex.point, "JSON array of raw feature values or a training row index")->required();
  explain->add_option("--topk", ex.topk, "Influential training points to report")->capture_default_str();

  DiagnoseArgs dg;
  auto* diagnose = app.add_subcommand("diagnose", "Grid search for global patterns along one feature");
  diagnose->add_option("--model", dg.model)->required();
  diagnose->add_option("--data", dg.data, "Reference CSV for the remaining features")->required();
  diagnose->add_option("--target", dg.target)->capture_default_str();
  diagnose->add_option("--feature", dg.feature)->required();
  diagnose->add_option("--grid-points", dg.grid_points)->capture_default_str();
  diagnose->add_option("--repeats", dg.repeats)->capture_default_str();
  diagnose->add_option("--k", dg.k, "Influential points per query")->capture_default_str();
  diagnose->add_option("--seed", dg.seed)->capture_default_str();
  diagnose->add_option("--out", dg.out, "CSV path (standard output when omitted)");

  ExemplarArgs xa;
  auto* exemplar = app.add_subcommand("exemplar", "Pick a stored explanation for a new point");
  exemplar->add_option("--model", xa.model)->required();
  exemplar->add_option("--exemplars", xa.exemplars, "JSON array of points, inline or in a file")->required();
  exemplar->add_option("--point", xa.point)->required();
  exemplar->add_option("--threshold", xa.threshold)->capture_default_str();
  exemplar->add_option("--margin", xa.margin)->capture_default_str();

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Score a saved model or run a protocol file");
  auto* model_opt = eval->add_option("--model", ev.model);
  auto* protocol_opt = eval->add_option("--protocol", ev.protocol);
  model_opt->excludes(protocol_opt);
  eval->add_option("--metric", ev.metric)->check(CLI::IsMember({"rmse", "causal", "standard"}));
  auto* sigma_opt = eval->add_option("--sigma", ev.sigma)->capture_default_str();
  auto* draws_opt = eval->add_option("--draws", ev.draws)->capture_default_str();
  auto* trials_opt = eval->add_option("--trials", ev.trials)->capture_default_str();
  auto* seed_opt = eval->add_option("--seed", ev.seed)->capture_default_str();
  eval->add_option("--markdown", ev.markdown, "Write the markdown table here instead of standard error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_usage;
  }

  try {
    if (*synth) run_synth(sy);
    else if (*train) run_train(tr, threads);
    else if (*predict) run_predict(pr);
    else if (*explain) run_explain(ex);
    else if (*diagnose) run_diagnose(dg);
    else if (*exemplar) run_exemplar(xa);
    else if (*eval)
      run_eval(ev, sigma_opt->count() > 0, draws_opt->count() > 0, trials_opt->count() > 0, seed_opt->count() > 0,
               threads);
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << "\n";
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_runtime;
  }
  return 0;
}
