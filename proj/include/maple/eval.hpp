#pragma once

#include "maple/common.hpp"
#include "maple/data.hpp"
#include "maple/explanation.hpp"
#include "maple/forest.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace maple {

using Explainer = std::function<LinearForm(Row)>;
using Predictor = std::function<double(Row)>;

/// Perturbation neighbourhood N(x, sigma^2 I) over the non-constant columns.
struct CausalConfig {
  double sigma = 0.1;
  std::size_t draws_per_point = 5;
  std::uint64_t seed = 0;
};

/// RMSE of exp_x(x') against model(x') for x' drawn around every test row.
double causal_metric(const Explainer& explainer, const Predictor& model, const Matrix& test_X, const CausalConfig& cfg);

/// RMSE of exp_x(x) against model(x) over the test rows.
double standard_metric(const Explainer& explainer, const Predictor& model, const Matrix& test_X);

double rmse(std::span<const double> pred, std::span<const double> truth);
inline double rmse(const Vector& pred, const Vector& truth) {
  return rmse(std::span<const double>(pred.data(), static_cast<std::size_t>(pred.size())),
              std::span<const double>(truth.data(), static_cast<std::size_t>(truth.size())));
}

/// The zero-coefficient explanation exp_x(x') = model(x).
Explainer constant_explainer(Predictor model);

/// RBF kernel ridge regressor used as a built-in black box.
class KernelRidge {
 public:
  /// bandwidth <= 0 selects the median pairwise distance of the training rows.
  KernelRidge(const Matrix& X, const Vector& y, double ridge = 1.0, double bandwidth = 0.0);
  double predict(Row x) const;
  double bandwidth() const { return bandwidth_; }

 private:
  Matrix X_;
  Vector alpha_;
  double bandwidth_;
};

struct PairedTest {
  std::string first;
  std::string second;
  double mean_difference = 0.0;
  double t_statistic = 0.0;
  double p_value = 1.0;
  bool significant = false;
};

/// Two-sided paired t-test on per-trial differences.
PairedTest paired_t_test(const std::string& first, const std::vector<double>& a, const std::string& second,
                         const std::vector<double>& b, double alpha = 0.05);

struct MethodSummary {
  std::string name;
  std::vector<double> values;
  double mean = 0.0;
  double sd = 0.0;
};

MethodSummary summarize(const std::string& name, std::vector<double> values);

enum class MetricKind { rmse, causal, standard };
MetricKind parse_metric(const std::string& name);
std::string to_string(MetricKind m);

/// One experiment: a dataset, the methods to compare, and how to score them.
///
/// Methods: maple_rf, maple_gbrt, silo_rf, silo_gbrt, rf, gbrt, lm, constant.
/// With the rmse metric every method is scored on test predictions. With the
/// explanation metrics the scored model is `explained` (self mode) or the
/// black box (black-box mode), and each method acts as its explainer: MAPLE
/// and SILO are fit to the scored model's responses and explain with their
/// local linear models, `lm` with one global linear fit, and `constant` with
/// the zero-coefficient explanation.
struct Protocol {
  std::string name = "experiment";
  Dataset dataset;
  std::vector<std::string> methods{"maple_rf", "rf"};
  MetricKind metric = MetricKind::rmse;
  CausalConfig causal;
  EnsembleConfig ensemble;
  double ridge = 1e-6;
  /// Empty for self mode; "kernel_ridge" for the built-in black box.
  std::string blackbox;
  std::string explained = "maple_rf";
  std::size_t threads = 1;
};

struct TrialReport {
  std::string protocol;
  std::string metric;
  std::size_t trials = 0;
  std::uint64_t base_seed = 0;
  std::vector<MethodSummary> methods;
  /// First method against each of the others.
  std::vector<PairedTest> comparisons;
};

/// Fresh split from base_seed + t, re-standardization, refit, and scoring per trial.
TrialReport run_trials(const Protocol& protocol, std::size_t n_trials, std::uint64_t base_seed);

bool is_known_method(const std::string& method);

}  // namespace maple
