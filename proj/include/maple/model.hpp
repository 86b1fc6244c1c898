#pragma once

#include "maple/data.hpp"
#include "maple/dstump.hpp"
#include "maple/eval.hpp"
#include "maple/explanation.hpp"
#include "maple/forest.hpp"
#include "maple/silo.hpp"

#include <optional>
#include <string>
#include <vector>

namespace maple {

enum class FitMode { self, blackbox };
std::string to_string(FitMode mode);
FitMode parse_fit_mode(const std::string& name);

enum class DSelection { validation_rmse, causal_metric };

struct MapleConfig {
  EnsembleKind kind = EnsembleKind::rf;
  EnsembleConfig ensemble;
  double ridge = 1e-6;
  DSelection selection = DSelection::validation_rmse;
  /// Perturbation settings for DSelection::causal_metric.
  CausalConfig causal;
  /// Sweep roughly log-spaced d values instead of 1..p.
  bool log_spaced_sweep = false;
  /// Skips the sweep and uses this d (d = p gives SILO).
  std::optional<std::size_t> fixed_d;
};

/// A local linear explanation together with the training distribution behind it.
struct Explanation {
  std::vector<double> query;
  LinearForm form;
  LocalWeights weights;
  /// Features outside the selected set, ascending.
  std::vector<int> not_selected;

  double intercept() const { return form.intercept; }
  double predict_at(Row x) const { return form.predict_at(x); }
  std::optional<double> coefficient(int feature) const;
};

struct SweepPoint {
  std::size_t d = 0;
  double value = 0.0;
};

class MapleModel {
 public:
  MapleModel(Ensemble ensemble, Matrix X_train, Vector y_fit, std::size_t d, double ridge, FitMode mode,
             std::vector<std::string> feature_names);

  double predict(Row x) const;
  Explanation explain(Row x) const;
  LocalWeights weights(Row x) const { return neighborhoods_.weights(ensemble_, x); }

  /// Local linear fit using the top `d` features instead of the stored d.
  LinearForm local_fit(Row x, std::size_t d) const;

  const Ensemble& ensemble() const { return ensemble_; }
  const Neighborhoods& neighborhoods() const { return neighborhoods_; }
  const Matrix& X_train() const { return X_train_; }
  const Vector& y_fit() const { return y_fit_; }
  const FeatureScores& scores() const { return scores_; }
  /// All features in descending score order.
  const std::vector<int>& ranking() const { return ranking_; }
  /// The selected set A_d in rank order.
  std::vector<int> selected() const;
  std::size_t d() const { return d_; }
  std::size_t features() const { return static_cast<std::size_t>(X_train_.cols()) - 1; }
  double ridge() const { return ridge_; }
  FitMode mode() const { return mode_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }
  const std::vector<SweepPoint>& sweep() const { return sweep_; }
  DSelection selection() const { return selection_; }

  void set_sweep(std::vector<SweepPoint> sweep, DSelection how) {
    sweep_ = std::move(sweep);
    selection_ = how;
  }

 private:
  std::vector<int> columns_for(std::size_t d) const;
  LinearForm form_from(const Vector& beta, std::span<const int> columns) const;

  Ensemble ensemble_;
  Matrix X_train_;
  Vector y_fit_;
  FeatureScores scores_;
  std::vector<int> ranking_;
  std::size_t d_;
  double ridge_;
  FitMode mode_;
  std::vector<std::string> feature_names_;
  Neighborhoods neighborhoods_;
  std::vector<SweepPoint> sweep_;
  DSelection selection_ = DSelection::validation_rmse;
};

/// Fits the ensemble on the training rows, scores features by root splits, and
/// picks d on the validation rows.
MapleModel fit(const Dataset& ds, const SplitAssignment& split, const MapleConfig& cfg);

/// As `fit`, with the response replaced by `predictions` (one per dataset row).
MapleModel fit_blackbox(const Dataset& ds, const SplitAssignment& split, std::span<const double> predictions,
                        const MapleConfig& cfg);

/// The d values considered by the sweep.
std::vector<std::size_t> sweep_values(std::size_t p, bool log_spaced);

}  // namespace maple
