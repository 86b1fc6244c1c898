#pragma once

#include "maple/common.hpp"
#include "maple/data.hpp"

#include <optional>
#include <random>
#include <string>
#include <vector>

namespace maple {

enum class EnsembleKind { rf, gbrt };

EnsembleKind parse_ensemble_kind(const std::string& name);
std::string to_string(EnsembleKind kind);

struct EnsembleConfig {
  std::size_t n_trees = 100;
  std::size_t min_samples_leaf = 10;
  /// Candidate features per split; 0 selects the default for the ensemble kind.
  std::size_t max_features = 0;
  /// Unset selects the default for the ensemble kind (unlimited for RF, 3 for GBRT).
  std::optional<std::size_t> max_depth;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
  /// Bootstrap resampling of the training rows for RF trees.
  bool bootstrap = true;
  std::size_t threads = 1;
};

/// Fills in kind-dependent defaults for a design with p features.
EnsembleConfig resolve_config(EnsembleConfig cfg, EnsembleKind kind, std::size_t p);

/// Internal nodes have feature >= 1; leaves have feature == -1 and a dense leaf_id.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int leaf_id = -1;

  bool is_leaf() const { return feature < 0; }
};

class RegressionTree {
 public:
  std::vector<TreeNode> nodes;
  std::vector<double> leaf_values;
  /// Full-training-set membership per leaf, filled by `count_members`.
  std::vector<std::size_t> leaf_counts;
  /// -1 when the root is a leaf.
  int root_split_feature = -1;
  /// Size-weighted variance reduction of the root split divided by the root sample size.
  double root_impurity_reduction = 0.0;
  /// Rows (with repeats) the tree was grown on. Not persisted.
  std::vector<std::size_t> sample_rows;

  std::size_t leaf_count() const { return leaf_values.size(); }
  int leaf_index(Row x) const;
  double predict(Row x) const { return leaf_values[static_cast<std::size_t>(leaf_index(x))]; }
  void count_members(const Matrix& X);
};

/// Grows a CART regression tree on `rows` of (X, y). `max_features` must already be resolved.
RegressionTree fit_tree(const Matrix& X, const Vector& y, std::span<const std::size_t> rows,
                        const EnsembleConfig& cfg, std::mt19937_64& rng);

struct Ensemble {
  EnsembleKind kind = EnsembleKind::rf;
  std::vector<RegressionTree> trees;
  double gbrt_base = 0.0;
  double gbrt_learning_rate = 0.0;
  EnsembleConfig config;

  std::size_t size() const { return trees.size(); }
  double predict(Row x) const;
};

Ensemble fit_random_forest(const Matrix& X, const Vector& y, const EnsembleConfig& cfg);
Ensemble fit_gbrt(const Matrix& X, const Vector& y, const EnsembleConfig& cfg);
Ensemble fit_ensemble(EnsembleKind kind, const Matrix& X, const Vector& y, const EnsembleConfig& cfg);

/// Convenience overloads fitting on the training rows of a dataset.
Ensemble fit_random_forest(const Dataset& ds, const SplitAssignment& split, const EnsembleConfig& cfg);
Ensemble fit_gbrt(const Dataset& ds, const SplitAssignment& split, const EnsembleConfig& cfg);

inline int leaf_index(const RegressionTree& tree, Row x) { return tree.leaf_index(x); }
inline double predict_ensemble(const Ensemble& e, Row x) { return e.predict(x); }

/// Copy of `e` whose leaf values are the means of y over every row of X in the leaf.
Ensemble with_full_training_leaf_means(const Ensemble& e, const Matrix& X, const Vector& y);

}  // namespace maple
