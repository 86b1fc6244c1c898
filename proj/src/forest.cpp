#include "maple/forest.hpp"

#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace maple {

EnsembleKind parse_ensemble_kind(const std::string& name) {
  if (name == "rf") return EnsembleKind::rf;
  if (name == "gbrt") return EnsembleKind::gbrt;
  fail(ErrorCode::invalid_argument, "unknown ensemble '" + name + "' (expected rf or gbrt)");
}

std::string to_string(EnsembleKind kind) { return kind == EnsembleKind::rf ? "rf" : "gbrt"; }

EnsembleConfig resolve_config(EnsembleConfig cfg, EnsembleKind kind, std::size_t p) {
  require(cfg.n_trees >= 1, "n_trees must be >= 1");
  require(cfg.min_samples_leaf >= 1, "min_samples_leaf must be >= 1");
  if (cfg.max_features == 0) cfg.max_features = kind == EnsembleKind::rf ? std::max<std::size_t>(1, p / 3) : p;
  cfg.max_features = std::min(cfg.max_features, p);
  if (!cfg.max_depth && kind == EnsembleKind::gbrt) cfg.max_depth = 3;
  if (kind == EnsembleKind::gbrt) cfg.bootstrap = false;
  cfg.threads = std::max<std::size_t>(1, cfg.threads);
  return cfg;
}

int RegressionTree::leaf_index(Row x) const {
  std::size_t node = 0;
  while (!nodes[node].is_leaf()) {
    const auto& n = nodes[node];
    node = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return nodes[node].leaf_id;
}

void RegressionTree::count_members(const Matrix& X) {
  leaf_counts.assign(leaf_count(), 0);
  for (Eigen::Index i = 0; i < X.rows(); ++i) ++leaf_counts[static_cast<std::size_t>(leaf_index(row_of(X, i)))];
}

namespace {

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double delta = 0.0;
  std::size_t n_left = 0;
};

class TreeGrower {
 public:
  TreeGrower(const Matrix& X, const Vector& y, const EnsembleConfig& cfg, std::mt19937_64& rng)
      : X_(X), y_(y), cfg_(cfg), rng_(rng), p_(static_cast<std::size_t>(X.cols()) - 1) {
    all_features_.resize(p_);
    std::iota(all_features_.begin(), all_features_.end(), 1);
  }

  RegressionTree grow(std::vector<std::size_t> rows) {
    tree_.sample_rows = rows;
    build(std::move(rows), 0);
    return std::move(tree_);
  }

 private:
  std::vector<int> candidate_features() {
    auto pool = all_features_;
    const std::size_t m = std::min(cfg_.max_features, p_);
    for (std::size_t i = 0; i < m; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, p_ - 1);
      std::swap(pool[i], pool[pick(rng_)]);
    }
    pool.resize(m);
    std::sort(pool.begin(), pool.end());
    return pool;
  }

  SplitChoice best_split(std::vector<std::size_t>& rows) {
    SplitChoice best;
    const std::size_t n = rows.size();
    const std::size_t min_leaf = cfg_.min_samples_leaf;
    double total = 0.0;
    for (auto r : rows) total += y_(static_cast<Eigen::Index>(r));
    const double parent_term = total * total / static_cast<double>(n);

    // Size-weighted SSE of the parent, used as the scale for "positive" reductions.
    const double mean = total / static_cast<double>(n);
    double sse = 0.0;
    for (auto r : rows) {
      const double d = y_(static_cast<Eigen::Index>(r)) - mean;
      sse += d * d;
    }
    const double min_gain = 1e-12 * sse;

    for (int j : candidate_features()) {
      const auto col = static_cast<Eigen::Index>(j);
      std::stable_sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
        return X_(static_cast<Eigen::Index>(a), col) < X_(static_cast<Eigen::Index>(b), col);
      });
      double left_sum = 0.0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        left_sum += y_(static_cast<Eigen::Index>(rows[i]));
        const double v = X_(static_cast<Eigen::Index>(rows[i]), col);
        const double next = X_(static_cast<Eigen::Index>(rows[i + 1]), col);
        if (!(v < next)) continue;
        const std::size_t nl = i + 1;
        const std::size_t nr = n - nl;
        if (nl < min_leaf || nr < min_leaf) continue;
        const double right_sum = total - left_sum;
        const double delta = left_sum * left_sum / static_cast<double>(nl) +
                             right_sum * right_sum / static_cast<double>(nr) - parent_term;
        if (delta > best.delta && delta > min_gain) {
          double threshold = v + (next - v) / 2.0;
          if (!(threshold < next)) threshold = v;
          best = {j, threshold, delta, nl};
        }
      }
    }
    return best;
  }

  int make_leaf(const std::vector<std::size_t>& rows) {
    double sum = 0.0;
    for (auto r : rows) sum += y_(static_cast<Eigen::Index>(r));
    TreeNode leaf;
    leaf.leaf_id = static_cast<int>(tree_.leaf_values.size());
    tree_.leaf_values.push_back(sum / static_cast<double>(rows.size()));
    tree_.nodes.push_back(leaf);
    return static_cast<int>(tree_.nodes.size()) - 1;
  }

  bool constant_response(const std::vector<std::size_t>& rows) const {
    const double first = y_(static_cast<Eigen::Index>(rows.front()));
    return std::all_of(rows.begin(), rows.end(), [&](std::size_t r) { return y_(static_cast<Eigen::Index>(r)) == first; });
  }

  int build(std::vector<std::size_t> rows, std::size_t depth) {
    const bool depth_reached = cfg_.max_depth && depth >= *cfg_.max_depth;
    if (rows.size() < 2 * cfg_.min_samples_leaf || depth_reached || constant_response(rows)) return make_leaf(rows);

    const auto split = best_split(rows);
    if (split.feature < 0) return make_leaf(rows);

    if (depth == 0) {
      tree_.root_split_feature = split.feature;
      tree_.root_impurity_reduction = split.delta / static_cast<double>(rows.size());
    }

    std::vector<std::size_t> left, right;
    left.reserve(split.n_left);
    right.reserve(rows.size() - split.n_left);
    for (auto r : rows) {
      if (X_(static_cast<Eigen::Index>(r), split.feature) <= split.threshold)
        left.push_back(r);
      else
        right.push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();

    const int id = static_cast<int>(tree_.nodes.size());
    TreeNode node;
    node.feature = split.feature;
    node.threshold = split.threshold;
    tree_.nodes.push_back(node);
    const int l = build(std::move(left), depth + 1);
    const int r = build(std::move(right), depth + 1);
    tree_.nodes[static_cast<std::size_t>(id)].left = l;
    tree_.nodes[static_cast<std::size_t>(id)].right = r;
    return id;
  }

  const Matrix& X_;
  const Vector& y_;
  const EnsembleConfig& cfg_;
  std::mt19937_64& rng_;
  std::size_t p_;
  std::vector<int> all_features_;
  RegressionTree tree_;
};

void check_training(const Matrix& X, const Vector& y, const EnsembleConfig& cfg) {
  require(X.cols() >= 2, "design matrix needs the constant column and at least one feature");
  require(X.rows() == y.size(), "X and y row counts differ");
  if (static_cast<std::size_t>(X.rows()) < 2 * cfg.min_samples_leaf)
    fail(ErrorCode::invalid_argument, "insufficient training rows: need at least 2 * min_samples_leaf = " +
                                          std::to_string(2 * cfg.min_samples_leaf));
}

std::vector<std::size_t> all_rows(Eigen::Index n) {
  std::vector<std::size_t> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

}  // namespace

RegressionTree fit_tree(const Matrix& X, const Vector& y, std::span<const std::size_t> rows,
                        const EnsembleConfig& cfg, std::mt19937_64& rng) {
  require(!rows.empty(), "fit_tree needs at least one row");
  require(cfg.min_samples_leaf >= 1, "min_samples_leaf must be >= 1");
  require(cfg.max_features >= 1, "max_features must be resolved before fit_tree");
  TreeGrower grower(X, y, cfg, rng);
  return grower.grow({rows.begin(), rows.end()});
}

double Ensemble::predict(Row x) const {
  double sum = 0.0;
  for (const auto& t : trees) sum += t.predict(x);
  if (kind == EnsembleKind::rf) return sum / static_cast<double>(trees.size());
  return gbrt_base + gbrt_learning_rate * sum;
}

Ensemble fit_random_forest(const Matrix& X, const Vector& y, const EnsembleConfig& config) {
  const auto cfg = resolve_config(config, EnsembleKind::rf, static_cast<std::size_t>(X.cols()) - 1);
  check_training(X, y, cfg);
  Ensemble e;
  e.kind = EnsembleKind::rf;
  e.config = cfg;
  e.trees.resize(cfg.n_trees);
  const auto n = static_cast<std::size_t>(X.rows());
  detail::parallel_for(cfg.n_trees, cfg.threads, [&](std::size_t k) {
    std::mt19937_64 rng(cfg.seed + k);
    std::vector<std::size_t> rows;
    if (cfg.bootstrap) {
      std::uniform_int_distribution<std::size_t> draw(0, n - 1);
      rows.resize(n);
      for (auto& r : rows) r = draw(rng);
    } else {
      rows = all_rows(X.rows());
    }
    auto tree = fit_tree(X, y, rows, cfg, rng);
    tree.count_members(X);
    e.trees[k] = std::move(tree);
  });
  return e;
}

Ensemble fit_gbrt(const Matrix& X, const Vector& y, const EnsembleConfig& config) {
  const auto cfg = resolve_config(config, EnsembleKind::gbrt, static_cast<std::size_t>(X.cols()) - 1);
  check_training(X, y, cfg);
  Ensemble e;
  e.kind = EnsembleKind::gbrt;
  e.config = cfg;
  e.gbrt_base = y.mean();
  e.gbrt_learning_rate = cfg.learning_rate;

  const auto rows = all_rows(X.rows());
  Vector fitted = Vector::Constant(y.size(), e.gbrt_base);
  for (std::size_t k = 0; k < cfg.n_trees; ++k) {
    const Vector residual = y - fitted;
    std::mt19937_64 rng(cfg.seed + k);
    auto tree = fit_tree(X, residual, rows, cfg, rng);
    tree.count_members(X);
    for (Eigen::Index i = 0; i < X.rows(); ++i) fitted(i) += cfg.learning_rate * tree.predict(row_of(X, i));
    e.trees.push_back(std::move(tree));
  }
  return e;
}

Ensemble fit_ensemble(EnsembleKind kind, const Matrix& X, const Vector& y, const EnsembleConfig& cfg) {
  return kind == EnsembleKind::rf ? fit_random_forest(X, y, cfg) : fit_gbrt(X, y, cfg);
}

Ensemble fit_random_forest(const Dataset& ds, const SplitAssignment& split, const EnsembleConfig& cfg) {
  const auto train = take_rows(ds, split.train);
  return fit_random_forest(train.X, train.y, cfg);
}

Ensemble fit_gbrt(const Dataset& ds, const SplitAssignment& split, const EnsembleConfig& cfg) {
  const auto train = take_rows(ds, split.train);
  return fit_gbrt(train.X, train.y, cfg);
}

Ensemble with_full_training_leaf_means(const Ensemble& e, const Matrix& X, const Vector& y) {
  Ensemble out = e;
  for (auto& tree : out.trees) {
    std::vector<double> sums(tree.leaf_count(), 0.0);
    std::vector<std::size_t> counts(tree.leaf_count(), 0);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const auto leaf = static_cast<std::size_t>(tree.leaf_index(row_of(X, i)));
      sums[leaf] += y(i);
      ++counts[leaf];
    }
    for (std::size_t l = 0; l < sums.size(); ++l)
      if (counts[l] > 0) tree.leaf_values[l] = sums[l] / static_cast<double>(counts[l]);
    tree.leaf_counts = counts;
  }
  return out;
}

}  // namespace maple
