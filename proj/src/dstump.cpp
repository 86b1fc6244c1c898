#include "maple/dstump.hpp"

#include <algorithm>
#include <numeric>

namespace maple {

double FeatureScores::total() const {
  double s = 0.0;
  for (double v : scores) s += v;
  return s;
}

FeatureScores feature_scores(const Ensemble& ensemble, std::size_t p) {
  FeatureScores out;
  out.scores.assign(p + 1, 0.0);
  out.provenance.reserve(ensemble.size());
  for (const auto& tree : ensemble.trees) {
    out.provenance.push_back({tree.root_split_feature, tree.root_impurity_reduction});
    if (tree.root_split_feature < 1) continue;
    require(static_cast<std::size_t>(tree.root_split_feature) <= p, "root split feature out of range");
    out.scores[static_cast<std::size_t>(tree.root_split_feature)] += tree.root_impurity_reduction;
  }
  return out;
}

std::vector<int> rank_features(const FeatureScores& s) {
  std::vector<int> order(s.features());
  std::iota(order.begin(), order.end(), 1);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return s.score(a) > s.score(b); });
  return order;
}

std::vector<int> select_top_d(const FeatureScores& s, std::size_t d) {
  require(d >= 1 && d <= s.features(), "d must lie in [1, p]");
  auto order = rank_features(s);
  order.resize(d);
  return order;
}

}  // namespace maple
