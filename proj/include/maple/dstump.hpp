#pragma once

#include "maple/forest.hpp"

#include <vector>

namespace maple {

struct RootSplit {
  int feature = -1;
  double reduction = 0.0;
};

/// Root-split feature scores. `scores` is indexed by design column, so
/// scores[0] (the constant column) is always zero and scores.size() == p + 1.
struct FeatureScores {
  std::vector<double> scores;
  std::vector<RootSplit> provenance;

  std::size_t features() const { return scores.empty() ? 0 : scores.size() - 1; }
  double score(int feature) const { return scores[static_cast<std::size_t>(feature)]; }
  double total() const;
};

FeatureScores feature_scores(const Ensemble& ensemble, std::size_t p);

/// All features 1..p ordered by descending score, ties by ascending index.
std::vector<int> rank_features(const FeatureScores& s);

/// The d highest-scored features in rank order (never contains column 0).
std::vector<int> select_top_d(const FeatureScores& s, std::size_t d);

}  // namespace maple
