#pragma once

#include "maple/model.hpp"

#include <string>
#include <variant>
#include <vector>

namespace maple {

/// The k heaviest training points of a local training distribution.
struct InfluenceSet {
  std::vector<double> query;
  /// Descending weight, ties by ascending index.
  std::vector<WeightEntry> members;
  std::size_t k = 0;
};

InfluenceSet influential_points(const MapleModel& m, Row x, std::size_t k);
InfluenceSet influential_points(const LocalWeights& w, std::size_t n_train, std::size_t k);

struct BoxStats {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  double mean = 0.0;

  double iqr() const { return q3 - q1; }
};

/// Five-number summary with linearly interpolated quartiles.
BoxStats box_stats(std::vector<double> values);

/// Unweighted summary of feature j over the members of `infl`.
BoxStats feature_boxplot(const InfluenceSet& infl, const Matrix& X_train, int j);

enum class SamplerKind {
  /// Each remaining feature drawn independently from its empirical training marginal.
  empirical_marginals,
  /// Each remaining feature drawn uniformly over its training range.
  uniform_range,
};

std::string to_string(SamplerKind s);

struct GridOptions {
  std::size_t repeats = 10;
  std::size_t k = 20;
  SamplerKind sampler = SamplerKind::empirical_marginals;
  std::uint64_t seed = 0;
};

struct GridCell {
  double grid_value = 0.0;
  /// Members pooled over every repeat.
  BoxStats pooled;
  std::vector<BoxStats> per_repeat;
};

struct GridDiagnostic {
  int feature = 1;
  std::vector<double> grid;
  std::vector<GridCell> per_cell;
  std::size_t repeats = 0;
  std::size_t k = 0;
  SamplerKind sampler = SamplerKind::empirical_marginals;
};

/// n evenly spaced values over [lo, hi].
std::vector<double> even_grid(double lo, double hi, std::size_t n);

/// `reference` supplies the rows the sampler draws the remaining features from.
GridDiagnostic grid_diagnostic(const MapleModel& m, const Matrix& reference, int j, const std::vector<double>& grid,
                               const GridOptions& opt);

struct PatternThresholds {
  /// Fires when the abruptness score exceeds this.
  double abruptness = 0.8;
  /// Fires when an interior cell's |median - grid value| exceeds this multiple of its IQR.
  double skew_iqr_multiple = 1.5;
};

struct PatternVerdict {
  bool pattern_detected = false;
  /// Abruptness: coefficient of variation of the cell-to-cell increments of the
  /// pooled quartiles, averaged over q1, median and q3. Uniform increments (a
  /// distribution sliding along with the grid) score near 0; increments
  /// concentrated in a few jumps score high. 0 when the distribution does not
  /// move by more than its mean IQR across the grid.
  double score = 0.0;
  bool skewed = false;
  /// Largest (1 - iqr_overlap) over adjacent cells, reported for inspection.
  double max_iqr_gap = 0.0;
};

/// Overlap of [a.q1, a.q3] and [b.q1, b.q3] as a fraction of the narrower interval.
double iqr_overlap(const BoxStats& a, const BoxStats& b);

PatternVerdict detect_global_pattern(const GridDiagnostic& gd, const PatternThresholds& t = {});

/// Probability that a random tree places x together with a training point drawn
/// from the exemplar's local training distribution.
double exemplar_fit_score(const MapleModel& m, const LocalWeights& exemplar_weights, Row x);

struct Exemplar {
  std::vector<double> query;
  Explanation explanation;
};

struct ExemplarLibrary {
  std::vector<Exemplar> exemplars;
  double applicability_threshold = 0.1;
  double ambiguity_margin = 0.05;
};

ExemplarLibrary build_library(const MapleModel& m, const std::vector<std::vector<double>>& queries,
                              double threshold = 0.1, double margin = 0.05);

struct NoApplicable {};
struct Chosen {
  std::size_t index = 0;
};
struct Ambiguous {
  std::vector<std::size_t> candidates;
};
using ExemplarChoice = std::variant<Chosen, NoApplicable, Ambiguous>;

/// Decision rule over precomputed scores (library order).
ExemplarChoice choose_by_scores(const std::vector<double>& scores, double threshold, double margin);

ExemplarChoice choose_exemplar(const ExemplarLibrary& lib, const MapleModel& m, Row x,
                               std::vector<double>* scores_out = nullptr);

}  // namespace maple
