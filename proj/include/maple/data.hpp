#pragma once

#include "maple/common.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace maple {

/// Affine map applied to the non-constant columns and the response.
/// Index 0 of `mean`/`scale` belongs to the constant column and is the identity.
struct Standardization {
  std::vector<double> mean;
  std::vector<double> scale;
  double y_mean = 0.0;
  double y_scale = 1.0;

  void apply_row(std::span<double> x) const;
  double apply_y(double y) const { return (y - y_mean) / y_scale; }
  double invert_y(double y) const { return y * y_scale + y_mean; }
};

/// Design matrix with a leading all-ones column, plus the response.
struct Dataset {
  Matrix X;
  Vector y;
  std::vector<std::string> feature_names;  // length p, excludes the constant column
  bool standardized = false;
  std::optional<Standardization> scaling;

  std::size_t rows() const { return static_cast<std::size_t>(X.rows()); }
  std::size_t features() const { return static_cast<std::size_t>(X.cols()) - 1; }
};

struct SplitAssignment {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;
};

enum class SyntheticKind { linear, sil, step };

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::linear;
  std::size_t n = 200;
  std::size_t p = 5;
  double noise_sigma = 0.1;
  std::uint64_t seed = 0;
};

SyntheticKind parse_synthetic_kind(const std::string& name);
std::string to_string(SyntheticKind kind);

/// Response curve applied to the active feature of the synthetic datasets.
double synthetic_response(SyntheticKind kind, double t);

/// Reads a numeric CSV with a header row. The target column becomes `y`,
/// the remaining columns keep their order behind a prepended constant column.
Dataset load_csv(const std::filesystem::path& path, const std::string& target);

/// Writes x1..xp,y (or the dataset's own feature names) with full precision.
void write_csv(const Dataset& ds, const std::filesystem::path& path, const std::string& target = "y");

SplitAssignment split(std::size_t n, std::uint64_t seed);

/// Standardizes features and response with statistics from the training rows only.
Dataset standardize(const Dataset& ds, const SplitAssignment& split);

/// Maps a standardized dataset back to original units.
Dataset destandardize(const Dataset& ds);

Dataset gen_synthetic(const SyntheticSpec& spec);

/// Row subset, preserving every other field.
Dataset take_rows(const Dataset& ds, std::span<const std::size_t> rows);

}  // namespace maple
