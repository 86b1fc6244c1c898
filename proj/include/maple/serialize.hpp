#pragma once

#include "maple/diagnostics.hpp"
#include "maple/eval.hpp"
#include "maple/model.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>

namespace maple {

using Json = nlohmann::ordered_json;

Json to_json(const EnsembleConfig& cfg);
EnsembleConfig ensemble_config_from_json(const Json& j);

/// {kind, config, base, learning_rate, trees:[{nodes, root_split_feature, root_impurity_reduction}]}
Json to_json(const Ensemble& e);
Ensemble ensemble_from_json(const Json& j);

/// {query_id?, entries:[{index, weight}]} with entries by descending weight.
Json to_json(const LocalWeights& w, std::optional<std::size_t> query_id = std::nullopt);

/// {feature_name: score} by descending score.
Json scores_to_json(const FeatureScores& s, const std::vector<std::string>& names);

/// {query, prediction, intercept, coefficients:{name: value}, not_selected:[names], top_weights:[{index, weight}]}
Json explanation_to_json(const Explanation& e, const std::vector<std::string>& names, std::size_t top_k);

/// A fitted model plus everything the command-line tools need to reuse it.
struct ModelBundle {
  MapleModel model;
  std::optional<Standardization> scaling;
  /// Held-out rows in model units (constant column included).
  Matrix test_X;
  Vector test_y;
  std::optional<SplitAssignment> split;
};

Json to_json(const ModelBundle& b);
ModelBundle bundle_from_json(const Json& j);
void save_bundle(const ModelBundle& b, const std::filesystem::path& path);
ModelBundle load_bundle(const std::filesystem::path& path);

Json to_json(const BoxStats& s);
Json to_json(const GridDiagnostic& gd, const std::vector<std::string>& names);
/// grid_value,repeat,min,q1,median,q3,max, one row per (cell, repeat).
std::string grid_to_csv(const GridDiagnostic& gd);

Json to_json(const TrialReport& r);
/// One dataset row, one column per method, mirroring a results table.
std::string to_markdown(const TrialReport& r);

struct ProtocolFile {
  Protocol protocol;
  std::size_t trials = 1;
  std::uint64_t seed = 0;
};

/// {name, dataset, target, drop?, methods, metric, sigma, draws, trials, seed,
///  blackbox?, explained?, ridge?, ensemble?}; relative dataset paths resolve
///  against `base_dir`.
ProtocolFile protocol_from_json(const Json& j, const std::filesystem::path& base_dir);

Json read_json_file(const std::filesystem::path& path);
std::string dump(const Json& j);

}  // namespace maple
