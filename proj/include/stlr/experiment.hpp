// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "stlr/dataset.hpp"
#include "stlr/rerank.hpp"
#include "stlr/stl.hpp"

/// Experiment plumbing: declarative specs, per-query evaluation, grid search
/// with query-group cross-validation, run artifacts and path export.
namespace stlr::experiment {

using nlohmann::json;

enum class Method { stl, bda, pca, identity };
Method parse_method(const std::string& name);
std::string to_string(Method method);

/// One query: either files on disk or a synthetic generator spec.
struct QuerySource {
  std::string id;
  std::filesystem::path features;
  FeatureFormat format = FeatureFormat::csv;
  std::filesystem::path qrels;    // TREC qrels, may hold many queries
  std::filesystem::path ranking;  // TREC run with the text ranking
  std::optional<SynthParams> synth;
};

struct Grid {
  std::vector<double> alpha;
  std::vector<double> beta;
  std::vector<double> lambda2;
  std::vector<Index> d;
  std::vector<Index> k;

  bool empty() const noexcept {
    return alpha.empty() && beta.empty() && lambda2.empty() && d.empty() && k.empty();
  }
  /// Cartesian product over the base config; empty lists keep the base value.
  std::vector<stl::StlConfig> expand(const stl::StlConfig& base) const;
};

struct FeatureGroup {
  std::string name;
  Index size = 0;
};
using FeatureLayout = std::vector<FeatureGroup>;

/// CM 225, HSV 64, Corre 144, WT 128 (561 dims).
FeatureLayout standard_visual_layout();

struct ExperimentSpec {
  std::vector<QuerySource> queries;
  Method method = Method::stl;
  stl::StlConfig stl;
  Index pca_d = 0;   // 0: use stl.d
  Index bda_d = 0;   // 0: use stl.d
  double bda_ridge = 1e-6;
  Index top_k = 20;
  Index ap_cutoff = 0;
  rerank::DistanceOptions distance;
  std::uint64_t seed = 0;
  Index workers = 1;
  bool auto_shrink_alpha = false;
  bool standardize = false;
  Index path_column = 0;
  std::optional<FeatureLayout> layout;
  Grid grid;
  Index folds = 3;

  void validate() const;
};

/**
 * Parses a spec. Besides explicit "queries", a "suite" object expands to
 * `count` synthetic queries with ids q00, q01, ... and per-query seed
 * suite.seed * 1000 + q. Relative paths resolve against `base_dir`.
 */
ExperimentSpec spec_from_json(const json& j, const std::filesystem::path& base_dir = {});
ExperimentSpec load_spec(const std::filesystem::path& path);
json to_json(const ExperimentSpec& spec);

/// The synthetic suite used by the end-to-end checks: 20 queries, seed 3,
/// separation 4, m = 60 with 30 noise dims, N = 500. STL runs with alpha 0.05,
/// beta 0.1, d 5, K 30; PCA and BDA share d.
ExperimentSpec reference_suite(Method method);

struct Query {
  std::string id;
  FeatureMatrix features;
  QueryTruth truth;
  RankedList text_ranking;
  std::string digest;  // of the inputs (files or generated values)
};

Query load_query(const QuerySource& source);
std::vector<Query> load_queries(const ExperimentSpec& spec);

struct QueryOutcome {
  std::string id;
  bool ok = false;
  std::string error_kind;
  std::string error;
  bool infeasible = false;  // A was not positive definite
  double ap = 0.0;
  double baseline_ap = 0.0;
  RankedList ranking;
  std::optional<stl::SparseProjection> projection;
};

/// Feedback, subspace learning, projection, distances, ranking and AP for a
/// single query. Failures are captured in the outcome, never thrown.
QueryOutcome evaluate_query(const Query& query, const ExperimentSpec& spec);

struct ExperimentResult {
  rerank::EvalReport report;
  std::vector<QueryOutcome> outcomes;  // in query order
};

/// Baseline MAP is the text rankings' MAP over the queries that were
/// evaluated. Throws DataError when every query was skipped.
ExperimentResult run_experiment(const ExperimentSpec& spec, const std::vector<Query>& queries);
ExperimentResult run_experiment(const ExperimentSpec& spec);

json to_json(const rerank::EvalReport& report);

/// report.json, <method>.run, text.run, paths/*.csv (stl only), manifest.json.
void write_run_artifacts(const ExperimentSpec& spec, const std::vector<Query>& queries,
                         const ExperimentResult& result, const std::filesystem::path& dir);

/// Contiguous groups of sizes differing by at most one, earlier groups larger.
std::vector<std::vector<Index>> contiguous_folds(Index count, Index folds);

struct GridCell {
  Index config = 0;
  Index fold = 0;
  bool feasible = true;
  double held_out_map = 0.0;
  Index evaluated = 0;
  std::string note;
};

struct GridConfigScore {
  stl::StlConfig config;
  bool feasible = true;
  double cv_map = 0.0;  // mean held-out MAP over folds
};

struct GridReport {
  std::vector<GridConfigScore> configs;
  std::vector<GridCell> cells;  // |grid| x folds, config-major
  std::vector<std::vector<Index>> folds;
  Index best = -1;
  /// Per fold: config chosen on the other folds and its MAP on this fold.
  std::vector<Index> nested_choice;
  std::vector<double> nested_test_map;
};

/// Throws ParameterError for an empty grid or fewer queries than folds, and
/// DataError when no config is feasible.
GridReport grid_search(const ExperimentSpec& spec, const std::vector<Query>& queries);
json to_json(const GridReport& report);

/**
 * Writes one row per breakpoint of column `column`'s coefficient path:
 * one_norm, then (with a layout) a `groups_active` column listing the groups
 * holding nonzero coefficients, then one column per feature named f<k> or
 * <group>_<k>.
 */
void export_coeff_path(const stl::SparseProjection& projection, Index column, std::ostream& out,
                       const std::optional<FeatureLayout>& layout = std::nullopt);
void export_coeff_path(const stl::SparseProjection& projection, Index column,
                       const std::filesystem::path& out,
                       const std::optional<FeatureLayout>& layout = std::nullopt);

}  // namespace stlr::experiment
