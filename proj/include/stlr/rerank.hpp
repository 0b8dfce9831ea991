// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "stlr/dataset.hpp"

/// Simulated relevance feedback, min-distance reranking and AP/MAP scoring.
namespace stlr::rerank {

/// Labels the first `top_k` entries of the text ranking from ground truth.
/// Returned indices are positions in the ranking. Throws DataError when none
/// of them is relevant.
LabelSet simulate_feedback(const RankedList& text_ranking, const QueryTruth& truth, Index top_k = 20);

/// Same, but indices refer to `candidate_ids` (the feature-matrix columns).
/// Ranked ids absent from `candidate_ids` raise DataError.
LabelSet simulate_feedback(const RankedList& text_ranking, const QueryTruth& truth, Index top_k,
                           const std::vector<std::string>& candidate_ids);

enum class Metric { mahalanobis, euclidean };
Metric parse_metric(const std::string& name);
std::string to_string(Metric metric);

struct DistanceOptions {
  Metric metric = Metric::mahalanobis;
  /// Ridge added to the covariance; negative selects 1e-6 * trace / d.
  double ridge = -1.0;
};

/// d_i = min over j in `relevant_idx` of the distance between columns i and j
/// of `y` (d x N). Mahalanobis uses the 1/N covariance of all N columns plus
/// ridge * I. Throws ConfigurationError if that covariance is singular.
Eigen::VectorXd relevance_distances(const Eigen::MatrixXd& y, const std::vector<Index>& relevant_idx,
                                    const DistanceOptions& options = {});

/// Ascending distance, score = -distance, ties keep input order.
RankedList rank_by_distance(const Eigen::VectorXd& distances, const std::vector<std::string>& shot_ids,
                            const std::string& query_id = {});

struct ApResult {
  double ap = 0.0;
  Index relevant_in_scope = 0;  // R
  Index missing_truth = 0;      // ranked ids without a truth entry (counted irrelevant)
  bool no_relevant = false;     // R = 0, AP reported as 0
};

/// Non-interpolated AP over the first `cutoff` entries (0 = whole list). R is
/// the number of relevant entries in the whole ranked list.
ApResult average_precision_detail(const RankedList& ranked, const QueryTruth& truth, Index cutoff = 0);
double average_precision(const RankedList& ranked, const QueryTruth& truth, Index cutoff = 0);
/// AP of a 0/1 relevance sequence in rank order.
double average_precision(const std::vector<int>& relevance_in_rank_order);

struct EvalReport {
  std::map<std::string, double> per_query_ap;
  double map = 0.0;
  double baseline_map = 0.0;
  std::optional<double> gain;  // percent; absent when baseline_map = 0
  std::map<std::string, std::string> skipped;  // query id -> reason
};

/// Relative gain in percent, (map - baseline) / baseline * 100.
std::optional<double> relative_gain(double map, double baseline_map);

/// Arithmetic mean plus gain. Throws ParameterError on empty input.
EvalReport mean_ap(const std::map<std::string, double>& per_query_ap, double baseline_map);

/// Plain-text table: one row per query, then MAP and Gain rows.
std::string format_table(const EvalReport& report, const std::string& method);

}  // namespace stlr::rerank
