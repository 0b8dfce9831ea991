// SPDX-License-Identifier: Apache-2.0
#include "stlr/rerank.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <functional>
#include <limits>

#include <Eigen/Cholesky>

#include "stlr/error.hpp"

namespace stlr::rerank {
namespace {

LabelSet label_top(const RankedList& ranking, const QueryTruth& truth, Index top_k,
                   const std::function<Index(Index)>& index_of) {
  if (top_k < 1) throw ParameterError("simulate_feedback: top_k must be >= 1");
  if (top_k > ranking.size()) {
    throw ParameterError("simulate_feedback: top_k exceeds the ranking length");
  }
  LabelSet labels;
  for (Index r = 0; r < top_k; ++r) {
    const Index idx = index_of(r);
    if (truth.is_relevant(ranking.entries[static_cast<std::size_t>(r)].shot_id)) {
      labels.relevant_idx.push_back(idx);
    } else {
      labels.irrelevant_idx.push_back(idx);
    }
  }
  if (labels.relevant_idx.empty()) {
    throw DataError("simulate_feedback: no relevant sample in the top " + std::to_string(top_k) +
                    " of query '" + ranking.query_id + "'");
  }
  return labels;
}

}  // namespace

LabelSet simulate_feedback(const RankedList& text_ranking, const QueryTruth& truth, Index top_k) {
  return label_top(text_ranking, truth, top_k, [](Index r) { return r; });
}

LabelSet simulate_feedback(const RankedList& text_ranking, const QueryTruth& truth, Index top_k,
                           const std::vector<std::string>& candidate_ids) {
  std::unordered_map<std::string, Index> lookup;
  lookup.reserve(candidate_ids.size());
  for (std::size_t i = 0; i < candidate_ids.size(); ++i) lookup.emplace(candidate_ids[i], static_cast<Index>(i));
  return label_top(text_ranking, truth, top_k, [&](Index r) {
    const std::string& id = text_ranking.entries[static_cast<std::size_t>(r)].shot_id;
    auto it = lookup.find(id);
    if (it == lookup.end()) throw DataError("simulate_feedback: ranked shot '" + id + "' has no features");
    return it->second;
  });
}

Metric parse_metric(const std::string& name) {
  if (name == "mahalanobis") return Metric::mahalanobis;
  if (name == "euclidean") return Metric::euclidean;
  throw ParameterError("unknown metric '" + name + "'");
}

std::string to_string(Metric metric) {
  return metric == Metric::mahalanobis ? "mahalanobis" : "euclidean";
}

Eigen::VectorXd relevance_distances(const Eigen::MatrixXd& y, const std::vector<Index>& relevant_idx,
                                    const DistanceOptions& options) {
  if (relevant_idx.empty()) throw ParameterError("relevance_distances: empty relevant set");
  const Index n = y.cols();
  const Index d = y.rows();
  for (Index j : relevant_idx) {
    if (j < 0 || j >= n) throw ParameterError("relevance_distances: relevant index out of range");
  }

  Eigen::MatrixXd z;
  if (options.metric == Metric::euclidean) {
    z = y;
  } else {
    const Eigen::VectorXd mean = y.rowwise().mean();
    const Eigen::MatrixXd dev = y.colwise() - mean;
    Eigen::MatrixXd cov = (dev * dev.transpose()) / static_cast<double>(n);
    const double trace = cov.trace();
    double ridge = options.ridge;
    if (ridge < 0.0) {
      if (trace <= 0.0) return Eigen::VectorXd::Zero(n);  // all columns coincide
      ridge = 1e-6 * trace / static_cast<double>(d);
    }
    cov.diagonal().array() += ridge;
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    const double diag_scale = std::sqrt(std::max(cov.diagonal().maxCoeff(), 0.0));
    if (llt.info() != Eigen::Success ||
        llt.matrixL().toDenseMatrix().diagonal().minCoeff() <= 1e-12 * diag_scale) {
      throw ConfigurationError("relevance_distances: singular covariance; use a positive ridge or the euclidean metric");
    }
    z = llt.matrixL().solve(y);
  }

  Eigen::VectorXd dist = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  for (Index j : relevant_idx) {
    const Eigen::VectorXd diff_norms = (z.colwise() - z.col(j)).colwise().norm().transpose();
    dist = dist.cwiseMin(diff_norms);
  }
  for (Index j : relevant_idx) dist(j) = 0.0;
  return dist;
}

RankedList rank_by_distance(const Eigen::VectorXd& distances, const std::vector<std::string>& shot_ids,
                            const std::string& query_id) {
  if (static_cast<std::size_t>(distances.size()) != shot_ids.size()) {
    throw ParameterError("rank_by_distance: length mismatch");
  }
  std::vector<Index> order(shot_ids.size());
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return distances(a) < distances(b); });
  RankedList out;
  out.query_id = query_id;
  out.entries.reserve(order.size());
  for (Index i : order) out.entries.push_back({shot_ids[static_cast<std::size_t>(i)], -distances(i)});
  return out;
}

ApResult average_precision_detail(const RankedList& ranked, const QueryTruth& truth, Index cutoff) {
  if (cutoff < 0) throw ParameterError("average_precision: cutoff must be >= 0");
  ApResult out;
  const Index scope = cutoff == 0 ? ranked.size() : std::min(cutoff, ranked.size());
  Index hits = 0;
  double sum = 0.0;
  for (Index r = 0; r < ranked.size(); ++r) {
    const std::string& id = ranked.entries[static_cast<std::size_t>(r)].shot_id;
    if (!truth.has(id)) ++out.missing_truth;
    if (!truth.is_relevant(id)) continue;
    ++out.relevant_in_scope;
    if (r < scope) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  if (out.relevant_in_scope == 0) {
    out.no_relevant = true;
    return out;
  }
  out.ap = sum / static_cast<double>(out.relevant_in_scope);
  return out;
}

double average_precision(const RankedList& ranked, const QueryTruth& truth, Index cutoff) {
  return average_precision_detail(ranked, truth, cutoff).ap;
}

double average_precision(const std::vector<int>& relevance_in_rank_order) {
  Index hits = 0;
  double sum = 0.0;
  for (std::size_t r = 0; r < relevance_in_rank_order.size(); ++r) {
    if (relevance_in_rank_order[r] > 0) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  return hits == 0 ? 0.0 : sum / static_cast<double>(hits);
}

std::optional<double> relative_gain(double map, double baseline_map) {
  if (baseline_map == 0.0) return std::nullopt;
  return (map - baseline_map) / baseline_map * 100.0;
}

EvalReport mean_ap(const std::map<std::string, double>& per_query_ap, double baseline_map) {
  if (per_query_ap.empty()) throw ParameterError("mean_ap: no queries");
  EvalReport out;
  out.per_query_ap = per_query_ap;
  double sum = 0.0;
  for (const auto& [id, ap] : per_query_ap) sum += ap;
  out.map = sum / static_cast<double>(per_query_ap.size());
  out.baseline_map = baseline_map;
  out.gain = relative_gain(out.map, baseline_map);
  return out;
}

std::string format_table(const EvalReport& report, const std::string& method) {
  std::ostringstream os;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-24s %10s\n", "Query", method.c_str());
  os << buf;
  for (const auto& [id, ap] : report.per_query_ap) {
    std::snprintf(buf, sizeof buf, "%-24s %10.4f\n", id.c_str(), ap);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "%-24s %10.4f\n", "MAP", report.map);
  os << buf;
  if (report.gain) {
    std::snprintf(buf, sizeof buf, "%-24s %9.2f%%\n", "Gain", *report.gain);
  } else {
    std::snprintf(buf, sizeof buf, "%-24s %10s\n", "Gain", "n/a");
  }
  os << buf;
  for (const auto& [id, reason] : report.skipped) os << "skipped " << id << ": " << reason << '\n';
  return os.str();
}

}  // namespace stlr::rerank
