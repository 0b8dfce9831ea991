// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace stlr {

using Index = Eigen::Index;

/**
 * Candidate feature vectors for one query, stored feature-dim x candidates
 * (column i is candidate i). Immutable once constructed.
 *
 * Invariants: m >= 1, N >= 2, every value finite, shot ids unique, and when
 * `centered()` every row sums to zero within 1e-9 * N.
 */
class FeatureMatrix {
 public:
  /// Uncentered matrix.
  FeatureMatrix(Eigen::MatrixXd values, std::vector<std::string> shot_ids);

  /// Fully specified matrix; `mean` is the row mean that was subtracted.
  FeatureMatrix(Eigen::MatrixXd values, std::vector<std::string> shot_ids,
                Eigen::VectorXd mean, bool centered);

  const Eigen::MatrixXd& values() const noexcept { return values_; }
  const std::vector<std::string>& shot_ids() const noexcept { return ids_; }
  const Eigen::VectorXd& mean() const noexcept { return mean_; }
  bool centered() const noexcept { return centered_; }

  Index dims() const noexcept { return values_.rows(); }
  Index size() const noexcept { return values_.cols(); }

  std::optional<Index> index_of(const std::string& shot_id) const;

 private:
  Eigen::MatrixXd values_;
  std::vector<std::string> ids_;
  Eigen::VectorXd mean_;
  bool centered_ = false;
  std::unordered_map<std::string, Index> lookup_;
};

enum class FeatureFormat { csv, raw_f64 };

FeatureFormat parse_feature_format(const std::string& name);
std::string to_string(FeatureFormat format);

/**
 * Loads a candidate-per-row feature file.
 *
 * csv: one candidate per line, comma separated. The first line is a header
 * when any field after the first is non-numeric. A leading id column is
 * recognized when the header names it `id`/`shot_id`, or (headerless) when
 * the first field of the first row is non-numeric. Without ids, candidates
 * are named by their zero-based row index.
 *
 * raw-f64: little-endian doubles, candidate-major (m values per candidate),
 * with a sidecar `<path>.json` holding {"m":..., "n":..., "ids":[...]}.
 */
FeatureMatrix load_features(const std::filesystem::path& path,
                            FeatureFormat format);

/// csv output uses shortest round-trip formatting, so reloading is exact.
void save_features(const FeatureMatrix& x, const std::filesystem::path& path,
                   FeatureFormat format);

struct CenterResult {
  FeatureMatrix matrix;
  bool already_centered = false;  // input was returned unchanged
};

/// Subtracts each feature row's mean. Centering a centered matrix is a no-op
/// that reports `already_centered`.
CenterResult center_checked(const FeatureMatrix& x);
FeatureMatrix center(const FeatureMatrix& x);

/// Centers and divides every row by its standard deviation (population
/// normalization); constant rows stay zero.
FeatureMatrix standardize(const FeatureMatrix& x);

/// Ground-truth relevance of one query. Binary only.
struct QueryTruth {
  std::string query_id;
  std::map<std::string, int> relevance;

  bool is_relevant(const std::string& shot_id) const;
  bool has(const std::string& shot_id) const;
  Index relevant_count() const;
};

/// Labeled candidates, as indices into a query's candidate list.
struct LabelSet {
  std::vector<Index> relevant_idx;
  std::vector<Index> irrelevant_idx;

  Index n_plus() const noexcept { return static_cast<Index>(relevant_idx.size()); }
  Index n_minus() const noexcept { return static_cast<Index>(irrelevant_idx.size()); }
  Index n_labeled() const noexcept { return n_plus() + n_minus(); }

  /// Throws ParameterError unless indices are < n, unique, disjoint, and both
  /// sets are nonempty.
  void validate(Index n) const;
};

struct RankedEntry {
  std::string shot_id;
  double score = 0.0;
};

/// Ordered candidates, best first. Scores are nonincreasing and ids unique.
struct RankedList {
  std::string query_id;
  std::vector<RankedEntry> entries;

  void validate() const;
  Index size() const noexcept { return static_cast<Index>(entries.size()); }
};

/// TREC qrels (`query_id 0 shot_id rel`); any rel > 0 counts as relevant.
std::map<std::string, QueryTruth> load_qrels(const std::filesystem::path& path);
void save_qrels(const std::vector<QueryTruth>& truths,
                const std::filesystem::path& path);

/// TREC run format (`query_id Q0 shot_id rank score tag`), ordered by rank.
std::map<std::string, RankedList> load_run(const std::filesystem::path& path);
void write_run(std::ostream& out, const RankedList& list, const std::string& tag);
void save_run(const std::vector<RankedList>& lists, const std::string& tag,
              const std::filesystem::path& path);

struct SynthParams {
  std::uint64_t seed = 1;
  Index n = 500;
  Index m = 60;
  Index n_rel = 50;
  double separation = 4.0;
  Index noise_dims = 0;
  Index irrelevant_centers = 5;
  double text_signal = 1.0;  // mean text-score shift of relevant candidates
  std::string query_id = "synth";
};

struct SynthQuery {
  FeatureMatrix features;
  QueryTruth truth;
  RankedList text_ranking;
};

/**
 * Seeded synthetic query.
 *
 * Generator (all draws from one std::mt19937_64 seeded with `seed`, in this
 * order): uniforms are (u64 >> 11) * 2^-53; normals are Box-Muller pairs.
 *  1. relevant flags: the first n_rel of N slots, then a Fisher-Yates shuffle
 *     with j = floor(u * (i + 1)) for i = N-1 .. 1;
 *  2. the relevant center, then `irrelevant_centers` centers, each
 *     `separation` times a uniformly random unit vector over the first
 *     m - noise_dims (signal) feature rows;
 *  3. per candidate in column order: center + N(0, I) over signal rows, then
 *     N(0, 1) over the trailing noise rows;
 *  4. text score per candidate: text_signal * rel + N(0, 1); the ranking is
 *     the stable descending sort, and if no relevant candidate lands in the
 *     top 20 the best-scored relevant one is swapped into rank 20.
 * Irrelevant candidates pick their center round-robin by irrelevant order.
 */
SynthQuery synth_query(const SynthParams& params);

/// FNV-1a over a byte string; used for input digests in run manifests.
std::uint64_t fnv1a64(std::string_view bytes);
std::string file_digest(const std::filesystem::path& path);

}  // namespace stlr
