// SPDX-License-Identifier: Apache-2.0
#include "stlr/dataset.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "stlr/error.hpp"

namespace stlr {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      fields.push_back(trim(line.substr(start)));
      break;
    }
    fields.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return fields;
}

std::optional<double> parse_double(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::vector<std::string> index_ids(Index n) {
  std::vector<std::string> ids(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) ids[static_cast<std::size_t>(i)] = std::to_string(i);
  return ids;
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  auto p = path;
  p += ".json";
  return p;
}

std::ifstream open_input(const std::filesystem::path& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path, bool binary = false) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

FeatureMatrix load_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<std::vector<double>> rows;
  std::vector<std::string> ids;
  bool first = true;
  bool has_ids = false;
  std::size_t width = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto view = trim(line);
    if (view.empty()) continue;
    auto fields = split_csv(view);
    if (first) {
      first = false;
      bool header = false;
      for (std::size_t k = 1; k < fields.size(); ++k) {
        if (!parse_double(fields[k])) header = true;
      }
      if (fields.size() == 1 && !parse_double(fields[0])) header = true;
      if (header) {
        has_ids = fields[0] == "id" || fields[0] == "shot_id";
        continue;
      }
      has_ids = !parse_double(fields[0]).has_value();
    }
    std::size_t offset = has_ids ? 1 : 0;
    if (fields.size() <= offset) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": no feature values");
    }
    std::size_t n_values = fields.size() - offset;
    if (width == 0) {
      width = n_values;
    } else if (n_values != width) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": row has " +
                        std::to_string(n_values) + " values, expected " +
                        std::to_string(width));
    }
    std::vector<double> row(n_values);
    for (std::size_t k = 0; k < n_values; ++k) {
      auto v = parse_double(fields[k + offset]);
      if (!v) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) +
                          ": unparsable value '" + std::string(fields[k + offset]) + "'");
      }
      if (!std::isfinite(*v)) {
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": non-finite value");
      }
      row[k] = *v;
    }
    if (has_ids) ids.emplace_back(fields[0]);
    rows.push_back(std::move(row));
  }
  const auto n = static_cast<Index>(rows.size());
  if (n < 2) throw DataError(path.string() + ": need at least 2 candidates, found " + std::to_string(n));
  Eigen::MatrixXd values(static_cast<Index>(width), n);
  for (Index i = 0; i < n; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    for (Index k = 0; k < values.rows(); ++k) values(k, i) = row[static_cast<std::size_t>(k)];
  }
  return FeatureMatrix(std::move(values), has_ids ? std::move(ids) : index_ids(n));
}

FeatureMatrix load_raw(const std::filesystem::path& path) {
  auto meta_in = open_input(sidecar_path(path));
  nlohmann::json meta;
  try {
    meta_in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(sidecar_path(path).string() + ": " + e.what());
  }
  if (!meta.contains("m") || !meta.contains("n")) {
    throw FormatError(sidecar_path(path).string() + ": missing m or n");
  }
  const auto m = meta["m"].get<Index>();
  const auto n = meta["n"].get<Index>();
  if (m < 1) throw FormatError("raw-f64 sidecar: m must be >= 1");
  if (n < 2) throw DataError("raw-f64 sidecar: need at least 2 candidates");
  std::vector<std::string> ids;
  if (meta.contains("ids")) {
    ids = meta["ids"].get<std::vector<std::string>>();
    if (static_cast<Index>(ids.size()) != n) throw FormatError("raw-f64 sidecar: ids length != n");
  } else {
    ids = index_ids(n);
  }
  const auto expected = static_cast<std::uintmax_t>(m * n) * sizeof(double);
  if (std::filesystem::file_size(path) != expected) {
    throw FormatError(path.string() + ": size " + std::to_string(std::filesystem::file_size(path)) +
                      " does not match m*n*8 = " + std::to_string(expected));
  }
  Eigen::MatrixXd values(m, n);
  auto in = open_input(path, true);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(expected));
  if constexpr (std::endian::native == std::endian::big) {
    auto* bytes = reinterpret_cast<unsigned char*>(values.data());
    for (Index k = 0; k < m * n; ++k) std::reverse(bytes + 8 * k, bytes + 8 * k + 8);
  }
  if (!values.allFinite()) throw DataError(path.string() + ": non-finite value");
  return FeatureMatrix(std::move(values), std::move(ids));
}

void save_csv(const FeatureMatrix& x, const std::filesystem::path& path) {
  auto out = open_output(path);
  out << "id";
  for (Index k = 0; k < x.dims(); ++k) out << ",f" << k;
  out << '\n';
  for (Index i = 0; i < x.size(); ++i) {
    out << x.shot_ids()[static_cast<std::size_t>(i)];
    for (Index k = 0; k < x.dims(); ++k) out << ',' << format_double(x.values()(k, i));
    out << '\n';
  }
}

void save_raw(const FeatureMatrix& x, const std::filesystem::path& path) {
  {
    auto out = open_output(path, true);
    Eigen::MatrixXd copy = x.values();
    if constexpr (std::endian::native == std::endian::big) {
      auto* bytes = reinterpret_cast<unsigned char*>(copy.data());
      for (Index k = 0; k < copy.size(); ++k) std::reverse(bytes + 8 * k, bytes + 8 * k + 8);
    }
    out.write(reinterpret_cast<const char*>(copy.data()),
              static_cast<std::streamsize>(copy.size() * sizeof(double)));
  }
  nlohmann::json meta{{"m", x.dims()}, {"n", x.size()}, {"ids", x.shot_ids()}};
  auto out = open_output(sidecar_path(path));
  out << meta.dump() << '\n';
}

// Splits a whitespace-separated line into at most `max_fields` tokens.
std::vector<std::string> tokens(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

/// Deterministic normal draws on top of mt19937_64. std::normal_distribution
/// is implementation-defined, so the generator algorithm is pinned here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

Eigen::VectorXd random_center(Rng& rng, Index signal_dims, double separation) {
  Eigen::VectorXd v(signal_dims);
  for (Index k = 0; k < signal_dims; ++k) v(k) = rng.normal();
  const double norm = v.norm();
  if (norm > 0.0) v /= norm;
  return separation * v;
}

}  // namespace

FeatureMatrix::FeatureMatrix(Eigen::MatrixXd values, std::vector<std::string> shot_ids)
    : FeatureMatrix(std::move(values), std::move(shot_ids), Eigen::VectorXd(), false) {}

FeatureMatrix::FeatureMatrix(Eigen::MatrixXd values, std::vector<std::string> shot_ids,
                             Eigen::VectorXd mean, bool centered)
    : values_(std::move(values)),
      ids_(std::move(shot_ids)),
      mean_(std::move(mean)),
      centered_(centered) {
  if (values_.rows() < 1) throw DataError("feature matrix needs at least one feature row");
  if (values_.cols() < 2) {
    throw DataError("feature matrix needs at least 2 candidates, got " +
                    std::to_string(values_.cols()));
  }
  if (static_cast<Index>(ids_.size()) != values_.cols()) {
    throw DataError("shot id count " + std::to_string(ids_.size()) +
                    " does not match candidate count " + std::to_string(values_.cols()));
  }
  if (!values_.allFinite()) throw DataError("feature matrix contains non-finite values");
  if (mean_.size() == 0) mean_ = Eigen::VectorXd::Zero(values_.rows());
  if (mean_.size() != values_.rows()) throw DataError("mean vector length must equal m");
  lookup_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!lookup_.emplace(ids_[i], static_cast<Index>(i)).second) {
      throw DataError("duplicate shot id '" + ids_[i] + "'");
    }
  }
  if (centered_) {
    const double tol = 1e-9 * static_cast<double>(values_.cols()) *
                       std::max(1.0, values_.cwiseAbs().maxCoeff());
    const Eigen::VectorXd sums = values_.rowwise().sum();
    if (sums.cwiseAbs().maxCoeff() > tol) throw DataError("matrix flagged centered but rows do not sum to zero");
  }
}

std::optional<Index> FeatureMatrix::index_of(const std::string& shot_id) const {
  auto it = lookup_.find(shot_id);
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

FeatureFormat parse_feature_format(const std::string& name) {
  if (name == "csv") return FeatureFormat::csv;
  if (name == "raw-f64" || name == "raw_f64" || name == "raw") return FeatureFormat::raw_f64;
  throw ParameterError("unknown feature format '" + name + "' (expected csv or raw-f64)");
}

std::string to_string(FeatureFormat format) {
  return format == FeatureFormat::csv ? "csv" : "raw-f64";
}

FeatureMatrix load_features(const std::filesystem::path& path, FeatureFormat format) {
  if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
  return format == FeatureFormat::csv ? load_csv(path) : load_raw(path);
}

void save_features(const FeatureMatrix& x, const std::filesystem::path& path,
                   FeatureFormat format) {
  if (format == FeatureFormat::csv) {
    save_csv(x, path);
  } else {
    save_raw(x, path);
  }
}

CenterResult center_checked(const FeatureMatrix& x) {
  if (x.centered()) return {x, true};
  const Eigen::VectorXd mean = x.values().rowwise().mean();
  Eigen::MatrixXd values = x.values().colwise() - mean;
  return {FeatureMatrix(std::move(values), x.shot_ids(), mean, true), false};
}

FeatureMatrix center(const FeatureMatrix& x) { return center_checked(x).matrix; }

FeatureMatrix standardize(const FeatureMatrix& x) {
  FeatureMatrix c = center(x);
  Eigen::MatrixXd values = c.values();
  const double n = static_cast<double>(values.cols());
  for (Index k = 0; k < values.rows(); ++k) {
    const double sd = std::sqrt(values.row(k).squaredNorm() / n);
    if (sd > 0.0) values.row(k) /= sd;
  }
  return FeatureMatrix(std::move(values), c.shot_ids(), c.mean(), true);
}

bool QueryTruth::is_relevant(const std::string& shot_id) const {
  auto it = relevance.find(shot_id);
  return it != relevance.end() && it->second > 0;
}

bool QueryTruth::has(const std::string& shot_id) const { return relevance.count(shot_id) > 0; }

Index QueryTruth::relevant_count() const {
  Index n = 0;
  for (const auto& [id, rel] : relevance) n += rel > 0 ? 1 : 0;
  return n;
}

void LabelSet::validate(Index n) const {
  if (relevant_idx.empty()) throw ParameterError("label set has no relevant samples (N+ = 0)");
  if (irrelevant_idx.empty()) throw ParameterError("label set has no irrelevant samples (N- = 0)");
  std::set<Index> seen;
  for (const auto* list : {&relevant_idx, &irrelevant_idx}) {
    for (Index i : *list) {
      if (i < 0 || i >= n) {
        throw ParameterError("label index " + std::to_string(i) + " out of range for N = " +
                             std::to_string(n));
      }
      if (!seen.insert(i).second) {
        throw ParameterError("label index " + std::to_string(i) + " appears more than once");
      }
    }
  }
}

void RankedList::validate() const {
  std::set<std::string> seen;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!seen.insert(entries[i].shot_id).second) {
      throw DataError("ranked list '" + query_id + "' repeats shot '" + entries[i].shot_id + "'");
    }
    if (i > 0 && entries[i].score > entries[i - 1].score) {
      throw DataError("ranked list '" + query_id + "' scores increase at rank " +
                      std::to_string(i + 1));
    }
  }
}

std::map<std::string, QueryTruth> load_qrels(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::map<std::string, QueryTruth> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto tok = tokens(line);
    if (tok.empty()) continue;
    if (tok.size() != 4) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": qrels lines need 4 fields");
    }
    auto rel = parse_double(tok[3]);
    if (!rel) throw FormatError(path.string() + ":" + std::to_string(line_no) + ": bad relevance");
    auto& truth = out[tok[0]];
    truth.query_id = tok[0];
    truth.relevance[tok[2]] = *rel > 0 ? 1 : 0;
  }
  return out;
}

void save_qrels(const std::vector<QueryTruth>& truths, const std::filesystem::path& path) {
  auto out = open_output(path);
  for (const auto& t : truths) {
    for (const auto& [id, rel] : t.relevance) out << t.query_id << " 0 " << id << ' ' << rel << '\n';
  }
}

std::map<std::string, RankedList> load_run(const std::filesystem::path& path) {
  auto in = open_input(path);
  struct Row {
    long rank;
    RankedEntry entry;
  };
  std::map<std::string, std::vector<Row>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto tok = tokens(line);
    if (tok.empty()) continue;
    if (tok.size() != 6) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": run lines need 6 fields");
    }
    auto rank = parse_double(tok[3]);
    auto score = parse_double(tok[4]);
    if (!rank || !score || !std::isfinite(*score)) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": bad rank or score");
    }
    rows[tok[0]].push_back({static_cast<long>(*rank), {tok[2], *score}});
  }
  std::map<std::string, RankedList> out;
  for (auto& [qid, list] : rows) {
    std::stable_sort(list.begin(), list.end(),
                     [](const Row& a, const Row& b) { return a.rank < b.rank; });
    RankedList ranked{qid, {}};
    ranked.entries.reserve(list.size());
    for (auto& r : list) ranked.entries.push_back(std::move(r.entry));
    try {
      ranked.validate();
    } catch (const DataError& e) {
      throw FormatError(path.string() + ": " + e.what());
    }
    out.emplace(qid, std::move(ranked));
  }
  return out;
}

void write_run(std::ostream& out, const RankedList& list, const std::string& tag) {
  for (std::size_t i = 0; i < list.entries.size(); ++i) {
    out << list.query_id << " Q0 " << list.entries[i].shot_id << ' ' << (i + 1) << ' '
        << format_double(list.entries[i].score) << ' ' << tag << '\n';
  }
}

void save_run(const std::vector<RankedList>& lists, const std::string& tag,
              const std::filesystem::path& path) {
  auto out = open_output(path);
  for (const auto& list : lists) write_run(out, list, tag);
}

SynthQuery synth_query(const SynthParams& p) {
  if (p.n_rel <= 0) throw ParameterError("synth_query: n_rel must be >= 1");
  if (p.n < 2) throw ParameterError("synth_query: N must be >= 2");
  if (p.n_rel >= p.n) throw ParameterError("synth_query: n_rel must be < N");
  if (p.m < 1) throw ParameterError("synth_query: m must be >= 1");
  if (p.noise_dims < 0 || p.noise_dims >= p.m) throw ParameterError("synth_query: noise_dims must be < m");
  if (!(p.separation >= 0.0) || !std::isfinite(p.separation)) {
    throw ParameterError("synth_query: separation must be finite and >= 0");
  }
  if (p.irrelevant_centers < 1) throw ParameterError("synth_query: need at least one irrelevant center");

  Rng rng(p.seed);
  const Index n = p.n;
  const Index signal = p.m - p.noise_dims;

  std::vector<int> rel(static_cast<std::size_t>(n), 0);
  std::fill(rel.begin(), rel.begin() + p.n_rel, 1);
  for (Index i = n - 1; i >= 1; --i) {
    auto j = static_cast<Index>(rng.uniform() * static_cast<double>(i + 1));
    std::swap(rel[static_cast<std::size_t>(i)], rel[static_cast<std::size_t>(j)]);
  }

  const Eigen::VectorXd relevant_center = random_center(rng, signal, p.separation);
  std::vector<Eigen::VectorXd> irrelevant(static_cast<std::size_t>(p.irrelevant_centers));
  for (auto& c : irrelevant) c = random_center(rng, signal, p.separation);

  Eigen::MatrixXd values(p.m, n);
  std::size_t irrelevant_seen = 0;
  for (Index i = 0; i < n; ++i) {
    const Eigen::VectorXd& c =
        rel[static_cast<std::size_t>(i)]
            ? relevant_center
            : irrelevant[irrelevant_seen++ % irrelevant.size()];
    for (Index k = 0; k < signal; ++k) values(k, i) = c(k) + rng.normal();
    for (Index k = signal; k < p.m; ++k) values(k, i) = rng.normal();
  }

  std::vector<std::string> ids(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "_s%05ld", static_cast<long>(i));
    ids[static_cast<std::size_t>(i)] = p.query_id + buf;
  }

  std::vector<double> text(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    text[static_cast<std::size_t>(i)] = p.text_signal * rel[static_cast<std::size_t>(i)] + rng.normal();
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return text[static_cast<std::size_t>(a)] > text[static_cast<std::size_t>(b)];
  });
  const Index top = std::min<Index>(20, n);
  const bool any_top = std::any_of(order.begin(), order.begin() + top,
                                   [&](Index i) { return rel[static_cast<std::size_t>(i)] == 1; });
  if (!any_top) {
    auto best = std::find_if(order.begin() + top, order.end(),
                             [&](Index i) { return rel[static_cast<std::size_t>(i)] == 1; });
    // keep scores nonincreasing after the swap
    std::swap(text[static_cast<std::size_t>(*best)],
              text[static_cast<std::size_t>(order[static_cast<std::size_t>(top - 1)])]);
    std::iter_swap(best, order.begin() + (top - 1));
  }

  QueryTruth truth{p.query_id, {}};
  RankedList ranking{p.query_id, {}};
  ranking.entries.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) truth.relevance[ids[static_cast<std::size_t>(i)]] = rel[static_cast<std::size_t>(i)];
  for (Index i : order) ranking.entries.push_back({ids[static_cast<std::size_t>(i)], text[static_cast<std::size_t>(i)]});

  return {FeatureMatrix(std::move(values), std::move(ids)), std::move(truth), std::move(ranking)};
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string file_digest(const std::filesystem::path& path) {
  auto in = open_input(path, true);
  std::ostringstream ss;
  ss << in.rdbuf();
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(ss.str())));
  return std::string("fnv1a64:") + buf;
}

}  // namespace stlr
