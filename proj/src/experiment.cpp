// SPDX-License-Identifier: Apache-2.0
#include "stlr/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "stlr/bda.hpp"
#include "stlr/error.hpp"
#include "stlr/parallel.hpp"
#include "stlr/pca.hpp"

namespace stlr::experiment {
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigurationError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigurationError(where + ": unknown key '" + key + "'");
  }
}

template <class T>
T get(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigurationError("key '" + key + "': " + e.what());
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return path;
}

std::string hex_digest(std::uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "fnv1a64:%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

SynthParams synth_from_json(const json& j, const std::string& default_id) {
  check_keys(j, {"seed", "n", "m", "n_rel", "separation", "noise_dims", "irrelevant_centers",
                 "text_signal", "query_id"},
             "synth");
  SynthParams p;
  p.seed = get<std::uint64_t>(j, "seed", p.seed);
  p.n = get<Index>(j, "n", p.n);
  p.m = get<Index>(j, "m", p.m);
  p.n_rel = get<Index>(j, "n_rel", p.n_rel);
  p.separation = get<double>(j, "separation", p.separation);
  p.noise_dims = get<Index>(j, "noise_dims", p.noise_dims);
  p.irrelevant_centers = get<Index>(j, "irrelevant_centers", p.irrelevant_centers);
  p.text_signal = get<double>(j, "text_signal", p.text_signal);
  p.query_id = get<std::string>(j, "query_id", default_id.empty() ? p.query_id : default_id);
  return p;
}

json synth_to_json(const SynthParams& p) {
  return json{{"seed", p.seed},
              {"n", p.n},
              {"m", p.m},
              {"n_rel", p.n_rel},
              {"separation", p.separation},
              {"noise_dims", p.noise_dims},
              {"irrelevant_centers", p.irrelevant_centers},
              {"text_signal", p.text_signal},
              {"query_id", p.query_id}};
}

std::string query_name(Index q, Index count) {
  std::size_t width = 2;
  for (Index c = count - 1; c >= 100; c /= 10) ++width;
  std::string digits = std::to_string(q);
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return "q" + digits;
}

bool lex_smaller(const stl::StlConfig& a, const stl::StlConfig& b) {
  if (a.k != b.k) return a.k < b.k;
  if (a.d != b.d) return a.d < b.d;
  return a.alpha < b.alpha;
}

/// Index of the best score among eligible entries; ties go to the smallest
/// (K, d, alpha), then the earliest index.
Index pick_best(const std::vector<GridConfigScore>& configs, const std::vector<double>& score,
                const std::vector<bool>& eligible) {
  Index best = -1;
  for (std::size_t c = 0; c < configs.size(); ++c) {
    if (!eligible[c]) continue;
    if (best < 0) {
      best = static_cast<Index>(c);
      continue;
    }
    const auto b = static_cast<std::size_t>(best);
    if (score[c] > score[b] || (score[c] == score[b] && lex_smaller(configs[c].config, configs[b].config))) {
      best = static_cast<Index>(c);
    }
  }
  return best;
}

json config_to_json(const stl::StlConfig& c) {
  return json{{"alpha", c.alpha}, {"beta", c.beta}, {"lambda1", c.lambda1},
              {"lambda2", c.lambda2}, {"d", c.d}, {"k", c.k}};
}

}  // namespace

Method parse_method(const std::string& name) {
  if (name == "stl") return Method::stl;
  if (name == "bda") return Method::bda;
  if (name == "pca") return Method::pca;
  if (name == "identity") return Method::identity;
  throw ParameterError("unknown method '" + name + "'");
}

std::string to_string(Method method) {
  switch (method) {
    case Method::stl: return "stl";
    case Method::bda: return "bda";
    case Method::pca: return "pca";
    case Method::identity: return "identity";
  }
  return "unknown";
}

std::vector<stl::StlConfig> Grid::expand(const stl::StlConfig& base) const {
  const std::vector<double> as = alpha.empty() ? std::vector<double>{base.alpha} : alpha;
  const std::vector<double> bs = beta.empty() ? std::vector<double>{base.beta} : beta;
  const std::vector<double> l2s = lambda2.empty() ? std::vector<double>{base.lambda2} : lambda2;
  const std::vector<Index> ds = d.empty() ? std::vector<Index>{base.d} : d;
  const std::vector<Index> ks = k.empty() ? std::vector<Index>{base.k} : k;
  std::vector<stl::StlConfig> out;
  for (double a : as)
    for (double b : bs)
      for (double l2 : l2s)
        for (Index dd : ds)
          for (Index kk : ks) {
            stl::StlConfig c = base;
            c.alpha = a;
            c.beta = b;
            c.lambda2 = l2;
            c.d = dd;
            c.k = kk;
            out.push_back(c);
          }
  return out;
}

FeatureLayout standard_visual_layout() {
  return {{"CM", 225}, {"HSV", 64}, {"Corre", 144}, {"WT", 128}};
}

void ExperimentSpec::validate() const {
  if (queries.empty()) throw ParameterError("experiment: no queries");
  stl.validate();
  if (top_k < 1) throw ParameterError("experiment: top_k must be >= 1");
  if (ap_cutoff < 0) throw ParameterError("experiment: ap_cutoff must be >= 0");
  if (pca_d < 0 || bda_d < 0) throw ParameterError("experiment: d must be >= 0");
  if (!(bda_ridge >= 0.0)) throw ParameterError("experiment: bda ridge must be >= 0");
  if (workers < 1) throw ParameterError("experiment: workers must be >= 1");
  if (folds < 1) throw ParameterError("experiment: folds must be >= 1");
  if (path_column < 0) throw ParameterError("experiment: path_column must be >= 0");
  if (layout) {
    for (const auto& g : *layout) {
      if (g.size < 1 || g.name.empty()) throw ParameterError("experiment: invalid feature group");
    }
  }
  std::set<std::string> ids;
  for (const auto& q : queries) {
    if (q.id.empty()) throw ParameterError("experiment: query without id");
    if (!ids.insert(q.id).second) throw ParameterError("experiment: duplicate query id '" + q.id + "'");
  }
}

ExperimentSpec spec_from_json(const json& j, const fs::path& base_dir) {
  check_keys(j, {"queries", "suite", "method", "stl", "pca", "bda", "top_k", "ap_cutoff", "metric",
                 "ridge", "seed", "workers", "auto_shrink_alpha", "standardize", "path_column",
                 "layout", "grid", "folds", "qrels", "ranking"},
             "spec");
  ExperimentSpec s;
  s.method = parse_method(get<std::string>(j, "method", "stl"));
  if (j.contains("stl")) {
    const json& c = j.at("stl");
    check_keys(c, {"alpha", "beta", "lambda1", "lambda2", "d", "k"}, "stl");
    s.stl.alpha = get<double>(c, "alpha", s.stl.alpha);
    s.stl.beta = get<double>(c, "beta", s.stl.beta);
    s.stl.lambda1 = get<double>(c, "lambda1", s.stl.lambda1);
    s.stl.lambda2 = get<double>(c, "lambda2", s.stl.lambda2);
    s.stl.d = get<Index>(c, "d", s.stl.d);
    s.stl.k = get<Index>(c, "k", s.stl.k);
  }
  if (j.contains("pca")) {
    check_keys(j.at("pca"), {"d"}, "pca");
    s.pca_d = get<Index>(j.at("pca"), "d", 0);
  }
  if (j.contains("bda")) {
    check_keys(j.at("bda"), {"d", "ridge"}, "bda");
    s.bda_d = get<Index>(j.at("bda"), "d", 0);
    s.bda_ridge = get<double>(j.at("bda"), "ridge", s.bda_ridge);
  }
  s.top_k = get<Index>(j, "top_k", s.top_k);
  s.ap_cutoff = get<Index>(j, "ap_cutoff", s.ap_cutoff);
  s.distance.metric = rerank::parse_metric(get<std::string>(j, "metric", "mahalanobis"));
  s.distance.ridge = get<double>(j, "ridge", s.distance.ridge);
  s.seed = get<std::uint64_t>(j, "seed", s.seed);
  s.workers = get<Index>(j, "workers", s.workers);
  s.auto_shrink_alpha = get<bool>(j, "auto_shrink_alpha", s.auto_shrink_alpha);
  s.standardize = get<bool>(j, "standardize", s.standardize);
  s.path_column = get<Index>(j, "path_column", s.path_column);
  s.folds = get<Index>(j, "folds", s.folds);

  if (j.contains("layout")) {
    const json& l = j.at("layout");
    if (l.is_string()) {
      if (l.get<std::string>() != "standard_visual") {
        throw ConfigurationError("layout: unknown named layout '" + l.get<std::string>() + "'");
      }
      s.layout = standard_visual_layout();
    } else if (l.is_array()) {
      FeatureLayout layout;
      for (const auto& g : l) {
        check_keys(g, {"name", "size"}, "layout group");
        layout.push_back({get<std::string>(g, "name", ""), get<Index>(g, "size", 0)});
      }
      s.layout = layout;
    } else {
      throw ConfigurationError("layout: expected a name or a list of groups");
    }
  }

  if (j.contains("grid")) {
    const json& g = j.at("grid");
    check_keys(g, {"alpha", "beta", "lambda2", "d", "k"}, "grid");
    s.grid.alpha = get<std::vector<double>>(g, "alpha", {});
    s.grid.beta = get<std::vector<double>>(g, "beta", {});
    s.grid.lambda2 = get<std::vector<double>>(g, "lambda2", {});
    s.grid.d = get<std::vector<Index>>(g, "d", {});
    s.grid.k = get<std::vector<Index>>(g, "k", {});
  }

  const std::string default_qrels = get<std::string>(j, "qrels", "");
  const std::string default_ranking = get<std::string>(j, "ranking", "");
  if (j.contains("queries")) {
    for (const auto& q : j.at("queries")) {
      check_keys(q, {"id", "features", "format", "qrels", "ranking", "synth"}, "query");
      QuerySource src;
      src.id = get<std::string>(q, "id", "");
      if (q.contains("synth")) {
        src.synth = synth_from_json(q.at("synth"), src.id);
        if (src.id.empty()) src.id = src.synth->query_id;
        src.synth->query_id = src.id;
      } else {
        src.features = resolve(base_dir, get<std::string>(q, "features", ""));
        src.format = parse_feature_format(get<std::string>(q, "format", "csv"));
        src.qrels = resolve(base_dir, get<std::string>(q, "qrels", default_qrels));
        src.ranking = resolve(base_dir, get<std::string>(q, "ranking", default_ranking));
        if (src.features.empty() || src.qrels.empty() || src.ranking.empty()) {
          throw ConfigurationError("query '" + src.id + "': features, qrels and ranking are required");
        }
      }
      s.queries.push_back(std::move(src));
    }
  }
  if (j.contains("suite")) {
    const json& su = j.at("suite");
    check_keys(su, {"count", "seed", "n", "m", "n_rel", "separation", "noise_dims",
                    "irrelevant_centers", "text_signal"},
               "suite");
    const Index count = get<Index>(su, "count", 20);
    const std::uint64_t seed = get<std::uint64_t>(su, "seed", s.seed);
    if (count < 1) throw ConfigurationError("suite: count must be >= 1");
    json proto = su;
    proto.erase("count");
    for (Index q = 0; q < count; ++q) {
      QuerySource src;
      src.id = query_name(q, count);
      src.synth = synth_from_json(proto, src.id);
      src.synth->seed = seed * 1000 + static_cast<std::uint64_t>(q);
      s.queries.push_back(std::move(src));
    }
  }
  s.validate();
  return s;
}

ExperimentSpec load_spec(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open spec '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("spec '" + path.string() + "': " + e.what());
  }
  return spec_from_json(j, path.parent_path());
}

json to_json(const ExperimentSpec& s) {
  json q = json::array();
  for (const auto& src : s.queries) {
    if (src.synth) {
      json sj = synth_to_json(*src.synth);
      sj.erase("query_id");
      q.push_back({{"id", src.id}, {"synth", sj}});
    } else {
      q.push_back({{"id", src.id},
                   {"features", src.features.string()},
                   {"format", to_string(src.format)},
                   {"qrels", src.qrels.string()},
                   {"ranking", src.ranking.string()}});
    }
  }
  json j{{"queries", q},
         {"method", to_string(s.method)},
         {"stl", config_to_json(s.stl)},
         {"pca", {{"d", s.pca_d}}},
         {"bda", {{"d", s.bda_d}, {"ridge", s.bda_ridge}}},
         {"top_k", s.top_k},
         {"ap_cutoff", s.ap_cutoff},
         {"metric", rerank::to_string(s.distance.metric)},
         {"ridge", s.distance.ridge},
         {"seed", s.seed},
         {"workers", s.workers},
         {"auto_shrink_alpha", s.auto_shrink_alpha},
         {"standardize", s.standardize},
         {"path_column", s.path_column},
         {"folds", s.folds},
         {"grid",
          {{"alpha", s.grid.alpha},
           {"beta", s.grid.beta},
           {"lambda2", s.grid.lambda2},
           {"d", s.grid.d},
           {"k", s.grid.k}}}};
  if (s.layout) {
    json l = json::array();
    for (const auto& g : *s.layout) l.push_back({{"name", g.name}, {"size", g.size}});
    j["layout"] = l;
  }
  return j;
}

ExperimentSpec reference_suite(Method method) {
  json j{{"method", to_string(method)},
         {"seed", 3},
         {"suite",
          {{"count", 20}, {"seed", 3}, {"n", 500}, {"m", 60}, {"n_rel", 50},
           {"separation", 4.0}, {"noise_dims", 30}}},
         {"stl", {{"alpha", 0.05}, {"beta", 0.1}, {"lambda1", 0.0}, {"lambda2", 0.0}, {"d", 5}, {"k", 30}}},
         {"top_k", 20}};
  return spec_from_json(j);
}

Query load_query(const QuerySource& source) {
  if (source.synth) {
    SynthParams p = *source.synth;
    p.query_id = source.id;
    SynthQuery sq = synth_query(p);
    const auto& v = sq.features.values();
    std::string bytes(reinterpret_cast<const char*>(v.data()), static_cast<std::size_t>(v.size()) * sizeof(double));
    bytes += synth_to_json(p).dump();
    return Query{source.id, std::move(sq.features), std::move(sq.truth), std::move(sq.text_ranking),
                 hex_digest(fnv1a64(bytes))};
  }
  FeatureMatrix features = load_features(source.features, source.format);
  auto qrels = load_qrels(source.qrels);
  auto runs = load_run(source.ranking);
  auto t = qrels.find(source.id);
  if (t == qrels.end()) throw DataError("query '" + source.id + "' has no qrels entries");
  auto r = runs.find(source.id);
  if (r == runs.end()) throw DataError("query '" + source.id + "' has no text ranking");
  const std::string digest = hex_digest(fnv1a64(file_digest(source.features) + file_digest(source.qrels) +
                                                file_digest(source.ranking)));
  return Query{source.id, std::move(features), t->second, r->second, digest};
}

std::vector<Query> load_queries(const ExperimentSpec& spec) {
  std::vector<Query> out;
  out.reserve(spec.queries.size());
  for (const auto& src : spec.queries) out.push_back(load_query(src));
  return out;
}

QueryOutcome evaluate_query(const Query& query, const ExperimentSpec& spec) {
  QueryOutcome o;
  o.id = query.id;
  try {
    o.baseline_ap = rerank::average_precision(query.text_ranking, query.truth, spec.ap_cutoff);
    const LabelSet labels =
        rerank::simulate_feedback(query.text_ranking, query.truth, spec.top_k, query.features.shot_ids());
    const FeatureMatrix x = spec.standardize ? standardize(query.features) : center(query.features);
    Eigen::MatrixXd y;
    switch (spec.method) {
      case Method::stl: {
        stl::SolveOptions so;
        so.auto_shrink_alpha = spec.auto_shrink_alpha;
        stl::SparseProjection proj = stl::solve_stl(x, labels, spec.stl, so);
        y = stl::project(proj.u, x.values());
        o.projection = std::move(proj);
        break;
      }
      case Method::pca:
        y = pca::pca_target(x, spec.pca_d > 0 ? spec.pca_d : spec.stl.d).scores;
        break;
      case Method::bda: {
        const auto sub = bda::bda_subspace(x.values(), labels, spec.bda_d > 0 ? spec.bda_d : spec.stl.d,
                                           spec.bda_ridge);
        y = sub.u.transpose() * x.values();
        break;
      }
      case Method::identity:
        y = x.values();
        break;
    }
    const Eigen::VectorXd dist = rerank::relevance_distances(y, labels.relevant_idx, spec.distance);
    o.ranking = rerank::rank_by_distance(dist, query.features.shot_ids(), query.id);
    o.ap = rerank::average_precision(o.ranking, query.truth, spec.ap_cutoff);
    o.ok = true;
  } catch (const NotPositiveDefinite& e) {
    o.infeasible = true;
    o.error_kind = std::string(to_string(e.kind()));
    o.error = e.what();
  } catch (const Error& e) {
    o.error_kind = std::string(to_string(e.kind()));
    o.error = e.what();
  } catch (const std::exception& e) {
    o.error_kind = "internal";
    o.error = e.what();
  }
  return o;
}

ExperimentResult run_experiment(const ExperimentSpec& spec, const std::vector<Query>& queries) {
  ExperimentResult res;
  res.outcomes.resize(queries.size());
  parallel_for(static_cast<Index>(queries.size()), spec.workers, [&](Index q) {
    res.outcomes[static_cast<std::size_t>(q)] = evaluate_query(queries[static_cast<std::size_t>(q)], spec);
  });
  std::map<std::string, double> aps;
  std::map<std::string, std::string> skipped;
  double baseline_sum = 0.0;
  for (const auto& o : res.outcomes) {
    if (o.ok) {
      aps[o.id] = o.ap;
      baseline_sum += o.baseline_ap;
    } else {
      skipped[o.id] = o.error_kind + ": " + o.error;
    }
  }
  if (aps.empty()) throw DataError("run: every query was skipped");
  res.report = rerank::mean_ap(aps, baseline_sum / static_cast<double>(aps.size()));
  res.report.skipped = std::move(skipped);
  return res;
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  return run_experiment(spec, load_queries(spec));
}

json to_json(const rerank::EvalReport& report) {
  json j{{"per_query_ap", report.per_query_ap},
         {"map", report.map},
         {"baseline_map", report.baseline_map},
         {"skipped", report.skipped}};
  j["gain"] = report.gain ? json(*report.gain) : json(nullptr);
  return j;
}

void write_run_artifacts(const ExperimentSpec& spec, const std::vector<Query>& queries,
                         const ExperimentResult& result, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir / "paths", ec);
  if (ec) throw IoError("cannot create run directory '" + dir.string() + "': " + ec.message());

  const std::string method = to_string(spec.method);
  std::vector<std::string> artifacts;

  json report = to_json(result.report);
  report["method"] = method;
  json details = json::object();
  for (const auto& o : result.outcomes) {
    json d{{"ok", o.ok}, {"baseline_ap", o.baseline_ap}};
    if (o.ok) d["ap"] = o.ap;
    if (!o.ok) d["error"] = {{"kind", o.error_kind}, {"message", o.error}, {"infeasible", o.infeasible}};
    if (o.projection) {
      d["alpha_used"] = o.projection->alpha_used;
      d["alpha_prime"] = o.projection->alpha_prime;
      d["alpha_halvings"] = o.projection->alpha_halvings;
      d["nonzeros"] = o.projection->nonzeros;
    }
    details[o.id] = d;
  }
  report["queries"] = details;
  {
    std::ofstream out(dir / "report.json");
    out << report.dump(2) << '\n';
    if (!out) throw IoError("cannot write report.json");
  }
  artifacts.push_back("report.json");

  std::vector<RankedList> reranked;
  for (const auto& o : result.outcomes) {
    if (o.ok) reranked.push_back(o.ranking);
  }
  save_run(reranked, "stlr-" + method, dir / (method + ".run"));
  artifacts.push_back(method + ".run");

  std::vector<RankedList> text;
  for (const auto& q : queries) text.push_back(q.text_ranking);
  save_run(text, "text", dir / "text.run");
  artifacts.push_back("text.run");

  for (const auto& o : result.outcomes) {
    if (!o.projection || spec.path_column >= o.projection->config.d) continue;
    const std::string name = "paths/" + o.id + "_col" + std::to_string(spec.path_column) + ".csv";
    export_coeff_path(*o.projection, spec.path_column, dir / name, spec.layout);
    artifacts.push_back(name);
  }

  json inputs = json::object();
  for (const auto& q : queries) inputs[q.id] = q.digest;
  json digests = json::object();
  for (const auto& a : artifacts) digests[a] = file_digest(dir / a);
  json manifest{{"tool", "stlr"},
                {"version", kVersion},
                {"spec", to_json(spec)},
                {"seed", spec.seed},
                {"inputs", inputs},
                {"artifacts", digests}};
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
  if (!out) throw IoError("cannot write manifest.json");
}

std::vector<std::vector<Index>> contiguous_folds(Index count, Index folds) {
  if (folds < 1) throw ParameterError("folds must be >= 1");
  if (count < folds) throw ParameterError("fewer query groups than folds");
  std::vector<std::vector<Index>> out(static_cast<std::size_t>(folds));
  const Index base = count / folds;
  const Index extra = count % folds;
  Index next = 0;
  for (Index f = 0; f < folds; ++f) {
    const Index size = base + (f < extra ? 1 : 0);
    for (Index i = 0; i < size; ++i) out[static_cast<std::size_t>(f)].push_back(next++);
  }
  return out;
}

GridReport grid_search(const ExperimentSpec& spec, const std::vector<Query>& queries) {
  if (spec.grid.empty()) throw ParameterError("grid_search: empty grid");
  GridReport rep;
  const std::vector<stl::StlConfig> configs = spec.grid.expand(spec.stl);
  for (const auto& c : configs) c.validate();
  rep.folds = contiguous_folds(static_cast<Index>(queries.size()), spec.folds);

  const auto nq = queries.size();
  struct Slim {
    bool ok = false;
    bool infeasible = false;
    double ap = 0.0;
  };
  std::vector<Slim> slim(configs.size() * nq);
  parallel_for(static_cast<Index>(slim.size()), spec.workers, [&](Index idx) {
    const auto c = static_cast<std::size_t>(idx) / nq;
    const auto q = static_cast<std::size_t>(idx) % nq;
    ExperimentSpec cell = spec;
    cell.stl = configs[c];
    cell.pca_d = 0;
    cell.bda_d = 0;
    const QueryOutcome o = evaluate_query(queries[q], cell);
    slim[static_cast<std::size_t>(idx)] = {o.ok, o.infeasible, o.ap};
  });

  for (std::size_t c = 0; c < configs.size(); ++c) {
    GridConfigScore score{configs[c], true, 0.0};
    for (std::size_t f = 0; f < rep.folds.size(); ++f) {
      GridCell cell;
      cell.config = static_cast<Index>(c);
      cell.fold = static_cast<Index>(f);
      double sum = 0.0;
      for (Index q : rep.folds[f]) {
        const Slim& s = slim[c * nq + static_cast<std::size_t>(q)];
        if (s.infeasible) cell.feasible = false;
        if (s.ok) {
          sum += s.ap;
          ++cell.evaluated;
        }
      }
      if (!cell.feasible) {
        cell.note = "infeasible: A not positive definite";
      } else if (cell.evaluated == 0) {
        cell.feasible = false;
        cell.note = "no evaluable queries";
      } else {
        cell.held_out_map = sum / static_cast<double>(cell.evaluated);
      }
      if (!cell.feasible) score.feasible = false;
      score.cv_map += cell.held_out_map;
      rep.cells.push_back(cell);
    }
    score.cv_map = score.feasible ? score.cv_map / static_cast<double>(rep.folds.size()) : 0.0;
    rep.configs.push_back(score);
  }

  std::vector<double> cv(configs.size());
  std::vector<bool> eligible(configs.size());
  for (std::size_t c = 0; c < configs.size(); ++c) {
    cv[c] = rep.configs[c].cv_map;
    eligible[c] = rep.configs[c].feasible;
  }
  rep.best = pick_best(rep.configs, cv, eligible);
  if (rep.best < 0) throw DataError("grid_search: no feasible configuration");

  const std::size_t nf = rep.folds.size();
  if (nf > 1) {
    for (std::size_t f = 0; f < nf; ++f) {
      std::vector<double> train(configs.size(), 0.0);
      for (std::size_t c = 0; c < configs.size(); ++c) {
        for (std::size_t g = 0; g < nf; ++g) {
          if (g != f) train[c] += rep.cells[c * nf + g].held_out_map;
        }
        train[c] /= static_cast<double>(nf - 1);
      }
      const Index choice = pick_best(rep.configs, train, eligible);
      rep.nested_choice.push_back(choice);
      rep.nested_test_map.push_back(rep.cells[static_cast<std::size_t>(choice) * nf + f].held_out_map);
    }
  }
  return rep;
}

json to_json(const GridReport& report) {
  json configs = json::array();
  for (const auto& c : report.configs) {
    configs.push_back({{"config", config_to_json(c.config)}, {"feasible", c.feasible}, {"cv_map", c.cv_map}});
  }
  json cells = json::array();
  for (const auto& c : report.cells) {
    json cj{{"config", c.config}, {"fold", c.fold}, {"feasible", c.feasible},
            {"held_out_map", c.held_out_map}, {"evaluated", c.evaluated}};
    if (!c.note.empty()) cj["note"] = c.note;
    cells.push_back(cj);
  }
  json j{{"configs", configs},
         {"cells", cells},
         {"folds", report.folds},
         {"best", report.best},
         {"nested_choice", report.nested_choice},
         {"nested_test_map", report.nested_test_map}};
  if (report.best >= 0) {
    const auto& b = report.configs[static_cast<std::size_t>(report.best)];
    j["best_config"] = config_to_json(b.config);
    j["best_cv_map"] = b.cv_map;
  }
  return j;
}

void export_coeff_path(const stl::SparseProjection& projection, Index column, std::ostream& out,
                       const std::optional<FeatureLayout>& layout) {
  if (column < 0 || column >= static_cast<Index>(projection.paths.size())) {
    throw ParameterError("export_coeff_path: column " + std::to_string(column) + " out of range");
  }
  const auto& path = projection.paths[static_cast<std::size_t>(column)];
  if (path.breakpoints.empty()) throw ParameterError("export_coeff_path: empty path");
  const Index p = path.breakpoints.front().coef.size();

  std::vector<std::string> names;
  std::vector<std::size_t> group_of;
  if (layout) {
    Index total = 0;
    for (const auto& g : *layout) total += g.size;
    if (total != p) {
      throw ParameterError("export_coeff_path: layout covers " + std::to_string(total) + " of " +
                           std::to_string(p) + " features");
    }
    for (std::size_t gi = 0; gi < layout->size(); ++gi) {
      for (Index k = 0; k < (*layout)[gi].size; ++k) {
        names.push_back((*layout)[gi].name + "_" + std::to_string(k));
        group_of.push_back(gi);
      }
    }
  } else {
    for (Index k = 0; k < p; ++k) names.push_back("f" + std::to_string(k));
  }

  out << "one_norm";
  if (layout) out << ",groups_active";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (const auto& bp : path.breakpoints) {
    out << format_number(bp.one_norm);
    if (layout) {
      std::vector<bool> active(layout->size(), false);
      for (Index k = 0; k < p; ++k) {
        if (bp.coef(k) != 0.0) active[group_of[static_cast<std::size_t>(k)]] = true;
      }
      std::string groups;
      for (std::size_t gi = 0; gi < active.size(); ++gi) {
        if (!active[gi]) continue;
        if (!groups.empty()) groups += '|';
        groups += (*layout)[gi].name;
      }
      out << ',' << groups;
    }
    for (Index k = 0; k < p; ++k) out << ',' << format_number(bp.coef(k));
    out << '\n';
  }
}

void export_coeff_path(const stl::SparseProjection& projection, Index column, const fs::path& out,
                       const std::optional<FeatureLayout>& layout) {
  std::ofstream f(out);
  if (!f) throw IoError("cannot write '" + out.string() + "'");
  export_coeff_path(projection, column, f, layout);
  if (!f) throw IoError("write failed for '" + out.string() + "'");
}

}  // namespace stlr::experiment
