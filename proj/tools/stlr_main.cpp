// SPDX-License-Identifier: Apache-2.0
// stlr: ingest, synth, run, grid and path subcommands over the stlr library.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "stlr/dataset.hpp"
#include "stlr/error.hpp"
#include "stlr/experiment.hpp"
#include "stlr/rerank.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace stlr;

namespace {

void print_error(std::string_view kind, const std::string& message) {
  json j{{"error", {{"kind", kind}, {"message", message}}}};
  std::cerr << j.dump() << '\n';
}

/// Flag overrides layered over the declarative config file.
struct Overrides {
  std::optional<std::string> method;
  std::optional<double> alpha, beta, lambda1, lambda2;
  std::optional<long long> d, k, top_k, workers, seed, folds, path_column;
  std::optional<std::string> metric;
  std::optional<double> ridge;
  bool auto_shrink_alpha = false;
  bool standardize = false;

  void attach(CLI::App* app) {
    app->add_option("--method", method, "stl, bda, pca or identity");
    app->add_option("--alpha", alpha);
    app->add_option("--beta", beta);
    app->add_option("--lambda1", lambda1);
    app->add_option("--lambda2", lambda2);
    app->add_option("--d", d, "subspace dimension");
    app->add_option("--k", k, "nonzeros per projection column");
    app->add_option("--top-k", top_k, "feedback budget");
    app->add_option("--metric", metric, "mahalanobis or euclidean");
    app->add_option("--ridge", ridge, "covariance ridge (negative: automatic)");
    app->add_option("--workers", workers);
    app->add_option("--seed", seed);
    app->add_option("--folds", folds);
    app->add_option("--path-column", path_column);
    app->add_flag("--auto-shrink-alpha", auto_shrink_alpha, "halve alpha until A is positive definite");
    app->add_flag("--standardize", standardize, "scale features to unit variance after centering");
  }

  void apply(json& j) const {
    if (method) j["method"] = *method;
    auto stl_set = [&](const char* key, const auto& v) {
      if (v) j["stl"][key] = *v;
    };
    stl_set("alpha", alpha);
    stl_set("beta", beta);
    stl_set("lambda1", lambda1);
    stl_set("lambda2", lambda2);
    stl_set("d", d);
    stl_set("k", k);
    if (top_k) j["top_k"] = *top_k;
    if (metric) j["metric"] = *metric;
    if (ridge) j["ridge"] = *ridge;
    if (workers) j["workers"] = *workers;
    if (seed) j["seed"] = *seed;
    if (folds) j["folds"] = *folds;
    if (path_column) j["path_column"] = *path_column;
    if (auto_shrink_alpha) j["auto_shrink_alpha"] = true;
    if (standardize) j["standardize"] = true;
  }
};

experiment::ExperimentSpec load_with_overrides(const std::string& config, const Overrides& ov) {
  std::ifstream in(config);
  if (!in) throw IoError("cannot open config '" + config + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("config '" + config + "': " + e.what());
  }
  ov.apply(j);
  return experiment::spec_from_json(j, fs::path(config).parent_path());
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("cannot write '" + path.string() + "'");
}

int cmd_ingest(const std::string& input, const std::string& in_format, const std::string& output,
               const std::string& out_format, bool do_center, bool do_standardize) {
  FeatureMatrix x = load_features(input, parse_feature_format(in_format));
  if (do_standardize) {
    x = standardize(x);
  } else if (do_center) {
    x = center(x);
  }
  save_features(x, output, parse_feature_format(out_format));
  json j{{"m", x.dims()}, {"n", x.size()}, {"centered", x.centered()},
         {"input_digest", file_digest(input)}, {"output_digest", file_digest(output)}};
  std::cout << j.dump() << '\n';
  return 0;
}

int cmd_synth(const fs::path& out, long long count, const SynthParams& proto) {
  if (count < 1) throw ParameterError("synth: count must be >= 1");
  std::error_code ec;
  fs::create_directories(out / "features", ec);
  if (ec) throw IoError("cannot create '" + out.string() + "': " + ec.message());
  json suite{{"count", count},
             {"seed", proto.seed},
             {"n", proto.n},
             {"m", proto.m},
             {"n_rel", proto.n_rel},
             {"separation", proto.separation},
             {"noise_dims", proto.noise_dims},
             {"irrelevant_centers", proto.irrelevant_centers},
             {"text_signal", proto.text_signal}};
  // Expanding the suite shorthand keeps ids and seeds identical to `run`.
  const auto expanded = experiment::spec_from_json(json{{"suite", suite}});
  std::vector<QueryTruth> truths;
  std::vector<RankedList> rankings;
  json queries = json::array();
  for (const auto& src : expanded.queries) {
    const experiment::Query q = experiment::load_query(src);
    const std::string rel = "features/" + q.id + ".csv";
    save_features(q.features, out / rel, FeatureFormat::csv);
    truths.push_back(q.truth);
    rankings.push_back(q.text_ranking);
    queries.push_back({{"id", q.id}, {"features", rel}, {"format", "csv"}});
  }
  save_qrels(truths, out / "qrels.txt");
  save_run(rankings, "text", out / "text.run");
  write_json(out / "spec.json", json{{"queries", queries}, {"qrels", "qrels.txt"}, {"ranking", "text.run"},
                                     {"seed", proto.seed}, {"method", "stl"}});
  std::cout << json{{"queries", count}, {"spec", (out / "spec.json").string()}}.dump() << '\n';
  return 0;
}

int cmd_run(const std::string& config, const Overrides& ov, const fs::path& out) {
  const auto spec = load_with_overrides(config, ov);
  const auto queries = experiment::load_queries(spec);
  const auto result = experiment::run_experiment(spec, queries);
  experiment::write_run_artifacts(spec, queries, result, out);
  std::cout << rerank::format_table(result.report, experiment::to_string(spec.method));
  return 0;
}

int cmd_grid(const std::string& config, const Overrides& ov, const fs::path& out) {
  const auto spec = load_with_overrides(config, ov);
  const auto queries = experiment::load_queries(spec);
  const auto report = experiment::grid_search(spec, queries);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create '" + out.string() + "': " + ec.message());
  write_json(out / "grid.json", experiment::to_json(report));
  json manifest{{"tool", "stlr"}, {"spec", experiment::to_json(spec)}, {"inputs", json::object()},
                {"artifacts", {{"grid.json", file_digest(out / "grid.json")}}}};
  for (const auto& q : queries) manifest["inputs"][q.id] = q.digest;
  write_json(out / "manifest.json", manifest);
  for (const auto& cell : report.cells) {
    std::cout << "cell config=" << cell.config << " fold=" << cell.fold
              << (cell.feasible ? " map=" + std::to_string(cell.held_out_map) : " " + cell.note) << '\n';
  }
  const auto& best = report.configs[static_cast<std::size_t>(report.best)];
  std::cout << "best " << json{{"alpha", best.config.alpha}, {"beta", best.config.beta},
                                {"lambda2", best.config.lambda2}, {"d", best.config.d},
                                {"k", best.config.k}, {"cv_map", best.cv_map}}.dump()
            << '\n';
  return 0;
}

int cmd_path(const std::string& config, const Overrides& ov, const std::string& query_id, long long column,
             const std::string& layout_name, const fs::path& out) {
  auto spec = load_with_overrides(config, ov);
  spec.method = experiment::Method::stl;
  const experiment::QuerySource* source = nullptr;
  for (const auto& q : spec.queries) {
    if (query_id.empty() || q.id == query_id) {
      source = &q;
      break;
    }
  }
  if (!source) throw ParameterError("path: unknown query '" + query_id + "'");
  const auto query = experiment::load_query(*source);
  const auto outcome = experiment::evaluate_query(query, spec);
  if (!outcome.ok) {
    throw Error(ErrorKind::data, "path: query '" + query.id + "' failed: " + outcome.error);
  }
  std::optional<experiment::FeatureLayout> layout = spec.layout;
  if (layout_name == "standard_visual") {
    layout = experiment::standard_visual_layout();
  } else if (!layout_name.empty()) {
    throw ParameterError("path: unknown layout '" + layout_name + "'");
  }
  experiment::export_coeff_path(*outcome.projection, column, out, layout);
  std::cout << json{{"query", query.id}, {"column", column}, {"out", out.string()}}.dump() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stlr: sparse transfer learning for relevance-feedback reranking"};
  app.require_subcommand(1);

  std::string input, in_format = "csv", output, out_format = "raw_f64";
  bool do_center = false, do_standardize = false;
  auto* ingest = app.add_subcommand("ingest", "convert and optionally center a feature file");
  ingest->add_option("--input", input)->required();
  ingest->add_option("--format", in_format, "csv or raw_f64");
  ingest->add_option("--output", output)->required();
  ingest->add_option("--out-format", out_format, "csv or raw_f64");
  ingest->add_flag("--center", do_center);
  ingest->add_flag("--standardize", do_standardize);

  std::string synth_out;
  long long count = 20;
  SynthParams proto;
  auto* synth = app.add_subcommand("synth", "write a seeded synthetic query suite");
  synth->add_option("--out", synth_out)->required();
  synth->add_option("--count", count);
  synth->add_option("--seed", proto.seed);
  synth->add_option("--n", proto.n);
  synth->add_option("--m", proto.m);
  synth->add_option("--n-rel", proto.n_rel);
  synth->add_option("--separation", proto.separation);
  synth->add_option("--noise-dims", proto.noise_dims);
  synth->add_option("--irrelevant-centers", proto.irrelevant_centers);
  synth->add_option("--text-signal", proto.text_signal);

  std::string config, out;
  Overrides ov;
  auto* run = app.add_subcommand("run", "rerank every query and write run artifacts");
  run->add_option("--config", config)->required();
  run->add_option("--out", out)->required();
  ov.attach(run);

  auto* grid = app.add_subcommand("grid", "cross-validated grid search over the config's grid");
  grid->add_option("--config", config)->required();
  grid->add_option("--out", out)->required();
  ov.attach(grid);

  std::string query_id, layout_name;
  long long column = 0;
  auto* path = app.add_subcommand("path", "export one projection column's coefficient path");
  path->add_option("--config", config)->required();
  path->add_option("--out", out)->required();
  path->add_option("--query", query_id, "query id (default: first)");
  path->add_option("--column", column);
  path->add_option("--layout", layout_name, "named feature layout, e.g. standard_visual");
  ov.attach(path);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("parameter", e.what());
    return 2;
  }

  try {
    if (*ingest) return cmd_ingest(input, in_format, output, out_format, do_center, do_standardize);
    if (*synth) return cmd_synth(synth_out, count, proto);
    if (*run) return cmd_run(config, ov, out);
    if (*grid) return cmd_grid(config, ov, out);
    if (*path) return cmd_path(config, ov, query_id, column, layout_name, out);
  } catch (const Error& e) {
    print_error(to_string(e.kind()), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
  return 0;
}
