// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include <gtest/gtest.h>

#include "stlr/error.hpp"
#include "stlr/experiment.hpp"

using namespace stlr;
using namespace stlr::experiment;

namespace {

json small_suite(const std::string& method, int count = 3) {
  return json{{"suite", {{"count", count}, {"seed", 9}, {"n", 150}, {"m", 12}, {"n_rel", 20}, {"separation", 4.0},
                         {"noise_dims", 4}}},
              {"method", method},
              {"stl", {{"alpha", 0.05}, {"beta", 0.1}, {"d", 3}, {"k", 6}}}};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("stlr_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Spec, ParsesSuiteAndRejectsUnknownKeys) {
  const ExperimentSpec s = spec_from_json(small_suite("stl"));
  ASSERT_EQ(s.queries.size(), 3u);
  EXPECT_EQ(s.queries[0].id, "q00");
  ASSERT_TRUE(s.queries[2].synth.has_value());
  EXPECT_EQ(s.queries[2].synth->seed, 9002u);
  EXPECT_EQ(s.method, Method::stl);
  EXPECT_EQ(s.stl.k, 6);

  json bad = small_suite("stl");
  bad["alpah"] = 1.0;
  EXPECT_THROW(spec_from_json(bad), ConfigurationError);
  bad = small_suite("stl");
  bad["stl"]["gamma"] = 1.0;
  EXPECT_THROW(spec_from_json(bad), ConfigurationError);
  EXPECT_THROW(parse_method("lda"), Error);
}

TEST(Spec, JsonRoundTrip) {
  json j = small_suite("bda");
  j["grid"] = {{"alpha", {0.01, 0.1}}, {"k", {2, 4}}};
  j["metric"] = "euclidean";
  j["layout"] = json::array({{{"name", "a"}, {"size", 5}}, {{"name", "b"}, {"size", 7}}});
  const json once = to_json(spec_from_json(j));
  const json twice = to_json(spec_from_json(once));
  EXPECT_EQ(once, twice);
}

TEST(Grid, ExpandsInFixedOrder) {
  Grid g;
  g.alpha = {0.1, 0.2};
  g.k = {3, 5, 7};
  const auto cfgs = g.expand(stl::StlConfig{});
  ASSERT_EQ(cfgs.size(), 6u);
  EXPECT_EQ(cfgs[0].alpha, 0.1);
  EXPECT_EQ(cfgs[0].k, 3);
  EXPECT_EQ(cfgs[1].k, 5);
  EXPECT_EQ(cfgs[3].alpha, 0.2);
  EXPECT_EQ(cfgs[5].k, 7);
}

TEST(Folds, Contiguous) {
  const auto f = contiguous_folds(24, 3);
  ASSERT_EQ(f.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    ASSERT_EQ(f[i].size(), 8u);
    EXPECT_EQ(f[i].front(), static_cast<Index>(8 * i));
  }
  const auto g = contiguous_folds(10, 3);
  EXPECT_EQ(g[0].size(), 4u);
  EXPECT_EQ(g[1].size(), 3u);
  EXPECT_EQ(g[2].size(), 3u);
  EXPECT_THROW(contiguous_folds(2, 3), ParameterError);
}

TEST(Run, IdentityMeanOfPerQueryAp) {
  const ExperimentSpec s = spec_from_json(small_suite("identity"));
  const ExperimentResult r = run_experiment(s);
  ASSERT_EQ(r.outcomes.size(), 3u);
  double sum = 0.0;
  for (const auto& o : r.outcomes) {
    EXPECT_TRUE(o.ok) << o.error;
    EXPECT_GT(o.ap, 0.0);
    EXPECT_LE(o.ap, 1.0);
    sum += o.ap;
  }
  EXPECT_NEAR(r.report.map, sum / 3.0, 1e-15);
  EXPECT_GT(r.report.baseline_map, 0.0);
  ASSERT_TRUE(r.report.gain.has_value());
}

TEST(Run, DeterministicAcrossWorkerCounts) {
  ExperimentSpec s = spec_from_json(small_suite("stl", 4));
  const ExperimentResult a = run_experiment(s);
  s.workers = 3;
  const ExperimentResult b = run_experiment(s);
  ASSERT_EQ(a.outcomes.size(), b.outcomes.size());
  for (std::size_t i = 0; i < a.outcomes.size(); ++i) EXPECT_EQ(a.outcomes[i].ap, b.outcomes[i].ap);
  EXPECT_EQ(a.report.map, b.report.map);
}

TEST(Run, InfeasibleAlphaIsReportedPerQuery) {
  json j = small_suite("stl");
  j["stl"]["alpha"] = 1e6;
  const ExperimentSpec s = spec_from_json(j);
  const auto queries = load_queries(s);
  const QueryOutcome o = evaluate_query(queries[0], s);
  EXPECT_FALSE(o.ok);
  EXPECT_TRUE(o.infeasible);
  EXPECT_THROW(run_experiment(s, queries), DataError);

  ExperimentSpec shrink = s;
  shrink.auto_shrink_alpha = true;
  const QueryOutcome fixed = evaluate_query(queries[0], shrink);
  EXPECT_TRUE(fixed.ok) << fixed.error;
  ASSERT_TRUE(fixed.projection.has_value());
  EXPECT_GT(fixed.projection->alpha_halvings, 0);
}

TEST(Run, StlBeatsPcaOnReferenceSuite) {
  const double stl_map = run_experiment(reference_suite(Method::stl)).report.map;
  const double pca_map = run_experiment(reference_suite(Method::pca)).report.map;
  EXPECT_GE(stl_map, pca_map);
}

TEST(Grid, SinglePointAndInfeasibleCell) {
  json j = small_suite("stl", 6);
  j["grid"] = {{"alpha", {0.05}}};
  ExperimentSpec s = spec_from_json(j);
  s.folds = 3;
  const auto queries = load_queries(s);
  const GridReport one = grid_search(s, queries);
  ASSERT_EQ(one.configs.size(), 1u);
  EXPECT_EQ(one.cells.size(), 3u);
  EXPECT_EQ(one.best, 0);
  EXPECT_EQ(one.nested_choice, (std::vector<Index>{0, 0, 0}));

  s.grid.alpha = {0.05, 1e6};
  const GridReport two = grid_search(s, queries);
  ASSERT_EQ(two.configs.size(), 2u);
  EXPECT_TRUE(two.configs[0].feasible);
  EXPECT_FALSE(two.configs[1].feasible);
  EXPECT_EQ(two.best, 0);
  for (Index f = 0; f < 3; ++f) EXPECT_FALSE(two.cells[static_cast<std::size_t>(3 + f)].feasible);

  s.grid.alpha = {1e6};
  EXPECT_THROW(grid_search(s, queries), DataError);
  s.grid = Grid{};
  EXPECT_THROW(grid_search(s, queries), ParameterError);
}

TEST(Path, SingleFeatureColumnHasOriginAndOneBreakpoint) {
  json j = small_suite("stl", 1);
  j["stl"]["k"] = 1;
  const ExperimentSpec s = spec_from_json(j);
  const QueryOutcome o = evaluate_query(load_queries(s)[0], s);
  ASSERT_TRUE(o.ok) << o.error;
  std::ostringstream os;
  export_coeff_path(*o.projection, 0, os);
  std::istringstream in(os.str());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0].rfind("one_norm,f0,", 0), 0u);
  for (char c : lines[1]) EXPECT_TRUE(c == '0' || c == ',');
  EXPECT_THROW(export_coeff_path(*o.projection, 5, os), ParameterError);
}

TEST(Path, GroupedLayoutHeader) {
  json j = small_suite("stl", 1);
  j["stl"]["k"] = 2;
  const ExperimentSpec s = spec_from_json(j);
  const QueryOutcome o = evaluate_query(load_queries(s)[0], s);
  ASSERT_TRUE(o.ok) << o.error;
  const FeatureLayout layout{{"color", 5}, {"texture", 7}};
  std::ostringstream os;
  export_coeff_path(*o.projection, 0, os, layout);
  const std::string header = os.str().substr(0, os.str().find('\n'));
  EXPECT_EQ(header.rfind("one_norm,groups_active,color_0,", 0), 0u);
  EXPECT_NE(header.find("texture_6"), std::string::npos);
  EXPECT_THROW(export_coeff_path(*o.projection, 0, os, FeatureLayout{{"x", 3}}), ParameterError);
}

TEST(Layout, StandardVisualHas561Dims) {
  const FeatureLayout l = standard_visual_layout();
  ASSERT_EQ(l.size(), 4u);
  Index total = 0;
  for (const auto& g : l) total += g.size;
  EXPECT_EQ(total, 561);
  EXPECT_EQ(l[0].name, "CM");
  EXPECT_EQ(l[3].size, 128);
}

TEST(Artifacts, ManifestIsDeterministic) {
  const ExperimentSpec s = spec_from_json(small_suite("stl", 2));
  const auto queries = load_queries(s);
  const ExperimentResult r = run_experiment(s, queries);
  const auto a = scratch_dir("a");
  const auto b = scratch_dir("b");
  write_run_artifacts(s, queries, r, a);
  write_run_artifacts(s, queries, r, b);
  for (const char* name : {"manifest.json", "report.json", "stl.run", "text.run"}) {
    ASSERT_TRUE(std::filesystem::exists(a / name)) << name;
    EXPECT_EQ(slurp(a / name), slurp(b / name)) << name;
  }
  EXPECT_TRUE(std::filesystem::exists(a / "paths" / "q00_col0.csv"));
  const json manifest = json::parse(slurp(a / "manifest.json"));
  EXPECT_EQ(manifest["inputs"].size(), 2u);
  EXPECT_EQ(load_run(a / "stl.run").size(), 2u);
  std::filesystem::remove_all(a);
  std::filesystem::remove_all(b);
}
