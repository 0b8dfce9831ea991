// SPDX-License-Identifier: Apache-2.0
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "stlr/bda.hpp"
#include "stlr/dataset.hpp"
#include "stlr/error.hpp"
#include "stlr/experiment.hpp"
#include "stlr/lars.hpp"
#include "stlr/pca.hpp"
#include "stlr/pda.hpp"
#include "stlr/rerank.hpp"
#include "stlr/stl.hpp"

namespace py = pybind11;
using namespace stlr;

namespace {

LabelSet make_labels(std::vector<Index> relevant, std::vector<Index> irrelevant) {
  LabelSet l;
  l.relevant_idx = std::move(relevant);
  l.irrelevant_idx = std::move(irrelevant);
  return l;
}

std::vector<std::string> default_ids(Index n) {
  std::vector<std::string> ids;
  for (Index i = 0; i < n; ++i) ids.push_back(std::to_string(i));
  return ids;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Sparse transfer learning for relevance-feedback reranking";

  py::register_exception<Error>(m, "StlrError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ParameterError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  m.def("weight_vector", [](Index n_plus, Index n_minus, double beta) { return pda::weight_vector(n_plus, n_minus, beta).w; },
        py::arg("n_plus"), py::arg("n_minus"), py::arg("beta"));
  m.def("patch_laplacian", py::overload_cast<const Eigen::VectorXd&>(&pda::patch_laplacian), py::arg("w"));
  m.def(
      "aligned_laplacian",
      [](std::vector<Index> relevant, std::vector<Index> irrelevant, double beta, Index n) {
        return pda::align(make_labels(std::move(relevant), std::move(irrelevant)), beta, n).dense();
      },
      py::arg("relevant"), py::arg("irrelevant"), py::arg("beta"), py::arg("n"),
      "Dense N x N alignment matrix L.");

  m.def(
      "pca_target",
      [](const Eigen::MatrixXd& centered, Index d) {
        const auto t = pca::pca_target(centered, d);
        return py::dict(py::arg("scores") = t.scores, py::arg("basis") = t.basis,
                        py::arg("eigvals") = t.eigvals, py::arg("rank") = t.rank);
      },
      py::arg("x"), py::arg("d"));

  m.def(
      "lars",
      [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y, Index k, double lambda_stop, bool lasso) {
        lars::LarsOptions o;
        if (k > 0) o.max_features = k;
        o.lambda_stop = lambda_stop;
        o.lasso_modification = lasso;
        const auto r = lars::lars(x, y, o);
        std::vector<Eigen::VectorXd> coefs;
        std::vector<double> lambdas;
        for (const auto& bp : r.path.breakpoints) {
          coefs.push_back(bp.coef);
          lambdas.push_back(bp.lambda);
        }
        return py::dict(py::arg("coef") = r.coef, py::arg("path") = coefs, py::arg("lambdas") = lambdas,
                        py::arg("stop") = std::string(lars::to_string(r.stop)));
      },
      py::arg("x"), py::arg("y"), py::arg("k") = 0, py::arg("lambda_stop") = 0.0, py::arg("lasso") = true,
      "LARS / lasso path. k = 0 runs the full path.");

  m.def(
      "solve_stl",
      [](const Eigen::MatrixXd& x, std::vector<Index> relevant, std::vector<Index> irrelevant, double alpha,
         double beta, double lambda1, double lambda2, Index d, Index k, Index workers, bool auto_shrink) {
        stl::StlConfig c{alpha, beta, lambda1, lambda2, d, k};
        stl::SolveOptions so;
        so.workers = workers;
        so.auto_shrink_alpha = auto_shrink;
        const FeatureMatrix fm(x, default_ids(x.cols()));
        const auto p = stl::solve_stl(fm, make_labels(std::move(relevant), std::move(irrelevant)), c, so);
        return py::dict(py::arg("u") = p.u, py::arg("nonzeros") = p.nonzeros,
                        py::arg("alpha_prime") = p.alpha_prime, py::arg("alpha_used") = p.alpha_used);
      },
      py::arg("x"), py::arg("relevant"), py::arg("irrelevant"), py::arg("alpha") = 0.0, py::arg("beta") = 1.0,
      py::arg("lambda1") = 0.0, py::arg("lambda2") = 0.0, py::arg("d") = 1, py::arg("k") = 1,
      py::arg("workers") = 1, py::arg("auto_shrink_alpha") = false,
      "Sparse projection U (m x d) for features x (m x N).");

  m.def(
      "bda_subspace",
      [](const Eigen::MatrixXd& x, std::vector<Index> relevant, std::vector<Index> irrelevant, Index d,
         double ridge) {
        const auto s = bda::bda_subspace(x, make_labels(std::move(relevant), std::move(irrelevant)), d, ridge);
        return py::dict(py::arg("u") = s.u, py::arg("eigvals") = s.eigvals, py::arg("degenerate") = s.degenerate);
      },
      py::arg("x"), py::arg("relevant"), py::arg("irrelevant"), py::arg("d"), py::arg("ridge") = 1e-6);

  m.def(
      "relevance_distances",
      [](const Eigen::MatrixXd& y, const std::vector<Index>& relevant, const std::string& metric, double ridge) {
        return rerank::relevance_distances(y, relevant, {rerank::parse_metric(metric), ridge});
      },
      py::arg("y"), py::arg("relevant"), py::arg("metric") = "mahalanobis", py::arg("ridge") = -1.0);

  m.def(
      "rank_by_distance",
      [](const Eigen::VectorXd& dist) {
        const auto list = rerank::rank_by_distance(dist, default_ids(dist.size()));
        std::vector<Index> order;
        for (const auto& e : list.entries) order.push_back(std::stoll(e.shot_id));
        return order;
      },
      py::arg("distances"), "Candidate indices, most relevant first.");

  m.def("average_precision", py::overload_cast<const std::vector<int>&>(&rerank::average_precision),
        py::arg("relevance"), "AP of a 0/1 relevance sequence in rank order.");
  m.def("relative_gain", &rerank::relative_gain, py::arg("map"), py::arg("baseline_map"));

  m.def(
      "synth_query",
      [](std::uint64_t seed, Index n, Index m_dims, Index n_rel, double separation, Index noise_dims) {
        SynthParams p;
        p.seed = seed;
        p.n = n;
        p.m = m_dims;
        p.n_rel = n_rel;
        p.separation = separation;
        p.noise_dims = noise_dims;
        const auto q = synth_query(p);
        std::vector<int> rel;
        for (const auto& id : q.features.shot_ids()) rel.push_back(q.truth.is_relevant(id) ? 1 : 0);
        std::vector<Index> text_order;
        for (const auto& e : q.text_ranking.entries) text_order.push_back(*q.features.index_of(e.shot_id));
        return py::dict(py::arg("x") = q.features.values(), py::arg("relevance") = rel,
                        py::arg("text_order") = text_order);
      },
      py::arg("seed") = 1, py::arg("n") = 500, py::arg("m") = 60, py::arg("n_rel") = 50,
      py::arg("separation") = 4.0, py::arg("noise_dims") = 0);

  m.def(
      "run_spec",
      [](const std::string& spec_json) {
        const auto spec = experiment::spec_from_json(nlohmann::json::parse(spec_json));
        const auto r = experiment::run_experiment(spec);
        return experiment::to_json(r.report).dump();
      },
      py::arg("spec_json"), "Runs an experiment spec given as JSON text; returns the report as JSON text.");

  m.def(
      "reference_suite_map",
      [](const std::string& method) {
        return experiment::run_experiment(experiment::reference_suite(experiment::parse_method(method))).report.map;
      },
      py::arg("method"));
}
