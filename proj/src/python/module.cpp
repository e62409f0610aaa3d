#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "latree/correlation.hpp"
#include "latree/decompose.hpp"
#include "latree/error.hpp"
#include "latree/fit.hpp"
#include "latree/quartet.hpp"
#include "latree/synth.hpp"
#include "latree/tree.hpp"

namespace py = pybind11;

namespace {

// nlohmann::json -> native python objects (dict/list/str/num/bool/None).
// The json module is looked up per call: caching a py::object in static
// storage would destroy it after interpreter finalization and crash at exit.
py::object to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json from_py(const py::object& obj) {
  const py::object dumped = py::module_::import("json").attr("dumps")(obj);
  return nlohmann::json::parse(dumped.cast<std::string>());
}

latree::CorrelationMatrix matrix_from_py(const std::vector<std::vector<double>>& rho,
                                         const std::vector<double>& marginals) {
  const int n = static_cast<int>(rho.size());
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(rho[i].size()) != n)
      throw latree::ShapeError("correlation matrix rows must all have length n");
    for (int j = 0; j < n; ++j) m(i, j) = rho[i][j];
  }
  Eigen::VectorXd p(n);
  if (static_cast<int>(marginals.size()) != n)
    throw latree::ShapeError("need one marginal per variable");
  for (int i = 0; i < n; ++i) p(i) = marginals[i];
  return latree::CorrelationMatrix(std::move(m), std::move(p));
}

std::vector<std::vector<double>> matrix_to_py(const Eigen::MatrixXd& m) {
  std::vector<std::vector<double>> out(m.rows(), std::vector<double>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
  return out;
}

latree::Stage1Config config_from(const std::string& error_mode,
                                 const std::string& tie_policy, double epsilon_tie) {
  latree::Stage1Config cfg;
  cfg.error_mode = latree::error_mode_from_string(error_mode);
  cfg.tie_policy = latree::tie_policy_from_string(tie_policy);
  cfg.epsilon_tie = epsilon_tie;
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
  mod.doc() = "latent binary tree decomposition of pairwise correlations";

  py::register_exception<latree::InputError>(mod, "InputError", PyExc_ValueError);
  py::register_exception<latree::NumericError>(mod, "NumericError", PyExc_ArithmeticError);

  mod.def(
      "compute_correlations",
      [](const std::vector<std::vector<int>>& rows, double laplace) {
        std::vector<std::vector<std::uint8_t>> data;
        data.reserve(rows.size());
        for (const auto& r : rows) {
          std::vector<std::uint8_t> row;
          row.reserve(r.size());
          for (int v : r) {
            if (v != 0 && v != 1)
              throw latree::ShapeError("samples must contain only 0/1");
            row.push_back(static_cast<std::uint8_t>(v));
          }
          data.push_back(std::move(row));
        }
        const latree::CorrelationMatrix m =
            latree::compute_correlations(latree::SampleTable::from_rows(std::move(data)), laplace);
        return py::dict(py::arg("rho") = matrix_to_py(m.matrix()),
                        py::arg("marginals") = std::vector<double>(
                            m.marginals().data(), m.marginals().data() + m.n()));
      },
      py::arg("rows"), py::arg("laplace") = 0.0,
      "Estimate marginals and pairwise correlations from 0/1 sample rows.");

  mod.def(
      "quad_error",
      [](const std::vector<std::vector<double>>& rho, const std::vector<double>& marginals,
         int i, int j, int k, int l) {
        return latree::quad_error(matrix_from_py(rho, marginals), i, j, k, l);
      },
      py::arg("rho"), py::arg("marginals"), py::arg("i"), py::arg("j"), py::arg("k"),
      py::arg("l"), "Tetrad violation of the pairing (i,j)|(k,l).");

  mod.def(
      "decompose",
      [](const std::vector<std::vector<double>>& rho, const std::vector<double>& marginals,
         const std::string& error_mode, const std::string& tie_policy, double epsilon_tie,
         const std::string& simplify) {
        const latree::CorrelationMatrix m = matrix_from_py(rho, marginals);
        const latree::DecomposeResult res =
            latree::decompose(m, config_from(error_mode, tie_policy, epsilon_tie));
        const auto policy = simplify == "flatten"
                                ? latree::DecompTree::Simplify::FlattenAll
                                : latree::DecompTree::Simplify::SuppressDegree2;
        if (simplify != "suppress" && simplify != "flatten")
          throw latree::InputError("simplify must be 'suppress' or 'flatten'");
        py::dict out;
        out["tree"] = to_py(res.tree.simplified(policy).to_json());
        out["raw_tree"] = to_py(res.tree.to_json());
        out["trace"] = to_py(res.trace.to_json());
        return out;
      },
      py::arg("rho"), py::arg("marginals"), py::arg("error_mode") = "max",
      py::arg("tie_policy") = "precedence", py::arg("epsilon_tie") = 1e-12,
      py::arg("simplify") = "suppress",
      "Greedy latent-tree reconstruction; returns tree, raw rooted tree, and trace.");

  mod.def(
      "fit",
      [](const std::vector<std::vector<double>>& rho, const std::vector<double>& marginals,
         const py::object& tree_json, double rho_min) {
        const latree::CorrelationMatrix m = matrix_from_py(rho, marginals);
        const latree::DecompTree tree = latree::DecompTree::from_json(from_py(tree_json));
        return to_py(latree::fit_result_json(latree::fit_tree(m, tree, rho_min), m));
      },
      py::arg("rho"), py::arg("marginals"), py::arg("tree"), py::arg("rho_min") = 1e-6,
      "Estimate edge correlations and hidden-node parameters for a simplified tree.");

  mod.def(
      "star_decompose_3",
      [](const std::vector<std::vector<double>>& rho, const std::vector<double>& marginals) {
        const latree::StarDecomposition s =
            latree::star_decompose_3(matrix_from_py(rho, marginals));
        py::dict out;
        out["tree"] = to_py(s.tree.to_json());
        out["edge_rho"] = std::vector<double>(s.edge_rho.begin(), s.edge_rho.end());
        return out;
      },
      py::arg("rho"), py::arg("marginals"),
      "Closed-form hub decomposition for exactly three variables.");

  mod.def(
      "simulate",
      [](int n, std::uint64_t seed, double rho_lo, double rho_hi, double neg_prob,
         int rows, double eps) {
        latree::GeneratorConfig cfg;
        cfg.rho_lo = rho_lo;
        cfg.rho_hi = rho_hi;
        cfg.neg_prob = neg_prob;
        const latree::GeneratorModel model = latree::generate_model(n, seed, cfg);
        latree::CorrelationMatrix m = latree::exact_matrix(model);
        if (eps > 0.0) m = latree::perturb(m, eps, seed + 1);
        py::dict out;
        out["model"] = to_py(model.to_json());
        out["rho"] = matrix_to_py(m.matrix());
        out["marginals"] =
            std::vector<double>(m.marginals().data(), m.marginals().data() + m.n());
        if (rows > 0) {
          const latree::SampleTable t = latree::sample_data(model, rows, seed + 2);
          std::vector<std::vector<int>> samples(t.rows(), std::vector<int>(t.columns()));
          for (int r = 0; r < t.rows(); ++r)
            for (int c = 0; c < t.columns(); ++c) samples[r][c] = t.at(r, c);
          out["samples"] = std::move(samples);
        }
        return out;
      },
      py::arg("n"), py::arg("seed"), py::arg("rho_lo") = 0.3, py::arg("rho_hi") = 0.9,
      py::arg("neg_prob") = 0.0, py::arg("rows") = 0, py::arg("eps") = 0.0,
      "Draw a random latent-tree model plus its exact matrix and optional samples.");

  mod.def(
      "trees_equivalent",
      [](const py::object& tree_a, const py::object& tree_b) {
        return latree::DecompTree::from_json(from_py(tree_a))
            .equivalent_to(latree::DecompTree::from_json(from_py(tree_b)));
      },
      py::arg("tree_a"), py::arg("tree_b"),
      "Unrooted equivalence: same leaves and same nontrivial splits.");

  mod.def(
      "simplify_tree",
      [](const py::object& tree_json, const std::string& mode) {
        const auto policy = mode == "flatten" ? latree::DecompTree::Simplify::FlattenAll
                                              : latree::DecompTree::Simplify::SuppressDegree2;
        if (mode != "suppress" && mode != "flatten")
          throw latree::InputError("mode must be 'suppress' or 'flatten'");
        return to_py(latree::DecompTree::from_json(from_py(tree_json)).simplified(policy).to_json());
      },
      py::arg("tree"), py::arg("mode") = "suppress",
      "Splice out degree-2 hidden nodes (or flatten to a single hub).");
}
