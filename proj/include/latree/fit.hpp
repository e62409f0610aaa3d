#pragma once

#include <Eigen/Dense>
#include <json.hpp>
#include <utility>
#include <vector>

#include "latree/correlation.hpp"
#include "latree/tree.hpp"

namespace latree {

/// Linear system tying leaf-pair correlations to edge correlations of a
/// simplified tree: along the path between leaves i and j the edge
/// correlations multiply, so  sum_e on path  log|rho_e| = log|rho_ij|.
/// Rows whose |rho_ij| falls below rho_min are excluded (their logs would
/// dominate the fit with noise).
struct PathSystem {
  DecompTree tree;
  std::vector<std::pair<int, int>> edges;     // canonical (min id, max id)
  std::vector<std::pair<int, int>> rows;      // included leaf-var pairs, i < j
  std::vector<std::pair<int, int>> excluded;  // pairs dropped by rho_min
  Eigen::MatrixXd incidence;                  // rows x edges, 0/1
  Eigen::VectorXd log_abs_rho;                // per included row
  std::vector<int> sign_rho;                  // +-1 per included row
};

/// Build the system. The tree must be simplified (every hidden node of
/// undirected degree >= 3; throws TreeNotSimplifiedError otherwise) and its
/// leaf variables must be exactly 0..n-1 for the matrix's n. Throws
/// CorrelationTooSmallError if exclusions leave fewer rows than edges.
PathSystem build_path_system(const CorrelationMatrix& m, const DecompTree& tree,
                             double rho_min = 1e-6);

struct EdgeSolution {
  std::vector<double> log_abs;  // per edge, least-squares solution
  std::vector<int> sign;        // per edge, +-1 (empty until signs are solved)
  std::vector<double> rho;      // sign * exp(log_abs)
  double residual_norm = 0.0;   // ||incidence * x - b||_2

  // sign reconstruction diagnostics
  int sign_violations = 0;      // leaf pairs whose sign product disagrees
  bool sign_consistent = true;
  std::vector<int> magnitude_violations;  // edges with |rho| > 1
};

/// Least-squares magnitudes for all edges. Throws SingularSystemError when
/// the incidence matrix is rank-deficient (paths cannot identify the edges).
EdgeSolution solve_edge_magnitudes(const PathSystem& sys);

/// Recover edge signs from the leaf-pair sign pattern. Factorizes the sign
/// matrix as s_ij = tau_i * tau_j over the included rows (BFS over the sign
/// graph; disagreements are counted, then reduced by single-flip descent,
/// never fatal), assigns each tree node a +-1 potential -- leaves fixed to
/// tau, hidden nodes chosen by exact tree DP minimizing the number of
/// negative edges, ties resolved toward positive potentials in increasing
/// node-id order -- and sets sign_e = potential_u * potential_v.
EdgeSolution solve_edge_signs(const PathSystem& sys, EdgeSolution sol);

/// Correlations between each leaf variable and each hidden node: the
/// product of edge correlations along the connecting path.
struct LeafHiddenTable {
  std::vector<int> leaves;  // leaf variables, ascending
  std::vector<int> hidden;  // hidden node ids, ascending
  Eigen::MatrixXd rho;      // leaves.size() x hidden.size()
};
LeafHiddenTable leaf_hidden_correlations(const PathSystem& sys, const EdgeSolution& sol);

struct FitConfig {
  int grid = 512;          // initial 1-D grid resolution over the prior
  int refine_brackets = 4; // local minima refined by golden-section search
  int refine_iters = 80;
  double zero_tol = 1e-10; // total squared residual treated as exact fit
};

/// Bernoulli parameters for each hidden node: prior p(w=1) and per-leaf
/// conditionals p(x_i=1 | w=1), chosen to reproduce the leaf-hidden
/// correlations as closely as possible under [0,1] constraints.
///
/// The correlation targets never pin the prior down alone: whenever an
/// exact fit exists it exists for an interval of priors. We report the
/// canonical prior (0.5 when feasible, else the feasible value nearest it)
/// and the exact-fit interval in `prior_interval` (NaNs when the best fit
/// is inexact and the interval is empty).
struct NodeParameters {
  std::vector<int> hidden;
  std::vector<double> prior;
  std::vector<std::pair<double, double>> prior_interval;
  Eigen::MatrixXd conditional;       // leaves x hidden
  std::vector<double> node_residual; // squared residual per hidden node
  double fit_residual = 0.0;         // total squared residual
};
NodeParameters fit_node_parameters(const CorrelationMatrix& m, const LeafHiddenTable& lh,
                                   const FitConfig& cfg = {});

/// Leaf-pair correlations implied by the fitted edge correlations
/// (path products). Indexed by leaf variable.
Eigen::MatrixXd reconstruct_correlations(const PathSystem& sys, const EdgeSolution& sol);

/// Convenience driver chaining the four steps above.
struct FitResult {
  PathSystem system;
  EdgeSolution edges;
  LeafHiddenTable leaf_hidden;
  NodeParameters params;
  Eigen::MatrixXd reconstructed;
  double max_reconstruction_error = 0.0;  // max |reconstructed - input| off-diagonal
};
FitResult fit_tree(const CorrelationMatrix& m, const DecompTree& simplified_tree,
                   double rho_min = 1e-6, const FitConfig& cfg = {});

/// Full parameter report: tree, per-edge correlations, per-hidden-node
/// Bernoulli parameters, and fit diagnostics (residuals, sign consistency,
/// worst reconstruction and quartet errors, excluded pairs).
nlohmann::json fit_result_json(const FitResult& fr, const CorrelationMatrix& m);

}  // namespace latree
