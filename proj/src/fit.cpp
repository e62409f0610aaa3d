#include "latree/fit.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>

#include "latree/error.hpp"
#include "latree/quartet.hpp"
#include "latree/util.hpp"

namespace latree {

namespace {

std::map<int, int> leaf_node_by_var(const DecompTree& tree) {
  std::map<int, int> out;
  for (int id : tree.node_ids()) {
    const auto& nd = tree.node(id);
    if (nd.leaf) out[nd.var] = id;
  }
  return out;
}

std::vector<int> path_edges(const DecompTree& tree,
                            const std::map<std::pair<int, int>, int>& edge_index,
                            int node_a, int node_b) {
  const std::vector<int> nodes = tree.path(node_a, node_b);
  std::vector<int> out;
  out.reserve(nodes.size() - 1);
  for (std::size_t k = 0; k + 1 < nodes.size(); ++k) {
    const int u = std::min(nodes[k], nodes[k + 1]);
    const int v = std::max(nodes[k], nodes[k + 1]);
    out.push_back(edge_index.at({u, v}));
  }
  return out;
}

}  // namespace

PathSystem build_path_system(const CorrelationMatrix& m, const DecompTree& tree,
                             double rho_min) {
  if (rho_min < 0) throw InputError("rho_min must be >= 0");
  const int n = m.n();
  const std::vector<int> vars = tree.leaf_vars();
  if (static_cast<int>(vars.size()) != n)
    throw ShapeError("tree has " + std::to_string(vars.size()) +
                     " leaves but matrix has " + std::to_string(n) + " variables");
  for (int i = 0; i < n; ++i)
    if (vars[i] != i)
      throw ShapeError("tree leaf variables must be exactly 0.." +
                       std::to_string(n - 1));
  for (int id : tree.node_ids()) {
    const auto& nd = tree.node(id);
    if (!nd.leaf && tree.undirected_degree(id) < 3)
      throw TreeNotSimplifiedError("hidden node " + std::to_string(id) +
                                   " has degree " +
                                   std::to_string(tree.undirected_degree(id)) +
                                   "; simplify the tree first");
  }

  PathSystem sys;
  sys.tree = tree;
  for (const auto& [p, c] : tree.edge_list())
    sys.edges.emplace_back(std::min(p, c), std::max(p, c));
  std::sort(sys.edges.begin(), sys.edges.end());
  std::map<std::pair<int, int>, int> edge_index;
  for (std::size_t e = 0; e < sys.edges.size(); ++e) edge_index[sys.edges[e]] = e;
  const std::map<int, int> leaf_node = leaf_node_by_var(tree);

  std::vector<Eigen::VectorXd> rows;
  std::vector<double> b;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double r = m.rho(i, j);
      if (std::abs(r) < rho_min) {
        sys.excluded.emplace_back(i, j);
        continue;
      }
      Eigen::VectorXd row = Eigen::VectorXd::Zero(sys.edges.size());
      for (int e : path_edges(tree, edge_index, leaf_node.at(i), leaf_node.at(j)))
        row(e) = 1.0;
      rows.push_back(std::move(row));
      b.push_back(std::log(std::abs(r)));
      sys.rows.emplace_back(i, j);
      sys.sign_rho.push_back(r > 0 ? 1 : -1);
    }

  if (rows.size() < sys.edges.size())
    throw CorrelationTooSmallError(
        "only " + std::to_string(rows.size()) + " leaf pairs have |rho| >= " +
        util::format_double(rho_min) + ", fewer than the " +
        std::to_string(sys.edges.size()) + " edges to estimate");

  sys.incidence.resize(static_cast<Eigen::Index>(rows.size()),
                       static_cast<Eigen::Index>(sys.edges.size()));
  sys.log_abs_rho.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    sys.incidence.row(static_cast<Eigen::Index>(r)) = rows[r];
    sys.log_abs_rho(static_cast<Eigen::Index>(r)) = b[r];
  }
  return sys;
}

EdgeSolution solve_edge_magnitudes(const PathSystem& sys) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sys.incidence);
  if (qr.rank() < static_cast<Eigen::Index>(sys.edges.size()))
    throw SingularSystemError(
        "path incidence matrix has rank " + std::to_string(qr.rank()) + " < " +
        std::to_string(sys.edges.size()) +
        " edges; the retained leaf pairs cannot identify every edge");
  const Eigen::VectorXd x = qr.solve(sys.log_abs_rho);
  EdgeSolution sol;
  sol.log_abs.assign(x.data(), x.data() + x.size());
  sol.residual_norm = (sys.incidence * x - sys.log_abs_rho).norm();
  sol.rho.resize(sol.log_abs.size());
  for (std::size_t e = 0; e < sol.log_abs.size(); ++e) {
    sol.rho[e] = std::exp(sol.log_abs[e]);
    if (sol.rho[e] > 1.0 + 1e-9) sol.magnitude_violations.push_back(static_cast<int>(e));
  }
  return sol;
}

namespace {

// Minimum number of negative edges over +-1 node potentials, leaves pinned
// to tau and any node in `fixed` pinned to its value. Exact tree DP.
int min_negative_edges(const DecompTree& tree, const std::map<int, int>& pinned) {
  constexpr int kInf = 1 << 20;
  // children before parents
  std::vector<int> order;
  std::deque<int> queue{tree.root()};
  while (!queue.empty()) {
    int id = queue.front();
    queue.pop_front();
    order.push_back(id);
    for (int c : tree.node(id).children) queue.push_back(c);
  }
  std::map<int, std::array<int, 2>> cost;  // [s == -1, s == +1]
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const int id = *it;
    std::array<int, 2> c{0, 0};
    auto pin = pinned.find(id);
    if (pin != pinned.end()) c[pin->second > 0 ? 0 : 1] = kInf;
    for (int ch : tree.node(id).children) {
      const auto& cc = cost.at(ch);  // [child=-1, child=+1]
      c[0] += std::min(cc[0], cc[1] + 1);  // this node -1: opposite child costs 1
      c[1] += std::min(cc[0] + 1, cc[1]);  // this node +1: opposite child costs 1
      c[0] = std::min(c[0], kInf);
      c[1] = std::min(c[1], kInf);
    }
    cost[id] = c;
  }
  const auto& rc = cost.at(tree.root());
  return std::min(rc[0], rc[1]);
}

}  // namespace

EdgeSolution solve_edge_signs(const PathSystem& sys, EdgeSolution sol) {
  const int n = static_cast<int>(sys.tree.leaf_vars().size());
  // tau_i per leaf variable from s_ij = tau_i * tau_j over included rows.
  std::vector<std::vector<std::pair<int, int>>> graph(n);  // var -> (var, sign)
  for (std::size_t r = 0; r < sys.rows.size(); ++r) {
    const auto [i, j] = sys.rows[r];
    graph[i].emplace_back(j, sys.sign_rho[r]);
    graph[j].emplace_back(i, sys.sign_rho[r]);
  }
  std::vector<int> tau(n, 0);
  for (int start = 0; start < n; ++start) {
    if (tau[start] != 0) continue;
    tau[start] = 1;  // gauge: first variable of each component is positive
    std::deque<int> queue{start};
    while (!queue.empty()) {
      const int v = queue.front();
      queue.pop_front();
      for (const auto& [u, s] : graph[v])
        if (tau[u] == 0) {
          tau[u] = tau[v] * s;
          queue.push_back(u);
        }
    }
  }
  auto count_violations = [&] {
    int c = 0;
    for (std::size_t r = 0; r < sys.rows.size(); ++r)
      if (tau[sys.rows[r].first] * tau[sys.rows[r].second] != sys.sign_rho[r]) ++c;
    return c;
  };
  int violations = count_violations();
  if (violations > 0) {
    // Noisy signs: reduce disagreements by deterministic single-flip descent.
    bool improved = true;
    while (improved && violations > 0) {
      improved = false;
      for (int v = 0; v < n; ++v) {
        int delta = 0;
        for (const auto& [u, s] : graph[v]) {
          const int before = (tau[v] * tau[u] != s) ? 1 : 0;
          const int after = (-tau[v] * tau[u] != s) ? 1 : 0;
          delta += after - before;
        }
        if (delta < 0) {
          tau[v] = -tau[v];
          violations += delta;
          improved = true;
        }
      }
    }
  }
  sol.sign_violations = violations;
  sol.sign_consistent = violations == 0;

  // Node potentials: leaves pinned to tau, hidden nodes minimizing negative
  // edges; remaining freedom resolved toward +1 in increasing node-id order.
  std::map<int, int> pinned;
  const std::map<int, int> leaf_node = leaf_node_by_var(sys.tree);
  for (const auto& [var, node] : leaf_node) pinned[node] = tau[var];
  const int base = min_negative_edges(sys.tree, pinned);
  std::vector<int> hidden_ids;
  for (int id : sys.tree.node_ids())
    if (!sys.tree.node(id).leaf) hidden_ids.push_back(id);
  std::map<int, int> potential;
  for (const auto& [node, s] : pinned) potential[node] = s;
  for (int id : hidden_ids) {
    pinned[id] = 1;
    if (min_negative_edges(sys.tree, pinned) == base) {
      potential[id] = 1;
    } else {
      pinned[id] = -1;
      potential[id] = -1;
    }
  }

  sol.sign.resize(sys.edges.size());
  for (std::size_t e = 0; e < sys.edges.size(); ++e)
    sol.sign[e] = potential.at(sys.edges[e].first) * potential.at(sys.edges[e].second);
  sol.rho.resize(sol.log_abs.size());
  for (std::size_t e = 0; e < sol.log_abs.size(); ++e)
    sol.rho[e] = sol.sign[e] * std::exp(sol.log_abs[e]);
  return sol;
}

LeafHiddenTable leaf_hidden_correlations(const PathSystem& sys, const EdgeSolution& sol) {
  if (sol.rho.size() != sys.edges.size())
    throw ShapeError("edge solution does not match the path system");
  std::map<std::pair<int, int>, int> edge_index;
  for (std::size_t e = 0; e < sys.edges.size(); ++e) edge_index[sys.edges[e]] = e;
  const std::map<int, int> leaf_node = leaf_node_by_var(sys.tree);

  LeafHiddenTable lh;
  for (const auto& [var, node] : leaf_node) lh.leaves.push_back(var);
  for (int id : sys.tree.node_ids())
    if (!sys.tree.node(id).leaf) lh.hidden.push_back(id);
  lh.rho.resize(static_cast<Eigen::Index>(lh.leaves.size()),
                static_cast<Eigen::Index>(lh.hidden.size()));
  for (std::size_t a = 0; a < lh.leaves.size(); ++a)
    for (std::size_t h = 0; h < lh.hidden.size(); ++h) {
      double prod = 1.0;
      for (int e : path_edges(sys.tree, edge_index, leaf_node.at(lh.leaves[a]),
                              lh.hidden[h]))
        prod *= sol.rho[e];
      lh.rho(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(h)) = prod;
    }
  return lh;
}

namespace {

struct ProfileFit {
  double prior = 0.5;
  double objective = 0.0;
  std::pair<double, double> interval{std::numeric_limits<double>::quiet_NaN(),
                                     std::numeric_limits<double>::quiet_NaN()};
  std::vector<double> conditional;
};

// Squared residual of the best conditionals for a fixed prior. For each
// leaf the unconstrained optimum p(x=1|w=1) = p_i + r_i * s_i * t with
// t = sqrt((1-pw)/pw) reproduces r_i exactly; clamping to [0,1] is the only
// source of residual.
double profile_objective(const std::vector<double>& p, const std::vector<double>& s,
                         const std::vector<double>& r, double pw,
                         std::vector<double>* conditional) {
  const double t = std::sqrt((1.0 - pw) / pw);
  double obj = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double c = p[i] + r[i] * s[i] * t;
    if (c < 0.0) c = 0.0;
    if (c > 1.0) c = 1.0;
    const double resid = (c - p[i]) / (s[i] * t) - r[i];
    obj += resid * resid;
    if (conditional) (*conditional)[i] = c;
  }
  return obj;
}

ProfileFit fit_one_hidden(const std::vector<double>& p, const std::vector<double>& s,
                          const std::vector<double>& r, const FitConfig& cfg) {
  if (cfg.grid < 8) throw InputError("fit grid must be >= 8");
  ProfileFit out;
  out.conditional.resize(p.size());

  // Exact-fit interval from the clamp constraints: residual is 0 iff
  // t <= (1-p_i)/(r_i s_i) for r_i > 0 and t <= p_i/(-r_i s_i) for r_i < 0.
  double t_max = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (r[i] > 0) t_max = std::min(t_max, (1.0 - p[i]) / (r[i] * s[i]));
    else if (r[i] < 0) t_max = std::min(t_max, p[i] / (-r[i] * s[i]));
  }
  if (std::isinf(t_max)) {  // all targets zero: any prior fits exactly
    out.interval = {0.0, 1.0};
    out.objective = profile_objective(p, s, r, out.prior, &out.conditional);
    return out;
  }
  if (t_max > 0) {
    const double p_low = 1.0 / (1.0 + t_max * t_max);
    double probe = std::max(0.5, p_low);
    if (probe >= 1.0) probe = 1.0 - 1e-12;
    if (profile_objective(p, s, r, probe, nullptr) <= cfg.zero_tol) {
      out.interval = {p_low, 1.0};
      out.prior = probe;
      out.objective = profile_objective(p, s, r, out.prior, &out.conditional);
      return out;
    }
  }

  // No exact fit: 1-D grid over the prior plus golden-section refinement of
  // the best local minima (multi-start).
  const int g = cfg.grid;
  std::vector<double> value(g);
  for (int k = 0; k < g; ++k)
    value[k] = profile_objective(p, s, r, (k + 1.0) / (g + 1.0), nullptr);
  std::vector<int> minima;
  for (int k = 0; k < g; ++k) {
    const double left = k > 0 ? value[k - 1] : std::numeric_limits<double>::infinity();
    const double right = k + 1 < g ? value[k + 1] : std::numeric_limits<double>::infinity();
    if (value[k] <= left && value[k] <= right) minima.push_back(k);
  }
  std::sort(minima.begin(), minima.end(),
            [&](int a, int b) { return value[a] != value[b] ? value[a] < value[b] : a < b; });
  if (static_cast<int>(minima.size()) > cfg.refine_brackets)
    minima.resize(cfg.refine_brackets);

  double best_p = 0.5;
  double best_obj = std::numeric_limits<double>::infinity();
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int k : minima) {
    double lo = static_cast<double>(k) / (g + 1.0);
    double hi = (k + 2.0) / (g + 1.0);
    if (lo <= 0.0) lo = 1e-12;
    if (hi >= 1.0) hi = 1.0 - 1e-12;
    double x1 = hi - inv_phi * (hi - lo);
    double x2 = lo + inv_phi * (hi - lo);
    double f1 = profile_objective(p, s, r, x1, nullptr);
    double f2 = profile_objective(p, s, r, x2, nullptr);
    for (int it = 0; it < cfg.refine_iters; ++it) {
      if (f1 <= f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - inv_phi * (hi - lo);
        f1 = profile_objective(p, s, r, x1, nullptr);
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + inv_phi * (hi - lo);
        f2 = profile_objective(p, s, r, x2, nullptr);
      }
    }
    const double px = f1 <= f2 ? x1 : x2;
    const double fx = std::min(f1, f2);
    if (fx < best_obj) {
      best_obj = fx;
      best_p = px;
    }
  }
  if (!std::isfinite(best_obj))
    throw FitNotConvergedError("prior search found no finite objective value");

  if (best_obj <= cfg.zero_tol && t_max > 0) {
    // Grid found an exact fit the probe missed: report the analytic interval.
    const double p_low = 1.0 / (1.0 + t_max * t_max);
    out.interval = {p_low, 1.0};
    out.prior = std::max(0.5, p_low);
  } else {
    out.prior = best_p;
  }
  out.objective = profile_objective(p, s, r, out.prior, &out.conditional);
  return out;
}

}  // namespace

NodeParameters fit_node_parameters(const CorrelationMatrix& m, const LeafHiddenTable& lh,
                                   const FitConfig& cfg) {
  const std::size_t nl = lh.leaves.size();
  const std::size_t nh = lh.hidden.size();
  if (lh.rho.rows() != static_cast<Eigen::Index>(nl) ||
      lh.rho.cols() != static_cast<Eigen::Index>(nh))
    throw ShapeError("leaf/hidden table shape mismatch");

  std::vector<double> p(nl), s(nl);
  for (std::size_t i = 0; i < nl; ++i) {
    p[i] = m.marginal(lh.leaves[i]);
    s[i] = std::sqrt(p[i] * (1.0 - p[i]));
  }

  NodeParameters out;
  out.hidden = lh.hidden;
  out.prior.resize(nh);
  out.prior_interval.resize(nh);
  out.node_residual.resize(nh);
  out.conditional.resize(static_cast<Eigen::Index>(nl), static_cast<Eigen::Index>(nh));

  std::vector<ProfileFit> fits(nh);
  util::parallel_for(nh, [&](std::size_t h) {
    std::vector<double> r(nl);
    for (std::size_t i = 0; i < nl; ++i)
      r[i] = lh.rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(h));
    fits[h] = fit_one_hidden(p, s, r, cfg);
  });

  for (std::size_t h = 0; h < nh; ++h) {
    out.prior[h] = fits[h].prior;
    out.prior_interval[h] = fits[h].interval;
    out.node_residual[h] = fits[h].objective;
    out.fit_residual += fits[h].objective;
    for (std::size_t i = 0; i < nl; ++i)
      out.conditional(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(h)) =
          fits[h].conditional[i];
  }
  return out;
}

Eigen::MatrixXd reconstruct_correlations(const PathSystem& sys, const EdgeSolution& sol) {
  if (sol.rho.size() != sys.edges.size())
    throw ShapeError("edge solution does not match the path system");
  const std::vector<int> vars = sys.tree.leaf_vars();
  const int n = static_cast<int>(vars.size());
  std::map<std::pair<int, int>, int> edge_index;
  for (std::size_t e = 0; e < sys.edges.size(); ++e) edge_index[sys.edges[e]] = e;
  const std::map<int, int> leaf_node = leaf_node_by_var(sys.tree);
  Eigen::MatrixXd out = Eigen::MatrixXd::Identity(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double prod = 1.0;
      for (int e : path_edges(sys.tree, edge_index, leaf_node.at(i), leaf_node.at(j)))
        prod *= sol.rho[e];
      out(i, j) = out(j, i) = prod;
    }
  return out;
}

nlohmann::json fit_result_json(const FitResult& fr, const CorrelationMatrix& m) {
  nlohmann::json jedges = nlohmann::json::array();
  for (std::size_t e = 0; e < fr.system.edges.size(); ++e) {
    jedges.push_back({{"u", fr.system.edges[e].first},
                      {"v", fr.system.edges[e].second},
                      {"rho", fr.edges.rho[e]},
                      {"log_abs", fr.edges.log_abs[e]},
                      {"sign", fr.edges.sign.empty() ? 1 : fr.edges.sign[e]}});
  }
  nlohmann::json jhidden = nlohmann::json::array();
  for (std::size_t h = 0; h < fr.params.hidden.size(); ++h) {
    nlohmann::json jh;
    jh["id"] = fr.params.hidden[h];
    jh["prior"] = fr.params.prior[h];
    const auto [lo, hi] = fr.params.prior_interval[h];
    if (std::isfinite(lo) && std::isfinite(hi)) jh["prior_interval"] = {lo, hi};
    jh["fit_residual"] = fr.params.node_residual[h];
    nlohmann::json jc = nlohmann::json::array();
    for (std::size_t i = 0; i < fr.leaf_hidden.leaves.size(); ++i)
      jc.push_back({{"leaf", fr.leaf_hidden.leaves[i]},
                    {"p", fr.params.conditional(static_cast<Eigen::Index>(i),
                                                static_cast<Eigen::Index>(h))}});
    jh["conditional"] = std::move(jc);
    jhidden.push_back(std::move(jh));
  }
  nlohmann::json jexcluded = nlohmann::json::array();
  for (const auto& [i, j] : fr.system.excluded) jexcluded.push_back({i, j});
  nlohmann::json diagnostics{
      {"residual_norm", fr.edges.residual_norm},
      {"fit_residual", fr.params.fit_residual},
      {"sign_violations", fr.edges.sign_violations},
      {"sign_consistent", fr.edges.sign_consistent},
      {"max_reconstruction_error", fr.max_reconstruction_error},
      {"max_quartet_error", tree_max_quad_error(m, fr.system.tree)},
      {"excluded_pairs", std::move(jexcluded)},
      {"edge_magnitude_violations", fr.edges.magnitude_violations},
  };
  std::vector<double> marginals(m.marginals().data(), m.marginals().data() + m.n());
  return nlohmann::json{{"tree", fr.system.tree.to_json()},
                        {"edges", std::move(jedges)},
                        {"hidden", std::move(jhidden)},
                        {"diagnostics", std::move(diagnostics)},
                        {"leaf_marginals", std::move(marginals)}};
}

FitResult fit_tree(const CorrelationMatrix& m, const DecompTree& simplified_tree,
                   double rho_min, const FitConfig& cfg) {
  FitResult fr;
  fr.system = build_path_system(m, simplified_tree, rho_min);
  fr.edges = solve_edge_signs(fr.system, solve_edge_magnitudes(fr.system));
  fr.leaf_hidden = leaf_hidden_correlations(fr.system, fr.edges);
  fr.params = fit_node_parameters(m, fr.leaf_hidden, cfg);
  fr.reconstructed = reconstruct_correlations(fr.system, fr.edges);
  for (int i = 0; i < m.n(); ++i)
    for (int j = i + 1; j < m.n(); ++j)
      fr.max_reconstruction_error =
          std::max(fr.max_reconstruction_error, std::abs(fr.reconstructed(i, j) - m.rho(i, j)));
  return fr;
}

}  // namespace latree
