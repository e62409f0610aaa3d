#include "latree/synth.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <random>

#include "latree/error.hpp"
#include "latree/quartet.hpp"

namespace latree {

namespace {

// Engine-only randomness: std::*_distribution output is implementation
// defined, so derive values from raw mt19937_64 words to keep every draw
// reproducible across standard libraries.
struct Rng {
  std::mt19937_64 eng;
  explicit Rng(std::uint64_t seed) : eng(seed) {}
  double unit() { return (eng() >> 11) * (1.0 / 9007199254740992.0); }  // [0, 1)
  double real(double lo, double hi) { return lo + (hi - lo) * unit(); }
  std::size_t index(std::size_t bound) { return static_cast<std::size_t>(eng() % bound); }
};

using EdgeList = std::vector<std::pair<int, int>>;

// Leaves {0,1,2} joined at hidden node n; hidden ids grow from there.
EdgeList initial_topology(int n) {
  return {{0, n}, {1, n}, {2, n}};
}

// Subdivide edge `e` with a fresh hidden node and hang leaf k off it.
void attach_leaf(EdgeList& edges, std::size_t e, int leaf, int hidden) {
  const auto [u, v] = edges[e];
  edges[e] = {u, hidden};
  edges.push_back({hidden, v});
  edges.push_back({hidden, leaf});
}

DecompTree tree_from_edges(const EdgeList& edges, int n) {
  std::map<int, std::vector<int>> adj;
  for (const auto& [u, v] : edges) {
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  std::map<int, int> leaf_var;
  for (int i = 0; i < n; ++i) leaf_var[i] = i;
  return tree_from_adjacency(adj, leaf_var, n);  // smallest hidden id is n
}

// Hop distances between all leaves of a tree (unit edge lengths).
std::vector<std::vector<int>> leaf_distances(const DecompTree& tree,
                                             const std::vector<int>& vars) {
  std::map<int, int> var_node;
  for (int id : tree.node_ids()) {
    const auto& nd = tree.node(id);
    if (nd.leaf) var_node[nd.var] = id;
  }
  std::map<int, std::vector<int>> adj;
  for (const auto& [p, c] : tree.edge_list()) {
    adj[p].push_back(c);
    adj[c].push_back(p);
  }
  std::vector<std::vector<int>> dist(vars.size(), std::vector<int>(vars.size(), 0));
  for (std::size_t a = 0; a < vars.size(); ++a) {
    std::map<int, int> hops{{var_node[vars[a]], 0}};
    std::deque<int> queue{var_node[vars[a]]};
    while (!queue.empty()) {
      const int cur = queue.front();
      queue.pop_front();
      for (int nb : adj[cur])
        if (!hops.count(nb)) {
          hops[nb] = hops[cur] + 1;
          queue.push_back(nb);
        }
    }
    for (std::size_t b = 0; b < vars.size(); ++b) dist[a][b] = hops[var_node[vars[b]]];
  }
  return dist;
}

}  // namespace

double topology_score(const CorrelationMatrix& m, const DecompTree& tree) {
  const std::vector<int> vars = tree.leaf_vars();
  const int k = static_cast<int>(vars.size());
  if (k < 4) return 0.0;
  const auto dist = leaf_distances(tree, vars);
  auto quad = [&](int i, int j, int a, int b) {
    return std::abs(m.rho(i, a) * m.rho(j, b) - m.rho(i, b) * m.rho(j, a));
  };
  double total = 0.0;
  for (int a = 0; a < k; ++a)
    for (int b = a + 1; b < k; ++b)
      for (int c = b + 1; c < k; ++c)
        for (int d = c + 1; d < k; ++d) {
          const int s_ab = dist[a][b] + dist[c][d];
          const int s_ac = dist[a][c] + dist[b][d];
          const int s_ad = dist[a][d] + dist[b][c];
          const int smin = std::min({s_ab, s_ac, s_ad});
          // Binary trees resolve each quartet uniquely; ties (star-like
          // nodes) assert every tied pairing, so all of them count.
          if (s_ab == smin) total += quad(vars[a], vars[b], vars[c], vars[d]);
          if (s_ac == smin) total += quad(vars[a], vars[c], vars[b], vars[d]);
          if (s_ad == smin) total += quad(vars[a], vars[d], vars[b], vars[c]);
        }
  return total;
}

GeneratorModel generate_model(int n, std::uint64_t seed, const GeneratorConfig& cfg) {
  if (n < 3) throw TooSmallError("model generation needs n >= 3");
  if (!(cfg.rho_lo >= 0.0) || !(cfg.rho_hi >= cfg.rho_lo) || !(cfg.rho_hi < 1.0))
    throw OutOfRangeError("edge magnitude range must satisfy 0 <= lo <= hi < 1");
  if (!(cfg.neg_prob >= 0.0) || !(cfg.neg_prob <= 1.0))
    throw OutOfRangeError("neg_prob must lie in [0, 1]");

  Rng rng(seed);
  GeneratorModel model;
  model.n = n;
  model.seed = seed;

  // 1. Topology: uniform over labeled unrooted binary trees by attaching
  //    each new leaf to a uniformly random existing edge.
  EdgeList edges = initial_topology(n);
  for (int leaf = 3; leaf < n; ++leaf)
    attach_leaf(edges, rng.index(edges.size()), leaf, n + leaf - 2);
  model.tree = tree_from_edges(edges, n);
  for (const auto& [u, v] : edges) model.edges.emplace_back(std::min(u, v), std::max(u, v));
  std::sort(model.edges.begin(), model.edges.end());

  // 2. Edge correlations, drawn in canonical edge order.
  model.edge_rho.reserve(model.edges.size());
  for (std::size_t e = 0; e < model.edges.size(); ++e) {
    double r = rng.real(cfg.rho_lo, cfg.rho_hi);
    if (cfg.neg_prob > 0.0 && rng.unit() < cfg.neg_prob) r = -r;
    model.edge_rho.push_back(r);
  }
  std::map<std::pair<int, int>, double> rho_of;
  for (std::size_t e = 0; e < model.edges.size(); ++e) rho_of[model.edges[e]] = model.edge_rho[e];

  // 3. Marginals, root first then down the tree, each child constrained so
  //    both conditionals are valid probabilities.
  const int root = model.tree.root();
  model.marginal[root] = rng.real(0.2, 0.8);
  std::deque<int> queue{root};
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    const double pa = model.marginal.at(u);
    const double sa = std::sqrt(pa * (1.0 - pa));
    for (int c : model.tree.node(u).children) {
      const double r = rho_of.at({std::min(u, c), std::max(u, c)});
      double pb = 0.0, cond1 = 0.0, cond0 = 0.0;
      bool ok = false;
      for (int attempt = 0; attempt < 50 && !ok; ++attempt) {
        pb = rng.real(0.2, 0.8);
        const double p11 = pa * pb + r * sa * std::sqrt(pb * (1.0 - pb));
        cond1 = p11 / pa;
        cond0 = (pb - p11) / (1.0 - pa);
        ok = cond1 > 1e-9 && cond1 < 1.0 - 1e-9 && cond0 > 1e-9 && cond0 < 1.0 - 1e-9;
      }
      if (!ok) {
        // Always-feasible fallback: match (or mirror) the parent marginal.
        pb = r >= 0 ? pa : 1.0 - pa;
        const double p11 = pa * pb + r * sa * std::sqrt(pb * (1.0 - pb));
        cond1 = p11 / pa;
        cond0 = (pb - p11) / (1.0 - pa);
      }
      model.marginal[c] = pb;
      model.conditional[{u, c}] = {cond1, cond0};
      queue.push_back(c);
    }
  }
  return model;
}

CorrelationMatrix exact_matrix(const GeneratorModel& model) {
  const int n = model.n;
  std::map<std::pair<int, int>, double> rho_of;
  for (std::size_t e = 0; e < model.edges.size(); ++e) rho_of[model.edges[e]] = model.edge_rho[e];
  Eigen::MatrixXd rho = Eigen::MatrixXd::Identity(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const std::vector<int> path = model.tree.path(i, j);
      double prod = 1.0;
      for (std::size_t k = 0; k + 1 < path.size(); ++k)
        prod *= rho_of.at({std::min(path[k], path[k + 1]), std::max(path[k], path[k + 1])});
      rho(i, j) = rho(j, i) = prod;
    }
  Eigen::VectorXd p(n);
  for (int i = 0; i < n; ++i) p(i) = model.marginal.at(i);
  return CorrelationMatrix(std::move(rho), std::move(p));
}

SampleTable sample_data(const GeneratorModel& model, int rows, std::uint64_t seed) {
  if (rows < 1) throw TooSmallError("sample_data needs rows >= 1");
  Rng rng(seed);
  // Fixed ancestral order: parents before children.
  std::vector<int> order;
  std::deque<int> queue{model.tree.root()};
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    order.push_back(u);
    for (int c : model.tree.node(u).children) queue.push_back(c);
  }
  std::vector<std::vector<std::uint8_t>> out;
  out.reserve(rows);
  std::map<int, std::uint8_t> value;
  for (int r = 0; r < rows; ++r) {
    for (int id : order) {
      double p;
      if (id == model.tree.root()) {
        p = model.marginal.at(id);
      } else {
        const int parent = model.tree.node(id).parent;
        const auto& [c1, c0] = model.conditional.at({parent, id});
        p = value.at(parent) ? c1 : c0;
      }
      value[id] = rng.unit() < p ? 1 : 0;
    }
    std::vector<std::uint8_t> row(model.n);
    for (int i = 0; i < model.n; ++i) row[i] = value.at(i);
    out.push_back(std::move(row));
  }
  return SampleTable::from_rows(std::move(out));
}

CorrelationMatrix perturb(const CorrelationMatrix& m, double eps, std::uint64_t seed) {
  if (eps < 0) throw InputError("perturbation eps must be >= 0");
  Rng rng(seed);
  Eigen::MatrixXd rho = m.matrix();
  const int n = m.n();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double u = rng.real(-1.0, 1.0);  // k-th pair uses the k-th draw
      double v = rho(i, j) + eps * u;
      if (v > 1.0) v = 1.0;
      if (v < -1.0) v = -1.0;
      rho(i, j) = rho(j, i) = v;
    }
  return CorrelationMatrix(std::move(rho), m.marginals());
}

DecompTree exhaustive_best_tree(const CorrelationMatrix& m, std::uint64_t* scanned) {
  const int n = m.n();
  if (n < 3) throw TooSmallError("exhaustive search needs n >= 3");
  if (n > 8)
    throw TooLargeError("exhaustive search over (2n-5)!! topologies is capped at n = 8, got n = " +
                        std::to_string(n));

  std::uint64_t count = 0;
  double best_score = std::numeric_limits<double>::infinity();
  DecompTree best;
  EdgeList edges = initial_topology(n);
  // Depth-first over all ways to attach leaves 3..n-1; undo via resize.
  auto recurse = [&](auto&& self, int leaf) -> void {
    if (leaf == n) {
      ++count;
      DecompTree t = tree_from_edges(edges, n);
      const double score = topology_score(m, t);
      if (score < best_score) {  // strict: first topology wins ties
        best_score = score;
        best = std::move(t);
      }
      return;
    }
    const std::size_t limit = edges.size();
    for (std::size_t e = 0; e < limit; ++e) {
      const auto saved = edges[e];
      attach_leaf(edges, e, leaf, n + leaf - 2);
      self(self, leaf + 1);
      edges.resize(limit);
      edges[e] = saved;
    }
  };
  recurse(recurse, 3);
  if (scanned != nullptr) *scanned = count;
  return best;
}

nlohmann::json GeneratorModel::to_json() const {
  nlohmann::json jedges = nlohmann::json::array();
  for (std::size_t e = 0; e < edges.size(); ++e)
    jedges.push_back({{"u", edges[e].first}, {"v", edges[e].second}, {"rho", edge_rho[e]}});
  nlohmann::json jmarg = nlohmann::json::array();
  for (const auto& [id, p] : marginal) jmarg.push_back({{"id", id}, {"p", p}});
  nlohmann::json jcond = nlohmann::json::array();
  for (const auto& [pc, probs] : conditional)
    jcond.push_back({{"parent", pc.first},
                     {"child", pc.second},
                     {"p_given_parent1", probs.first},
                     {"p_given_parent0", probs.second}});
  return nlohmann::json{{"n", n},           {"seed", seed},
                        {"tree", tree.to_json()}, {"edges", std::move(jedges)},
                        {"node_marginals", std::move(jmarg)},
                        {"conditionals", std::move(jcond)}};
}

GeneratorModel GeneratorModel::from_json(const nlohmann::json& j) {
  try {
    GeneratorModel model;
    model.n = j.at("n").get<int>();
    model.seed = j.at("seed").get<std::uint64_t>();
    model.tree = DecompTree::from_json(j.at("tree"));
    for (const auto& je : j.at("edges")) {
      model.edges.emplace_back(je.at("u").get<int>(), je.at("v").get<int>());
      model.edge_rho.push_back(je.at("rho").get<double>());
    }
    for (const auto& jm : j.at("node_marginals"))
      model.marginal[jm.at("id").get<int>()] = jm.at("p").get<double>();
    for (const auto& jc : j.at("conditionals"))
      model.conditional[{jc.at("parent").get<int>(), jc.at("child").get<int>()}] = {
          jc.at("p_given_parent1").get<double>(), jc.at("p_given_parent0").get<double>()};
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed model JSON: ") + e.what());
  }
}

}  // namespace latree
