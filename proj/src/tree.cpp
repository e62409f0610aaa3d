#include "latree/tree.hpp"

#include <algorithm>
#include <deque>
#include <sstream>

#include "latree/error.hpp"

namespace latree {

namespace {

std::vector<int> sorted_complement(const std::vector<int>& all, const std::vector<int>& side) {
  std::vector<int> out;
  out.reserve(all.size() - side.size());
  std::set_difference(all.begin(), all.end(), side.begin(), side.end(),
                      std::back_inserter(out));
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// DecompTree
// ---------------------------------------------------------------------------

const DecompTree::Node& DecompTree::node(int id) const {
  auto it = nodes_.find(id);
  if (it == nodes_.end())
    throw IndexError("tree has no node with id " + std::to_string(id));
  return it->second;
}

void DecompTree::add_node(Node n) {
  std::sort(n.children.begin(), n.children.end());
  nodes_[n.id] = std::move(n);
}

void DecompTree::validate() const {
  if (nodes_.empty() || !has_node(root_))
    throw InputError("tree root id " + std::to_string(root_) + " is missing");
  if (node(root_).parent != -1) throw InputError("root node has a parent");
  std::set<int> seen_vars;
  std::size_t visited = 0;
  std::deque<int> queue{root_};
  std::set<int> seen{root_};
  while (!queue.empty()) {
    int id = queue.front();
    queue.pop_front();
    ++visited;
    const Node& nd = node(id);
    if (nd.id != id) throw InputError("node id mismatch in tree storage");
    if (nd.leaf) {
      if (!nd.children.empty())
        throw InputError("leaf node " + std::to_string(id) + " has children");
      if (nd.var < 0)
        throw InputError("leaf node " + std::to_string(id) + " has no variable");
      if (!seen_vars.insert(nd.var).second)
        throw InputError("variable " + std::to_string(nd.var) +
                         " appears on two leaves");
    }
    for (int c : nd.children) {
      const Node& ch = node(c);
      if (ch.parent != id)
        throw InputError("node " + std::to_string(c) + " has parent " +
                         std::to_string(ch.parent) + ", expected " + std::to_string(id));
      if (!seen.insert(c).second)
        throw InputError("node " + std::to_string(c) + " reached twice (cycle)");
      queue.push_back(c);
    }
  }
  if (visited != nodes_.size())
    throw InputError("tree is disconnected: reached " + std::to_string(visited) +
                     " of " + std::to_string(nodes_.size()) + " nodes");
}

DecompTree DecompTree::cherry_pair(int var_i, int var_j, int parent_id) {
  DecompTree t;
  t.add_node({parent_id, false, -1, -1, {var_i, var_j}});
  t.add_node({var_i, true, var_i, parent_id, {}});
  t.add_node({var_j, true, var_j, parent_id, {}});
  t.root_ = parent_id;
  return t;
}

DecompTree DecompTree::join_pair_pair(int i, int j, int k, int l, int wa, int wb, int w) {
  DecompTree t;
  t.add_node({w, false, -1, -1, {wa, wb}});
  t.add_node({wa, false, -1, w, {i, j}});
  t.add_node({wb, false, -1, w, {k, l}});
  t.add_node({i, true, i, wa, {}});
  t.add_node({j, true, j, wa, {}});
  t.add_node({k, true, k, wb, {}});
  t.add_node({l, true, l, wb, {}});
  t.root_ = w;
  return t;
}

DecompTree DecompTree::star3(int i, int j, int k, int w) {
  DecompTree t;
  t.add_node({w, false, -1, -1, {i, j, k}});
  t.add_node({i, true, i, w, {}});
  t.add_node({j, true, j, w, {}});
  t.add_node({k, true, k, w, {}});
  t.root_ = w;
  return t;
}

DecompTree DecompTree::with_pair_at_root(int var_i, int var_j, int pair_parent,
                                         int new_root) const {
  DecompTree t = *this;
  t.add_node({new_root, false, -1, -1, {pair_parent, t.root_}});
  t.add_node({pair_parent, false, -1, new_root, {var_i, var_j}});
  t.add_node({var_i, true, var_i, pair_parent, {}});
  t.add_node({var_j, true, var_j, pair_parent, {}});
  t.nodes_[t.root_].parent = new_root;
  t.root_ = new_root;
  return t;
}

DecompTree DecompTree::with_node_at_root(int var_i, int new_root) const {
  DecompTree t = *this;
  t.add_node({new_root, false, -1, -1, {var_i, t.root_}});
  t.add_node({var_i, true, var_i, new_root, {}});
  t.nodes_[t.root_].parent = new_root;
  t.root_ = new_root;
  return t;
}

DecompTree DecompTree::join_roots(const DecompTree& a, const DecompTree& b, int new_root) {
  DecompTree t = a;
  for (const auto& [id, nd] : b.nodes_) t.nodes_[id] = nd;
  t.add_node({new_root, false, -1, -1, {a.root_, b.root_}});
  t.nodes_[a.root_].parent = new_root;
  t.nodes_[b.root_].parent = new_root;
  t.root_ = new_root;
  return t;
}

std::vector<int> DecompTree::node_ids() const {
  std::vector<int> out;
  out.reserve(nodes_.size());
  for (const auto& [id, nd] : nodes_) out.push_back(id);
  return out;
}

std::vector<int> DecompTree::leaf_vars() const {
  std::vector<int> out;
  for (const auto& [id, nd] : nodes_)
    if (nd.leaf) out.push_back(nd.var);
  std::sort(out.begin(), out.end());
  return out;
}

int DecompTree::leaf_count() const {
  int c = 0;
  for (const auto& [id, nd] : nodes_) c += nd.leaf ? 1 : 0;
  return c;
}

int DecompTree::undirected_degree(int id) const {
  const Node& nd = node(id);
  return static_cast<int>(nd.children.size()) + (nd.parent == -1 ? 0 : 1);
}

std::vector<std::pair<int, int>> DecompTree::edge_list() const {
  std::vector<std::pair<int, int>> out;
  for (const auto& [id, nd] : nodes_)
    for (int c : nd.children) out.emplace_back(id, c);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> DecompTree::path(int a, int b) const {
  node(a);
  node(b);
  std::vector<int> up_a;
  std::map<int, int> pos_a;
  for (int cur = a; cur != -1; cur = node(cur).parent) {
    pos_a[cur] = static_cast<int>(up_a.size());
    up_a.push_back(cur);
  }
  std::vector<int> up_b;
  int meet = -1;
  for (int cur = b; cur != -1; cur = node(cur).parent) {
    auto it = pos_a.find(cur);
    if (it != pos_a.end()) {
      meet = it->second;
      break;
    }
    up_b.push_back(cur);
  }
  if (meet == -1) throw InputError("nodes lie in different trees");
  std::vector<int> out(up_a.begin(), up_a.begin() + meet + 1);
  out.insert(out.end(), up_b.rbegin(), up_b.rend());
  return out;
}

std::vector<int> DecompTree::leaves_below(int id) const {
  std::vector<int> out;
  std::deque<int> queue{id};
  while (!queue.empty()) {
    const Node& nd = node(queue.front());
    queue.pop_front();
    if (nd.leaf) out.push_back(nd.var);
    for (int c : nd.children) queue.push_back(c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

DecompTree tree_from_adjacency(const std::map<int, std::vector<int>>& adj,
                               const std::map<int, int>& leaf_var, int root) {
  DecompTree t;
  t.root_ = root;
  std::deque<std::pair<int, int>> queue{{root, -1}};  // (node, parent)
  while (!queue.empty()) {
    auto [id, parent] = queue.front();
    queue.pop_front();
    DecompTree::Node nd;
    nd.id = id;
    nd.parent = parent;
    auto lv = leaf_var.find(id);
    if (lv != leaf_var.end()) {
      nd.leaf = true;
      nd.var = lv->second;
    }
    auto it = adj.find(id);
    if (it != adj.end())
      for (int nb : it->second)
        if (nb != parent) {
          nd.children.push_back(nb);
          queue.emplace_back(nb, id);
        }
    t.add_node(std::move(nd));
  }
  t.validate();
  return t;
}

DecompTree DecompTree::simplified(Simplify policy) const {
  validate();
  std::map<int, int> leaf_var;
  for (const auto& [id, nd] : nodes_)
    if (nd.leaf) leaf_var[id] = nd.var;

  if (policy == Simplify::FlattenAll) {
    int hub = -1;
    for (const auto& [id, nd] : nodes_)
      if (!nd.leaf) {
        hub = id;
        break;
      }
    if (hub == -1)
      throw TreeTooSmallError("cannot flatten a tree with no hidden node");
    std::map<int, std::vector<int>> adj;
    for (const auto& [id, nd] : nodes_)
      if (nd.leaf) {
        adj[hub].push_back(id);
        adj[id].push_back(hub);
      }
    return tree_from_adjacency(adj, leaf_var, hub);
  }

  // Undirected adjacency, then repeatedly drop hidden leaves (degree <= 1)
  // and splice hidden pass-through nodes (degree 2).
  std::map<int, std::set<int>> adj;
  for (const auto& [p, c] : edge_list()) {
    adj[p].insert(c);
    adj[c].insert(p);
  }
  if (adj.empty()) throw TreeTooSmallError("tree has no edges to simplify");
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<int> ids;
    ids.reserve(adj.size());
    for (const auto& [id, nb] : adj) ids.push_back(id);
    for (int id : ids) {
      auto it = adj.find(id);
      if (it == adj.end() || leaf_var.count(id)) continue;
      if (it->second.size() == 2) {
        auto nb = it->second.begin();
        int u = *nb++;
        int v = *nb;
        adj[u].erase(id);
        adj[v].erase(id);
        adj[u].insert(v);
        adj[v].insert(u);
        adj.erase(it);
        changed = true;
      } else if (it->second.size() <= 1) {
        for (int u : it->second) adj[u].erase(id);
        adj.erase(it);
        changed = true;
      }
    }
  }

  int new_root = -1;
  for (const auto& [id, nb] : adj)
    if (!leaf_var.count(id)) {
      new_root = id;
      break;
    }
  if (new_root == -1)
    throw TreeTooSmallError("simplification left no hidden node (tree has fewer than 3 leaves)");
  std::map<int, std::vector<int>> adj_sorted;
  for (const auto& [id, nb] : adj) adj_sorted[id] = std::vector<int>(nb.begin(), nb.end());
  std::map<int, int> surviving_leaf_var;
  for (const auto& [id, nb] : adj)
    if (leaf_var.count(id)) surviving_leaf_var[id] = leaf_var[id];
  return tree_from_adjacency(adj_sorted, surviving_leaf_var, new_root);
}

std::set<std::vector<int>> DecompTree::nontrivial_splits() const {
  const std::vector<int> all = leaf_vars();
  const int total = static_cast<int>(all.size());
  std::set<std::vector<int>> out;
  if (total < 4) return out;
  const int min_var = all.front();
  for (const auto& [id, nd] : nodes_) {
    if (id == root_) continue;
    std::vector<int> side = leaves_below(id);
    const int sz = static_cast<int>(side.size());
    if (sz < 2 || sz > total - 2) continue;
    if (std::binary_search(side.begin(), side.end(), min_var))
      side = sorted_complement(all, side);
    out.insert(std::move(side));
  }
  return out;
}

bool DecompTree::equivalent_to(const DecompTree& other) const {
  return leaf_vars() == other.leaf_vars() &&
         nontrivial_splits() == other.nontrivial_splits();
}

std::map<std::vector<int>, std::pair<int, int>> DecompTree::edge_splits() const {
  const std::vector<int> all = leaf_vars();
  const int min_var = all.front();
  std::map<std::vector<int>, std::pair<int, int>> out;
  for (const auto& [p, c] : edge_list()) {
    std::vector<int> side = leaves_below(c);
    if (side.size() > 1 && std::binary_search(side.begin(), side.end(), min_var))
      side = sorted_complement(all, side);
    out[std::move(side)] = {p, c};
  }
  return out;
}

nlohmann::json DecompTree::to_json() const {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& [id, nd] : nodes_) {
    nlohmann::json jn;
    jn["id"] = id;
    jn["kind"] = nd.leaf ? "leaf" : "internal";
    if (nd.leaf) jn["var"] = nd.var;
    nodes.push_back(std::move(jn));
  }
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [p, c] : edge_list()) edges.push_back({p, c});
  return nlohmann::json{{"nodes", std::move(nodes)},
                        {"edges", std::move(edges)},
                        {"root", root_}};
}

DecompTree DecompTree::from_json(const nlohmann::json& j) {
  try {
    DecompTree t;
    t.root_ = j.at("root").get<int>();
    for (const auto& jn : j.at("nodes")) {
      Node nd;
      nd.id = jn.at("id").get<int>();
      const std::string kind = jn.at("kind").get<std::string>();
      if (kind == "leaf") {
        nd.leaf = true;
        nd.var = jn.at("var").get<int>();
      } else if (kind != "internal") {
        throw InputError("unknown node kind '" + kind + "'");
      }
      if (t.nodes_.count(nd.id))
        throw InputError("duplicate node id " + std::to_string(nd.id));
      t.nodes_[nd.id] = std::move(nd);
    }
    for (const auto& je : j.at("edges")) {
      if (!je.is_array() || je.size() != 2)
        throw InputError("edges must be [parent, child] pairs");
      int p = je[0].get<int>();
      int c = je[1].get<int>();
      if (!t.has_node(p) || !t.has_node(c))
        throw InputError("edge references unknown node");
      t.nodes_[p].children.push_back(c);
      if (t.nodes_[c].parent != -1)
        throw InputError("node " + std::to_string(c) + " has two parents");
      t.nodes_[c].parent = p;
    }
    for (auto& [id, nd] : t.nodes_)
      std::sort(nd.children.begin(), nd.children.end());
    t.validate();
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed tree JSON: ") + e.what());
  }
}

std::string DecompTree::to_dot() const {
  std::ostringstream out;
  out << "graph latent_tree {\n";
  for (const auto& [id, nd] : nodes_) {
    if (nd.leaf)
      out << "  n" << id << " [shape=box, label=\"x" << nd.var << "\"];\n";
    else
      out << "  n" << id << " [shape=circle, label=\"h" << id << "\"];\n";
  }
  for (const auto& [p, c] : edge_list()) out << "  n" << p << " -- n" << c << ";\n";
  out << "}\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// ForestState
// ---------------------------------------------------------------------------

ForestState ForestState::initial(int n) {
  if (n < 3)
    throw TooSmallError("decomposition needs at least 3 variables, got " +
                        std::to_string(n));
  ForestState s;
  s.n_ = n;
  s.next_hidden_ = n;
  for (int i = 0; i < n; ++i) s.independent_.insert(i);
  return s;
}

const DecompTree& ForestState::tree(int id) const {
  auto it = trees_.find(id);
  if (it == trees_.end())
    throw UnknownTreeError("no tree with root id " + std::to_string(id));
  return it->second;
}

void ForestState::check_partition() const {
  std::set<int> seen(independent_.begin(), independent_.end());
  for (const auto& [id, t] : trees_) {
    if (t.root() != id) throw std::logic_error("tree key does not match its root id");
    for (int v : t.leaf_vars())
      if (!seen.insert(v).second)
        throw std::logic_error("variable " + std::to_string(v) +
                               " appears in two units");
  }
  if (static_cast<int>(seen.size()) != n_)
    throw std::logic_error("units cover " + std::to_string(seen.size()) + " of " +
                           std::to_string(n_) + " variables");
}

namespace {

void require_var(const ForestState& s, int i) {
  if (i < 0 || i >= s.n())
    throw IndexError("variable index " + std::to_string(i) + " out of range [0, " +
                     std::to_string(s.n()) + ")");
  if (!s.independent().count(i))
    throw NotIndependentError("variable " + std::to_string(i) +
                              " is not in the independent set");
}

}  // namespace

ForestState combine_pair_pair(const ForestState& s, int i, int j, int k, int l) {
  std::set<int> distinct{i, j, k, l};
  if (distinct.size() != 4)
    throw IndexError("pair/pair combination needs four distinct variables");
  for (int v : {i, j, k, l}) require_var(s, v);
  ForestState out = s;
  const int wa = out.next_hidden_;
  const int wb = wa + 1;
  const int w = wa + 2;
  out.next_hidden_ += 3;
  for (int v : {i, j, k, l}) out.independent_.erase(v);
  out.trees_.emplace(w, DecompTree::join_pair_pair(i, j, k, l, wa, wb, w));
  return out;
}

ForestState combine_pair_tree(const ForestState& s, int i, int j, int t) {
  if (i == j) throw IndexError("pair/tree combination needs two distinct variables");
  require_var(s, i);
  require_var(s, j);
  const DecompTree& old_tree = s.tree(t);
  ForestState out = s;
  const int pair_parent = out.next_hidden_;
  const int w = pair_parent + 1;
  out.next_hidden_ += 2;
  out.independent_.erase(i);
  out.independent_.erase(j);
  out.trees_.erase(t);
  out.trees_.emplace(w, old_tree.with_pair_at_root(i, j, pair_parent, w));
  return out;
}

ForestState combine_tree_tree(const ForestState& s, int t1, int t2) {
  if (t1 == t2)
    throw SameTreeError("tree/tree combination needs two distinct trees");
  const DecompTree& a = s.tree(t1);
  const DecompTree& b = s.tree(t2);
  ForestState out = s;
  const int w = out.next_hidden_;
  out.next_hidden_ += 1;
  out.trees_.erase(t1);
  out.trees_.erase(t2);
  out.trees_.emplace(w, DecompTree::join_roots(a, b, w));
  return out;
}

ForestState combine_node_tree(const ForestState& s, int i, int t) {
  require_var(s, i);
  const DecompTree& old_tree = s.tree(t);
  ForestState out = s;
  const int w = out.next_hidden_;
  out.next_hidden_ += 1;
  out.independent_.erase(i);
  out.trees_.erase(t);
  out.trees_.emplace(w, old_tree.with_node_at_root(i, w));
  return out;
}

}  // namespace latree
