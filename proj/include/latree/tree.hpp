#pragma once

#include <map>
#include <json.hpp>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace latree {

/// Rooted tree produced by the greedy construction. Leaves carry observed
/// variable indices; internal nodes are hidden variables. Node ids are
/// stable: leaves use ids 0..n-1 (== their variable index in trees we build
/// ourselves), hidden nodes use ids >= n in creation order, and no operation
/// ever renames a node.
class DecompTree {
 public:
  struct Node {
    int id = -1;
    bool leaf = false;
    int var = -1;  // observed-variable index; only meaningful for leaves
    int parent = -1;
    std::vector<int> children;  // sorted by id
  };

  enum class Simplify {
    SuppressDegree2,  // splice out hidden nodes of undirected degree 2
    FlattenAll,       // single hidden root adjacent to every leaf
  };

  DecompTree() = default;

  // --- builders used by the forest operations ---
  static DecompTree cherry_pair(int var_i, int var_j, int parent_id);
  static DecompTree join_pair_pair(int i, int j, int k, int l, int wa, int wb, int w);
  static DecompTree star3(int i, int j, int k, int w);
  DecompTree with_pair_at_root(int var_i, int var_j, int pair_parent, int new_root) const;
  DecompTree with_node_at_root(int var_i, int new_root) const;
  static DecompTree join_roots(const DecompTree& a, const DecompTree& b, int new_root);

  // --- structure queries ---
  int root() const { return root_; }
  bool has_node(int id) const { return nodes_.count(id) != 0; }
  const Node& node(int id) const;
  std::vector<int> node_ids() const;           // ascending
  std::vector<int> leaf_vars() const;          // ascending variable indices
  int leaf_count() const;
  int node_count() const { return static_cast<int>(nodes_.size()); }
  int undirected_degree(int id) const;
  /// (parent, child) pairs, ordered by (parent, child).
  std::vector<std::pair<int, int>> edge_list() const;
  /// Node-id sequence from a to b inclusive (through their meeting point).
  std::vector<int> path(int a, int b) const;
  /// Leaf variable indices in the subtree rooted at `id`, ascending.
  std::vector<int> leaves_below(int id) const;

  /// Degree-2 hidden nodes spliced out (or everything collapsed to a star).
  /// Node ids are preserved; the result is re-rooted at its smallest hidden
  /// id (smallest leaf id if no hidden node survives).
  DecompTree simplified(Simplify policy = Simplify::SuppressDegree2) const;

  /// Leaf-variable bipartitions induced by edges, for unrooted comparison.
  /// Each nontrivial split (both sides >= 2 leaves) is canonicalized to the
  /// side not containing the smallest leaf variable.
  std::set<std::vector<int>> nontrivial_splits() const;

  /// Same leaf set and same nontrivial splits (unrooted equivalence).
  bool equivalent_to(const DecompTree& other) const;

  /// Every edge with the canonical leaf-variable side that identifies it
  /// across equivalent trees: the singleton {var} for a pendant edge, the
  /// side without the smallest leaf variable otherwise.
  std::map<std::vector<int>, std::pair<int, int>> edge_splits() const;

  nlohmann::json to_json() const;
  static DecompTree from_json(const nlohmann::json& j);
  std::string to_dot() const;

 private:
  void add_node(Node n);
  void validate() const;  // connectivity, parent/child coherence
  friend DecompTree tree_from_adjacency(const std::map<int, std::vector<int>>&,
                                        const std::map<int, int>&, int);

  std::map<int, Node> nodes_;
  int root_ = -1;
};

/// Build a rooted DecompTree from an undirected adjacency map. `leaf_var`
/// maps leaf node ids to variable indices (ids absent from it are hidden).
DecompTree tree_from_adjacency(const std::map<int, std::vector<int>>& adj,
                               const std::map<int, int>& leaf_var, int root);

/// The evolving partition during the greedy construction: variables not yet
/// attached anywhere, plus a forest of rooted trees keyed by root id.
/// Value semantics; the combine_* functions return updated copies.
class ForestState {
 public:
  static ForestState initial(int n);

  int n() const { return n_; }
  const std::set<int>& independent() const { return independent_; }
  const std::map<int, DecompTree>& trees() const { return trees_; }
  int next_hidden() const { return next_hidden_; }
  bool has_tree(int id) const { return trees_.count(id) != 0; }
  const DecompTree& tree(int id) const;

  /// Count of units (independent variables + trees); each combine op
  /// strictly decreases it, so a decomposition takes at most n-1 steps.
  int unit_count() const {
    return static_cast<int>(independent_.size() + trees_.size());
  }
  bool done() const { return independent_.empty() && trees_.size() == 1; }

  /// Debug invariant: leaves of all trees + independent set partition 0..n-1.
  void check_partition() const;

 private:
  int n_ = 0;
  int next_hidden_ = 0;
  std::set<int> independent_;
  std::map<int, DecompTree> trees_;

  friend ForestState combine_pair_pair(const ForestState&, int, int, int, int);
  friend ForestState combine_pair_tree(const ForestState&, int, int, int);
  friend ForestState combine_tree_tree(const ForestState&, int, int);
  friend ForestState combine_node_tree(const ForestState&, int, int);
};

/// Merge independent variables {i,j} and {k,l}: new hidden parents wa over
/// (i,j) and wb over (k,l), new root w over (wa, wb). Ids wa, wb, w are the
/// next three hidden ids.
ForestState combine_pair_pair(const ForestState& s, int i, int j, int k, int l);

/// Merge independent pair (i,j) with tree t: new hidden parent p over (i,j),
/// new root w over (p, root of t).
ForestState combine_pair_tree(const ForestState& s, int i, int j, int t);

/// Merge trees t1 and t2 under a new root.
ForestState combine_tree_tree(const ForestState& s, int t1, int t2);

/// Attach independent variable i and tree t under a new root.
ForestState combine_node_tree(const ForestState& s, int i, int t);

}  // namespace latree
