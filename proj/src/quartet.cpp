#include "latree/quartet.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "latree/error.hpp"

namespace latree {

namespace {

void require_distinct(int n, int i, int j, int k, int l) {
  for (int v : {i, j, k, l})
    if (v < 0 || v >= n)
      throw IndexError("variable index " + std::to_string(v) + " out of range [0, " +
                       std::to_string(n) + ")");
  if (i == j || i == k || i == l || j == k || j == l || k == l)
    throw IndexError("quadruple indices must be distinct");
}

// Index of the unordered pair {i, j}, i < j, in lexicographic order.
inline int pair_idx(int n, int i, int j) {
  return i * (2 * n - i - 1) / 2 + (j - i - 1);
}

inline double raw_quad(const CorrelationMatrix& m, int i, int j, int k, int l) {
  return std::abs(m.rho(i, k) * m.rho(j, l) - m.rho(i, l) * m.rho(j, k));
}

}  // namespace

double quad_error(const CorrelationMatrix& m, int i, int j, int k, int l) {
  require_distinct(m.n(), i, j, k, l);
  return raw_quad(m, i, j, k, l);
}

QuadTable::QuadTable(const CorrelationMatrix& m) : m_(&m), n_(m.n()) {
  dense_ = n_ <= 64 && n_ >= 4;
  if (!dense_) return;
  pair_count_ = n_ * (n_ - 1) / 2;
  table_.assign(static_cast<std::size_t>(pair_count_) * pair_count_,
                std::numeric_limits<double>::quiet_NaN());
  std::uint64_t built = 0;
  for (int i = 0; i < n_; ++i)
    for (int j = i + 1; j < n_; ++j) {
      const int p = pair_idx(n_, i, j);
      for (int k = i; k < n_; ++k)
        for (int l = k + 1; l < n_; ++l) {
          if (k == i || k == j || l == j) continue;  // overlapping pairs
          const int q = pair_idx(n_, k, l);
          if (q < p) continue;  // fill each unordered pair-of-pairs once
          const double v = raw_quad(*m_, i, j, k, l);
          table_[static_cast<std::size_t>(p) * pair_count_ + q] = v;
          table_[static_cast<std::size_t>(q) * pair_count_ + p] = v;
          ++built;
        }
    }
  computes_.store(built, std::memory_order_relaxed);
}

double QuadTable::value(int i, int j, int k, int l) const {
  require_distinct(n_, i, j, k, l);
  lookups_.fetch_add(1, std::memory_order_relaxed);
  if (!dense_) {
    computes_.fetch_add(1, std::memory_order_relaxed);
    return raw_quad(*m_, i, j, k, l);
  }
  const int a = std::min(i, j), b = std::max(i, j);
  const int c = std::min(k, l), d = std::max(k, l);
  return table_[static_cast<std::size_t>(pair_idx(n_, a, b)) * pair_count_ +
                pair_idx(n_, c, d)];
}

int QuadTable::pair_index(int i, int j) const { return pair_idx(n_, i, j); }

void ErrorScan::add(double v, int i, int j, int k, int l) {
  if (terms == 0 || v > max_value) {
    max_value = v;
    max_witness = {i, j, k, l};
  }
  if (terms == 0 || v < min_value) {
    min_value = v;
    min_witness = {i, j, k, l};
  }
  mean_value += v;  // running sum until finish()
  ++terms;
}

void ErrorScan::finish() {
  if (terms > 0) mean_value /= static_cast<double>(terms);
}

ErrorScan pair_tree_scan(const QuadTable& tab, int i, int j, const DecompTree& t) {
  const std::vector<int> leaves = t.leaf_vars();
  if (leaves.size() < 2)
    throw TreeTooSmallError("pair/tree scan needs a tree with >= 2 leaves");
  ErrorScan scan;
  for (std::size_t a = 0; a < leaves.size(); ++a)
    for (std::size_t b = a + 1; b < leaves.size(); ++b)
      scan.add(tab.value(i, j, leaves[a], leaves[b]), i, j, leaves[a], leaves[b]);
  scan.finish();
  return scan;
}

ErrorScan tree_tree_scan(const QuadTable& tab, const DecompTree& t1, const DecompTree& t2) {
  const std::vector<int> l1 = t1.leaf_vars();
  const std::vector<int> l2 = t2.leaf_vars();
  if (l1.size() < 2 || l2.size() < 2)
    throw TreeTooSmallError("tree/tree scan needs >= 2 leaves on each side");
  ErrorScan scan;
  for (std::size_t a = 0; a < l1.size(); ++a)
    for (std::size_t b = a + 1; b < l1.size(); ++b)
      for (std::size_t c = 0; c < l2.size(); ++c)
        for (std::size_t d = c + 1; d < l2.size(); ++d)
          scan.add(tab.value(l1[a], l1[b], l2[c], l2[d]), l1[a], l1[b], l2[c], l2[d]);
  scan.finish();
  return scan;
}

ErrorScan node_tree_scan(const QuadTable& tab, int i, const DecompTree& t) {
  const std::vector<int> leaves = t.leaf_vars();
  if (leaves.size() < 3)
    throw TreeTooSmallError("node/tree scan needs a tree with >= 3 leaves");
  ErrorScan scan;
  const std::size_t m = leaves.size();
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 1; b < m; ++b)
      for (std::size_t c = b + 1; c < m; ++c) {
        const int x = leaves[a], y = leaves[b], z = leaves[c];
        // i paired with each member of the triple in turn
        scan.add(tab.value(i, x, y, z), i, x, y, z);
        scan.add(tab.value(i, y, x, z), i, y, x, z);
        scan.add(tab.value(i, z, x, y), i, z, x, y);
      }
  scan.finish();
  return scan;
}

double pair_consistency(const QuadTable& tab, int a, int b) {
  const int n = tab.n();
  double worst = 0.0;
  for (int c = 0; c < n; ++c) {
    if (c == a || c == b) continue;
    for (int d = c + 1; d < n; ++d) {
      if (d == a || d == b) continue;
      worst = std::max(worst, tab.value(a, b, c, d));
    }
  }
  return worst;
}

double group_consistency(const QuadTable& tab, const std::vector<int>& group,
                         double abort_above) {
  const int n = tab.n();
  std::vector<char> in_group(n, 0);
  for (int v : group) in_group[v] = 1;
  std::vector<int> outside;
  outside.reserve(n - group.size());
  for (int v = 0; v < n; ++v)
    if (!in_group[v]) outside.push_back(v);
  if (group.size() < 2 || outside.size() < 2) return 0.0;
  double worst = 0.0;
  for (std::size_t a = 0; a < group.size(); ++a)
    for (std::size_t b = a + 1; b < group.size(); ++b)
      for (std::size_t c = 0; c < outside.size(); ++c)
        for (std::size_t d = c + 1; d < outside.size(); ++d) {
          worst = std::max(worst, tab.value(group[a], group[b], outside[c], outside[d]));
          if (worst > abort_above) return worst;  // lower bound suffices
        }
  return worst;
}

ConsistencyCache::ConsistencyCache(const QuadTable& tab)
    : tab_(&tab), values_(static_cast<std::size_t>(tab.n()) * (tab.n() - 1) / 2, -1.0) {}

double ConsistencyCache::pair(int a, int b) {
  if (a > b) std::swap(a, b);
  const int idx = pair_idx(tab_->n(), a, b);
  if (values_[idx] < 0.0) values_[idx] = pair_consistency(*tab_, a, b);
  return values_[idx];
}

double tree_max_quad_error(const CorrelationMatrix& m, const DecompTree& tree) {
  const std::vector<int> vars = tree.leaf_vars();
  const int k = static_cast<int>(vars.size());
  if (k < 4) return 0.0;

  // Leaf node id per variable, then hop distances between all leaf pairs.
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
  std::map<int, std::map<int, int>> dist;
  for (int v : vars) {
    std::map<int, int>& d = dist[v];
    std::deque<int> queue{var_node[v]};
    std::map<int, int> hops{{var_node[v], 0}};
    while (!queue.empty()) {
      int cur = queue.front();
      queue.pop_front();
      for (int nb : adj[cur])
        if (!hops.count(nb)) {
          hops[nb] = hops[cur] + 1;
          queue.push_back(nb);
        }
    }
    for (int u : vars) d[u] = hops[var_node[u]];
  }

  double worst = 0.0;
  for (int a = 0; a < k; ++a)
    for (int b = a + 1; b < k; ++b)
      for (int c = b + 1; c < k; ++c)
        for (int d = c + 1; d < k; ++d) {
          const int va = vars[a], vb = vars[b], vc = vars[c], vd = vars[d];
          // Three pairings with their four-point sums; the tree asserts the
          // pairing(s) with the smallest sum (all of them when tied, as at
          // a star node, where all three tetrads must vanish).
          const int s_ab = dist[va][vb] + dist[vc][vd];
          const int s_ac = dist[va][vc] + dist[vb][vd];
          const int s_ad = dist[va][vd] + dist[vb][vc];
          const int smin = std::min({s_ab, s_ac, s_ad});
          if (s_ab == smin) worst = std::max(worst, raw_quad(m, va, vb, vc, vd));
          if (s_ac == smin) worst = std::max(worst, raw_quad(m, va, vc, vb, vd));
          if (s_ad == smin) worst = std::max(worst, raw_quad(m, va, vd, vb, vc));
        }
  return worst;
}

}  // namespace latree
