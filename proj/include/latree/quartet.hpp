#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <vector>

#include "latree/correlation.hpp"
#include "latree/tree.hpp"

namespace latree {

/// How a multi-quadruple combination error aggregates individual quadruples.
enum class ErrorMode { Max, Mean };

/// An aggregate error value plus the quadruple that realizes the maximum
/// term, recorded as (i, j, k, l) meaning the pairing (i,j) | (k,l).
struct ErrorReport {
  double value = 0.0;
  std::array<int, 4> witness{-1, -1, -1, -1};
};

/// Tetrad violation of the pairing (i,j) | (k,l):
///   | rho_ik * rho_jl  -  rho_il * rho_jk |
/// Zero exactly when the four variables admit a latent tree in which {i,j}
/// separates from {k,l}. Throws IndexError for out-of-range or repeated
/// indices.
double quad_error(const CorrelationMatrix& m, int i, int j, int k, int l);

/// Memoized quadruple errors for one matrix. For n <= 64 the full table of
/// disjoint pair-pair values is built up front; larger instances fall back
/// to on-the-fly evaluation. Counts every access so callers can verify the
/// evaluation budget: computes() is the number of formula evaluations,
/// lookups() the number of value() calls served.
class QuadTable {
 public:
  explicit QuadTable(const CorrelationMatrix& m);

  int n() const { return n_; }
  bool dense() const { return dense_; }

  /// quad_error(i, j, k, l) with memoization; indices must be distinct.
  double value(int i, int j, int k, int l) const;

  std::uint64_t lookups() const { return lookups_.load(std::memory_order_relaxed); }
  std::uint64_t computes() const { return computes_.load(std::memory_order_relaxed); }
  void reset_counters() {
    lookups_.store(0, std::memory_order_relaxed);
    computes_.store(0, std::memory_order_relaxed);
  }

 private:
  int pair_index(int i, int j) const;  // i < j
  const CorrelationMatrix* m_;
  int n_ = 0;
  bool dense_ = false;
  int pair_count_ = 0;
  std::vector<double> table_;  // pair_count^2, NaN where pairs intersect
  mutable std::atomic<std::uint64_t> lookups_{0};
  mutable std::atomic<std::uint64_t> computes_{0};
};

/// Aggregate of a set of quadruple evaluations: max, mean, min, and the
/// quadruples realizing max and min. `witness(mode)` is always the
/// max-contributing quadruple; `min_*` feed the finest-quad tie policy.
struct ErrorScan {
  double max_value = 0.0;
  double mean_value = 0.0;
  double min_value = 0.0;
  std::array<int, 4> max_witness{-1, -1, -1, -1};
  std::array<int, 4> min_witness{-1, -1, -1, -1};
  std::size_t terms = 0;

  double value(ErrorMode mode) const {
    return mode == ErrorMode::Max ? max_value : mean_value;
  }
  void add(double v, int i, int j, int k, int l);
  void finish();
};

/// Pair (i,j) against every leaf pair (k,l) of tree t: quadruples
/// (i, j, k, l). Requires t to have >= 2 leaves.
ErrorScan pair_tree_scan(const QuadTable& tab, int i, int j, const DecompTree& t);

/// Every leaf pair of t1 against every leaf pair of t2.
ErrorScan tree_tree_scan(const QuadTable& tab, const DecompTree& t1, const DecompTree& t2);

/// Variable i against every way of splitting a leaf triple {a,b,c} of t into
/// a partner for i and a remaining pair: quadruples (i, a, b, c) etc.
/// Requires t to have >= 3 leaves.
ErrorScan node_tree_scan(const QuadTable& tab, int i, const DecompTree& t);

/// Max violation of "a and b are siblings": max over disjoint pairs (c,d)
/// of quad_error(a, b, c, d). Zero when n < 4.
double pair_consistency(const QuadTable& tab, int a, int b);

/// Max violation of "group S splits off from the rest": max over pairs
/// (a,b) in S and (c,d) outside S of quad_error(a, b, c, d). The scan stops
/// early once the partial max exceeds `abort_above`; the returned value is
/// then only a lower bound, which still decides any comparison against
/// thresholds <= abort_above. Zero when either side has < 2 variables.
double group_consistency(const QuadTable& tab, const std::vector<int>& group,
                         double abort_above);

/// Caches pair_consistency values (they do not depend on the forest state).
class ConsistencyCache {
 public:
  explicit ConsistencyCache(const QuadTable& tab);
  double pair(int a, int b);

 private:
  const QuadTable* tab_;
  std::vector<double> values_;  // -1 = not yet computed
};

/// Max tetrad violation of every quartet pairing asserted by a tree: for
/// each leaf quartet, the pairing the (simplified) tree topology induces.
/// This is the natural "how far is this matrix from exactly fitting this
/// tree" diagnostic; it is 0 for noise-free data on the true tree.
double tree_max_quad_error(const CorrelationMatrix& m, const DecompTree& tree);

}  // namespace latree
