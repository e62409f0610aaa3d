#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>

#include "latree/error.hpp"
#include "latree/quartet.hpp"
#include "latree/tree.hpp"
#include "support/matrices.hpp"

using namespace latree;
using testsupport::to_correlation;

namespace {

std::uint64_t choose2(std::uint64_t k) { return k * (k - 1) / 2; }

}  // namespace

TEST_SUITE("quartet") {

TEST_CASE("tetrad error is zero for the true split and 0.2268 for the others") {
  auto m = testsupport::quartet_matrix();
  CHECK(quad_error(m, 0, 1, 2, 3) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(quad_error(m, 0, 2, 1, 3) == doctest::Approx(0.2268).epsilon(1e-12));
  CHECK(quad_error(m, 0, 3, 1, 2) == doctest::Approx(0.2268).epsilon(1e-12));

  // agrees with the spelled-out reference on every pairing
  auto ref = oracle::path_product_matrix(4, testsupport::quartet_edges());
  CHECK(quad_error(m, 0, 2, 1, 3) ==
        doctest::Approx(oracle::quad_error_reference(ref, 0, 2, 1, 3)).epsilon(1e-15));
}

TEST_CASE("tetrad error is symmetric in its pair structure") {
  auto m = to_correlation(oracle::path_product_matrix(5, testsupport::snowflake6_edges()));
  const double base = quad_error(m, 0, 2, 1, 4);
  CHECK(quad_error(m, 2, 0, 1, 4) == base);  // swap within first pair
  CHECK(quad_error(m, 0, 2, 4, 1) == base);  // swap within second pair
  CHECK(quad_error(m, 1, 4, 0, 2) == base);  // swap the pairs
}

TEST_CASE("tetrad error rejects bad indices") {
  auto m = testsupport::quartet_matrix();
  CHECK_THROWS_AS(quad_error(m, 0, 1, 2, 4), IndexError);
  CHECK_THROWS_AS(quad_error(m, 0, 1, 2, -1), IndexError);
  CHECK_THROWS_AS(quad_error(m, 0, 1, 2, 2), IndexError);
  CHECK_THROWS_AS(quad_error(m, 0, 1, 0, 3), IndexError);
}

TEST_CASE("dense table precomputes each disjoint pair-of-pairs once") {
  auto m = to_correlation(oracle::path_product_matrix(6, testsupport::snowflake6_edges()));
  QuadTable tab(m);
  CHECK(tab.dense());
  // 3 * C(6,4) distinct pairings = C(15,2) minus intersecting pair pairs
  const std::uint64_t expected = choose2(6) * choose2(4) / 2;
  CHECK(tab.computes() == expected);
  CHECK(tab.lookups() == 0);

  const double direct = quad_error(m, 0, 2, 1, 4);
  CHECK(tab.value(0, 2, 1, 4) == direct);
  CHECK(tab.value(1, 4, 2, 0) == direct);
  CHECK(tab.lookups() == 2);
  CHECK(tab.computes() == expected);  // lookups served from the table

  tab.reset_counters();
  CHECK(tab.lookups() == 0);
  CHECK(tab.computes() == 0);

  CHECK_THROWS_AS(tab.value(0, 1, 2, 6), IndexError);
  CHECK_THROWS_AS(tab.value(0, 1, 1, 2), IndexError);
}

TEST_CASE("oversized matrices fall back to on-the-fly evaluation") {
  const int n = 65;
  Eigen::MatrixXd rho = Eigen::MatrixXd::Identity(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) rho(i, j) = 0.1;
  CorrelationMatrix m(rho, Eigen::VectorXd::Constant(n, 0.5));
  QuadTable tab(m);
  CHECK_FALSE(tab.dense());
  CHECK(tab.computes() == 0);
  (void)tab.value(0, 1, 2, 3);
  (void)tab.value(0, 1, 2, 3);
  CHECK(tab.lookups() == 2);
  CHECK(tab.computes() == 2);  // no memo in this mode
}

TEST_CASE("scan term counts match the combination sizes") {
  auto m = to_correlation(oracle::path_product_matrix(6, testsupport::snowflake6_edges()));
  QuadTable tab(m);
  auto t4 = DecompTree::join_pair_pair(0, 1, 2, 3, 6, 7, 8);  // 4 leaves
  auto t2 = DecompTree::cherry_pair(4, 5, 9);                 // 2 leaves

  CHECK(pair_tree_scan(tab, 4, 5, t4).terms == choose2(4));
  CHECK(tree_tree_scan(tab, t4, t2).terms == choose2(4) * choose2(2));
  // one variable against each ordered split of each leaf triple
  auto t3 = DecompTree::star3(0, 1, 2, 6);
  CHECK(node_tree_scan(tab, 5, t3).terms == 3);
  CHECK(node_tree_scan(tab, 5, t4).terms == 3 * 4);  // 3 * C(4,3)
}

TEST_CASE("scan aggregates track max, mean, and min with witnesses") {
  auto m = testsupport::quartet_matrix();
  QuadTable tab(m);
  auto cherry = DecompTree::cherry_pair(2, 3, 5);
  auto scan = pair_tree_scan(tab, 0, 1, cherry);
  REQUIRE(scan.terms == 1);
  CHECK(scan.max_value == scan.min_value);
  CHECK(scan.max_value == scan.mean_value);
  CHECK(scan.max_value == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(scan.max_witness == std::array<int, 4>{0, 1, 2, 3});

  ErrorScan acc;
  acc.add(0.5, 0, 1, 2, 3);
  acc.add(0.1, 0, 2, 1, 3);
  acc.add(0.3, 0, 3, 1, 2);
  acc.finish();
  CHECK(acc.max_value == 0.5);
  CHECK(acc.min_value == 0.1);
  CHECK(acc.mean_value == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(acc.max_witness == std::array<int, 4>{0, 1, 2, 3});
  CHECK(acc.min_witness == std::array<int, 4>{0, 2, 1, 3});
  CHECK(acc.terms == 3);
}

TEST_CASE("pair consistency is zero exactly for true sibling pairs") {
  auto m = to_correlation(oracle::path_product_matrix(6, testsupport::snowflake6_edges()));
  QuadTable tab(m);
  CHECK(pair_consistency(tab, 0, 1) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(pair_consistency(tab, 2, 3) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(pair_consistency(tab, 0, 2) > 1e-3);
  CHECK(pair_consistency(tab, 1, 5) > 1e-3);
  CHECK(pair_consistency(tab, 0, 1) == pair_consistency(tab, 1, 0));
}

TEST_CASE("group consistency certifies true clades and flags false ones") {
  auto m = to_correlation(oracle::path_product_matrix(6, testsupport::caterpillar6_edges()));
  QuadTable tab(m);
  const double huge = 1e308;
  CHECK(group_consistency(tab, {0, 1}, huge) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(group_consistency(tab, {0, 1, 2}, huge) ==
        doctest::Approx(0.0).epsilon(1e-14));
  CHECK(group_consistency(tab, {0, 2}, huge) > 1e-3);

  // early abort returns a positive lower bound, never exceeding the true max
  const double full = group_consistency(tab, {0, 3}, huge);
  const double bounded = group_consistency(tab, {0, 3}, 0.0);
  CHECK(full > 0.0);
  CHECK(bounded > 0.0);
  CHECK(bounded <= full + 1e-18);

  // degenerate sides are vacuously consistent
  CHECK(group_consistency(tab, {0}, huge) == 0.0);
  CHECK(group_consistency(tab, {0, 1, 2, 3, 4}, huge) == 0.0);
}

TEST_CASE("consistency cache returns the uncached values") {
  auto m = to_correlation(oracle::path_product_matrix(6, testsupport::snowflake6_edges()));
  QuadTable tab(m);
  ConsistencyCache cache(tab);
  for (int a = 0; a < 6; ++a)
    for (int b = a + 1; b < 6; ++b) {
      const double direct = pair_consistency(tab, a, b);
      CHECK(cache.pair(a, b) == direct);
      CHECK(cache.pair(b, a) == direct);  // second call hits the cache
    }
}

TEST_CASE("tree-asserted quartet error vanishes on the generating tree") {
  auto edges = testsupport::caterpillar6_edges();
  auto m = to_correlation(oracle::path_product_matrix(6, edges));

  std::map<int, std::vector<int>> adj;
  std::map<int, int> leaf_var;
  for (const auto& e : edges) {
    adj[e.u].push_back(e.v);
    adj[e.v].push_back(e.u);
  }
  for (int v = 0; v < 6; ++v) leaf_var[v] = v;
  auto truth = tree_from_adjacency(adj, leaf_var, 6);

  CHECK(tree_max_quad_error(m, truth) == doctest::Approx(0.0).epsilon(1e-14));

  // a wrong topology over the same leaves scores strictly worse
  auto snow_adj = std::map<int, std::vector<int>>{};
  std::map<int, int> snow_leaf;
  for (const auto& e : testsupport::snowflake6_edges()) {
    snow_adj[e.u].push_back(e.v);
    snow_adj[e.v].push_back(e.u);
  }
  for (int v = 0; v < 6; ++v) snow_leaf[v] = v;
  auto wrong = tree_from_adjacency(snow_adj, snow_leaf, 9);
  CHECK(tree_max_quad_error(m, wrong) > 1e-3);
}

}  // TEST_SUITE
