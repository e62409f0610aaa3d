#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "latree/decompose.hpp"
#include "latree/error.hpp"
#include "latree/fit.hpp"
#include "latree/tree.hpp"
#include "support/matrices.hpp"

using namespace latree;
using testsupport::to_correlation;

namespace {

DecompTree quartet_tree() {
  return DecompTree::join_pair_pair(0, 1, 2, 3, 4, 5, 6).simplified();
}

// Apply leaf sign pattern tau: rho'_ij = tau_i tau_j rho_ij.
CorrelationMatrix with_signs(const CorrelationMatrix& m, const std::vector<int>& tau) {
  Eigen::MatrixXd rho = m.matrix();
  for (int i = 0; i < m.n(); ++i)
    for (int j = 0; j < m.n(); ++j)
      if (i != j) rho(i, j) *= tau[i] * tau[j];
  return CorrelationMatrix(rho, m.marginals());
}

}  // namespace

TEST_SUITE("fit") {

TEST_CASE("path system of the quartet has 6 rows over 5 edges") {
  auto m = testsupport::quartet_matrix();
  auto sys = build_path_system(m, quartet_tree());
  CHECK(sys.rows.size() == 6);
  CHECK(sys.excluded.empty());
  REQUIRE(sys.edges.size() == 5);
  CHECK(sys.edges == std::vector<std::pair<int, int>>{
                         {0, 4}, {1, 4}, {2, 5}, {3, 5}, {4, 5}});
  CHECK(sys.incidence.rows() == 6);
  CHECK(sys.incidence.cols() == 5);

  // row for the pair (0,2) covers edges (0,4), (4,5), (2,5): 3 edges
  for (std::size_t r = 0; r < sys.rows.size(); ++r) {
    const double len = sys.incidence.row(static_cast<Eigen::Index>(r)).sum();
    if (sys.rows[r] == std::pair<int, int>(0, 1) ||
        sys.rows[r] == std::pair<int, int>(2, 3))
      CHECK(len == 2.0);
    else
      CHECK(len == 3.0);
    CHECK(sys.log_abs_rho(static_cast<Eigen::Index>(r)) ==
          std::log(std::abs(m.rho(sys.rows[r].first, sys.rows[r].second))));
    CHECK(sys.sign_rho[r] == 1);
  }
}

TEST_CASE("path system rejects unsimplified trees and mismatched leaves") {
  auto m = testsupport::quartet_matrix();
  auto raw = DecompTree::join_pair_pair(0, 1, 2, 3, 4, 5, 6);  // root degree 2
  CHECK_THROWS_AS(build_path_system(m, raw), TreeNotSimplifiedError);

  auto m5 = to_correlation(oracle::path_product_matrix(
      5, {{0, 5, 0.8}, {1, 5, 0.7}, {2, 6, 0.6}, {3, 6, 0.9}, {5, 6, 0.5}, {4, 5, 0.4}}));
  CHECK_THROWS_AS(build_path_system(m5, quartet_tree()), ShapeError);

  CHECK_THROWS_AS(build_path_system(m, quartet_tree(), -1.0), InputError);
}

TEST_CASE("magnitude solve recovers the generating edges exactly") {
  auto m = testsupport::quartet_matrix();
  auto sys = build_path_system(m, quartet_tree());
  auto sol = solve_edge_magnitudes(sys);
  REQUIRE(sol.log_abs.size() == 5);
  CHECK(sol.residual_norm < 1e-12);
  const double expected[5] = {0.8, 0.7, 0.6, 0.9, 0.5};  // by canonical edge order
  for (int e = 0; e < 5; ++e)
    CHECK(std::exp(sol.log_abs[e]) == doctest::Approx(expected[e]).epsilon(1e-12));
  CHECK(sol.magnitude_violations.empty());
}

TEST_CASE("the least-squares solution is first-order optimal") {
  auto m = testsupport::quartet_matrix();
  auto sys = build_path_system(m, quartet_tree());
  auto sol = solve_edge_magnitudes(sys);
  Eigen::VectorXd x(5);
  for (int e = 0; e < 5; ++e) x(e) = sol.log_abs[e];
  const double base = (sys.incidence * x - sys.log_abs_rho).norm();
  for (int e = 0; e < 5; ++e)
    for (double d : {1e-6, -1e-6}) {
      Eigen::VectorXd y = x;
      y(e) += d;
      CHECK((sys.incidence * y - sys.log_abs_rho).norm() >= base - 1e-15);
    }
}

TEST_CASE("three-leaf star system is exactly determined and matches the closed form") {
  Eigen::MatrixXd rho(3, 3);
  rho << 1, 0.72, 0.48, 0.72, 1, 0.54, 0.48, 0.54, 1;
  CorrelationMatrix m(rho, Eigen::VectorXd::Constant(3, 0.5));
  auto star = DecompTree::star3(0, 1, 2, 3);
  auto sys = build_path_system(m, star);
  CHECK(sys.rows.size() == 3);
  CHECK(sys.edges.size() == 3);
  auto sol = solve_edge_signs(sys, solve_edge_magnitudes(sys));

  auto closed = star_decompose_3(m);
  for (int e = 0; e < 3; ++e)
    CHECK(sol.rho[e] == doctest::Approx(closed.edge_rho[e]).epsilon(1e-12));
}

TEST_CASE("rho_min excludes weak rows but the system still solves") {
  auto m = testsupport::quartet_matrix();  // min |rho| = rho_12 = 0.21
  auto sys = build_path_system(m, quartet_tree(), 0.22);
  CHECK(sys.rows.size() == 5);
  REQUIRE(sys.excluded.size() == 1);
  CHECK(sys.excluded[0] == std::pair<int, int>(1, 2));
  auto sol = solve_edge_magnitudes(sys);
  const double expected[5] = {0.8, 0.7, 0.6, 0.9, 0.5};
  for (int e = 0; e < 5; ++e)
    CHECK(std::exp(sol.log_abs[e]) == doctest::Approx(expected[e]).epsilon(1e-10));
}

TEST_CASE("too many exclusions underdetermine the system") {
  auto m = testsupport::quartet_matrix();
  CHECK_THROWS_AS(build_path_system(m, quartet_tree(), 0.25), CorrelationTooSmallError);
}

TEST_CASE("rank-deficient incidence is a singular system") {
  PathSystem sys;
  sys.edges = {{0, 2}, {1, 2}};
  sys.rows = {{0, 1}, {0, 1}};
  sys.incidence.resize(2, 2);
  sys.incidence << 1, 1, 1, 1;  // the two edges only ever appear summed
  sys.log_abs_rho.resize(2);
  sys.log_abs_rho << -0.5, -0.5;
  sys.sign_rho = {1, 1};
  CHECK_THROWS_AS(solve_edge_magnitudes(sys), SingularSystemError);
}

TEST_CASE("edge signs factor a mixed-sign quartet") {
  auto m = with_signs(testsupport::quartet_matrix(), {1, -1, 1, -1});
  auto sys = build_path_system(m, quartet_tree());
  auto sol = solve_edge_signs(sys, solve_edge_magnitudes(sys));
  CHECK(sol.sign_consistent);
  CHECK(sol.sign_violations == 0);
  // canonical edges (0,4), (1,4), (2,5), (3,5), (4,5)
  CHECK(sol.sign == std::vector<int>{1, -1, 1, -1, 1});
  CHECK(sol.rho[1] == doctest::Approx(-0.7).epsilon(1e-12));

  // every reconstructed pair keeps the input sign
  auto rec = reconstruct_correlations(sys, sol);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (i != j) CHECK(rec(i, j) * m.rho(i, j) > 0);
}

TEST_CASE("an unfactorable sign pattern is reported, not fatal") {
  auto signedm = with_signs(testsupport::quartet_matrix(), {1, -1, 1, -1});
  Eigen::MatrixXd rho = signedm.matrix();
  rho(0, 3) = -rho(0, 3);  // break the product structure on one pair
  rho(3, 0) = rho(0, 3);
  CorrelationMatrix broken(rho, signedm.marginals());
  auto sys = build_path_system(broken, quartet_tree());
  auto sol = solve_edge_signs(sys, solve_edge_magnitudes(sys));
  CHECK_FALSE(sol.sign_consistent);
  CHECK(sol.sign_violations > 0);
  CHECK(sol.sign.size() == 5);
}

TEST_CASE("leaf/hidden correlations are path products") {
  auto m = testsupport::quartet_matrix();
  auto sys = build_path_system(m, quartet_tree());
  auto sol = solve_edge_signs(sys, solve_edge_magnitudes(sys));
  auto lh = leaf_hidden_correlations(sys, sol);
  REQUIRE(lh.leaves == std::vector<int>{0, 1, 2, 3});
  REQUIRE(lh.hidden == std::vector<int>{4, 5});
  CHECK(lh.rho(0, 0) == doctest::Approx(0.8).epsilon(1e-12));   // leaf 0 - hub 4
  CHECK(lh.rho(0, 1) == doctest::Approx(0.4).epsilon(1e-12));   // leaf 0 - hub 5: 0.8*0.5
  CHECK(lh.rho(2, 1) == doctest::Approx(0.6).epsilon(1e-12));   // leaf 2 - hub 5
  CHECK(lh.rho(3, 0) == doctest::Approx(0.45).epsilon(1e-12));  // 0.9*0.5
}

TEST_CASE("node parameter fit is exact with the canonical prior") {
  auto m = testsupport::quartet_matrix();
  auto sys = build_path_system(m, quartet_tree());
  auto sol = solve_edge_signs(sys, solve_edge_magnitudes(sys));
  auto lh = leaf_hidden_correlations(sys, sol);
  auto np = fit_node_parameters(m, lh);

  REQUIRE(np.hidden == std::vector<int>{4, 5});
  CHECK(np.fit_residual < 1e-10);
  for (std::size_t h = 0; h < np.hidden.size(); ++h) {
    CHECK(np.node_residual[h] < 1e-10);
    // all-positive moderate targets: 0.5 lies inside the exact-fit band
    CHECK(np.prior[h] == 0.5);
    CHECK(np.prior_interval[h].first < 0.5);
    CHECK(np.prior_interval[h].second == 1.0);
  }
  // hub 4 targets: r = (0.8, 0.7, 0.3, 0.45), marginals 0.5 ->
  // t_max = 0.5/(0.8*0.5) = 1.25, lower end of the band = 1/(1+1.25^2)
  CHECK(np.prior_interval[0].first ==
        doctest::Approx(1.0 / (1.0 + 1.25 * 1.25)).epsilon(1e-12));
  for (Eigen::Index i = 0; i < np.conditional.rows(); ++i)
    for (Eigen::Index h = 0; h < np.conditional.cols(); ++h) {
      CHECK(np.conditional(i, h) >= 0.0);
      CHECK(np.conditional(i, h) <= 1.0);
    }
  // the fitted parameters reproduce the correlation targets exactly
  const double t = std::sqrt((1.0 - np.prior[0]) / np.prior[0]);
  for (int i = 0; i < 4; ++i) {
    const double s = 0.5;  // sqrt(0.5 * 0.5)
    CHECK((np.conditional(i, 0) - 0.5) / (s * t) ==
          doctest::Approx(lh.rho(i, 0)).epsilon(1e-9));
  }
}

TEST_CASE("skewed marginals push the canonical prior above one half") {
  // marginals 0.9 with a strong positive target force the exact-fit band
  // above 0.5: t_max = 0.1/(0.8*0.3), p_low = 1/(1+t_max^2) ~ 0.852
  Eigen::MatrixXd rho = Eigen::MatrixXd::Identity(3, 3);
  rho(0, 1) = rho(1, 0) = 0.64;
  rho(0, 2) = rho(2, 0) = 0.64;
  rho(1, 2) = rho(2, 1) = 0.64;
  CorrelationMatrix m(rho, Eigen::VectorXd::Constant(3, 0.9));

  LeafHiddenTable lh;
  lh.leaves = {0, 1, 2};
  lh.hidden = {3};
  lh.rho.resize(3, 1);
  lh.rho << 0.8, 0.8, 0.8;
  auto np = fit_node_parameters(m, lh);
  const double s = std::sqrt(0.9 * 0.1);
  const double t_max = 0.1 / (0.8 * s);
  const double p_low = 1.0 / (1.0 + t_max * t_max);
  CHECK(p_low > 0.5);
  CHECK(np.prior[0] == doctest::Approx(p_low).epsilon(1e-12));
  CHECK(np.node_residual[0] < 1e-10);
  CHECK(np.prior_interval[0].first == doctest::Approx(p_low).epsilon(1e-12));
}

TEST_CASE("all-zero targets keep the leaf marginals") {
  auto m = testsupport::quartet_matrix();
  LeafHiddenTable lh;
  lh.leaves = {0, 1, 2, 3};
  lh.hidden = {7};
  lh.rho = Eigen::MatrixXd::Zero(4, 1);
  auto np = fit_node_parameters(m, lh);
  CHECK(np.prior[0] == 0.5);
  CHECK(np.prior_interval[0].first == 0.0);
  CHECK(np.prior_interval[0].second == 1.0);
  CHECK(np.fit_residual == 0.0);
  for (int i = 0; i < 4; ++i) CHECK(np.conditional(i, 0) == m.marginal(i));
}

TEST_CASE("forward-generated leaf/hidden targets are fit with feasible parameters") {
  // Known hidden node: p(w) = 0.35, per-leaf conditionals (w=1, w=0).
  const double pw = 0.35;
  const double sw = std::sqrt(pw * (1.0 - pw));
  const std::vector<std::pair<double, double>> cond = {
      {0.9, 0.2}, {0.7, 0.4}, {0.15, 0.6}, {0.55, 0.5}};

  std::vector<double> p, r;
  for (auto [c1, c0] : cond) {
    const double pi = c1 * pw + c0 * (1.0 - pw);
    p.push_back(pi);
    r.push_back((c1 - pi) * pw / (std::sqrt(pi * (1.0 - pi)) * sw));
  }

  // identity off-diagonal: only the marginals matter to the parameter fit
  Eigen::MatrixXd rho = Eigen::MatrixXd::Identity(4, 4);
  Eigen::VectorXd marg(4);
  for (int i = 0; i < 4; ++i) marg(i) = p[i];
  CorrelationMatrix m(rho, marg);

  LeafHiddenTable lh;
  lh.leaves = {0, 1, 2, 3};
  lh.hidden = {9};
  lh.rho.resize(4, 1);
  for (int i = 0; i < 4; ++i) lh.rho(i, 0) = r[i];

  auto np = fit_node_parameters(m, lh);
  CHECK(np.fit_residual <= 1e-6);
  CHECK(np.prior[0] > 0.0);
  CHECK(np.prior[0] < 1.0);
  for (int i = 0; i < 4; ++i) {
    CHECK(np.conditional(i, 0) >= 0.0);
    CHECK(np.conditional(i, 0) <= 1.0);
  }
  // the generating parameters themselves lie in the reported exact-fit band
  CHECK(np.prior_interval[0].first <= pw + 1e-12);
}

TEST_CASE("forward correlation formula agrees with exhaustive enumeration") {
  // rho(leaf, hidden) from the closed formula must match the exact joint:
  // enumerate a two-node model treating the hidden root as an observable.
  const double pw = 0.3, c1 = 0.85, c0 = 0.25;
  const double pi = c1 * pw + c0 * (1.0 - pw);
  const double formula = (c1 - pi) * pw /
                         (std::sqrt(pi * (1.0 - pi)) * std::sqrt(pw * (1.0 - pw)));
  auto joint = oracle::joint_enumeration_matrix(2, 1, pw, {{1, 0, c1, c0}});
  CHECK(formula == doctest::Approx(joint[0][1]).epsilon(1e-12));
}

TEST_CASE("fit_tree drives the whole stage and reconstructs the input") {
  auto m = testsupport::quartet_matrix();
  auto fr = fit_tree(m, quartet_tree());
  CHECK(fr.max_reconstruction_error < 1e-12);
  CHECK(fr.edges.sign_violations == 0);
  CHECK(fr.reconstructed(0, 0) == 1.0);
  CHECK(fr.reconstructed(0, 1) == doctest::Approx(0.56).epsilon(1e-12));
  CHECK(fr.reconstructed(1, 2) == doctest::Approx(0.21).epsilon(1e-12));
  CHECK(fr.params.fit_residual < 1e-10);

  auto j = fit_result_json(fr, m);
  CHECK(j.at("edges").size() == 5);
  CHECK(j.at("hidden").size() == 2);
  CHECK(j.at("diagnostics").at("sign_violations").get<int>() == 0);
  CHECK(j.at("diagnostics").at("max_reconstruction_error").get<double>() < 1e-12);
  CHECK(j.at("diagnostics").at("max_quartet_error").get<double>() < 1e-12);
  CHECK(j.at("tree").at("nodes").size() == 6);
}

}  // TEST_SUITE
