#pragma once

#include <cstdint>
#include <map>
#include <json.hpp>
#include <utility>
#include <vector>

#include "latree/correlation.hpp"
#include "latree/tree.hpp"

namespace latree {

struct GeneratorConfig {
  double rho_lo = 0.3;   // edge correlation magnitude range
  double rho_hi = 0.9;
  double neg_prob = 0.0; // probability an edge correlation is negative
};

/// A fully specified latent-tree model over n observed binary variables:
/// an unrooted binary topology (leaves 0..n-1, hidden nodes n..2n-3, stored
/// rooted at the smallest hidden id), one correlation per edge, a marginal
/// per node, and the implied parent->child conditional probabilities.
struct GeneratorModel {
  int n = 0;
  std::uint64_t seed = 0;
  DecompTree tree;
  std::vector<std::pair<int, int>> edges;  // canonical (min id, max id), sorted
  std::vector<double> edge_rho;            // aligned with edges
  std::map<int, double> marginal;          // node id -> P(node = 1)
  // (parent, child) -> (P(child=1 | parent=1), P(child=1 | parent=0))
  std::map<std::pair<int, int>, std::pair<double, double>> conditional;

  nlohmann::json to_json() const;
  static GeneratorModel from_json(const nlohmann::json& j);
};

/// Draw a model: topology uniform over labeled unrooted binary trees with n
/// leaves (random sequential edge attachment), edge magnitudes uniform in
/// [rho_lo, rho_hi] (negated with probability neg_prob), marginals uniform
/// in (0.2, 0.8) with resampling/fallback so every parent->child conditional
/// stays a valid probability. Deterministic in (n, seed, cfg). Requires
/// n >= 3 and 0 <= rho_lo <= rho_hi < 1.
GeneratorModel generate_model(int n, std::uint64_t seed, const GeneratorConfig& cfg = {});

/// Noise-free correlations implied by the model: rho_ij is the product of
/// edge correlations on the leaf-to-leaf path. Marginals come from the model.
CorrelationMatrix exact_matrix(const GeneratorModel& model);

/// Ancestral sampling: draw the root from its marginal, then each child
/// from its parent conditional, and keep the leaf columns.
SampleTable sample_data(const GeneratorModel& model, int rows, std::uint64_t seed);

/// Add independent uniform noise in [-eps, +eps] to each off-diagonal entry
/// (one draw per i<j pair, applied symmetrically), clamp to [-1, 1].
/// The k-th pair's draw depends only on (seed, k), so for fixed seed the
/// perturbations are nested as eps grows.
CorrelationMatrix perturb(const CorrelationMatrix& m, double eps, std::uint64_t seed);

/// Exhaustive oracle: enumerate every labeled unrooted binary topology on
/// the matrix's leaves (n <= 8; TooLargeError above), score each by the sum
/// of tetrad violations of all tree-induced quartet pairings, and return the
/// best (first in enumeration order on ties). `scanned`, when non-null,
/// receives the number of topologies visited.
DecompTree exhaustive_best_tree(const CorrelationMatrix& m, std::uint64_t* scanned = nullptr);

/// Score used by exhaustive_best_tree, exposed for direct comparisons.
double topology_score(const CorrelationMatrix& m, const DecompTree& tree);

}  // namespace latree
