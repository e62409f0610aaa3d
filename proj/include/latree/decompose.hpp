#pragma once

#include <array>
#include <cstdint>
#include <json.hpp>
#include <string>
#include <vector>

#include "latree/correlation.hpp"
#include "latree/quartet.hpp"
#include "latree/tree.hpp"

namespace latree {

enum class CandidateKind { PairPair, PairTree, TreeTree, NodeTree };

std::string to_string(CandidateKind k);
CandidateKind candidate_kind_from_string(const std::string& s);

/// Within an error tie, `Precedence` prefers structurally consistent merges,
/// then larger merges (tree/tree > pair/tree > pair/pair > node/tree), then
/// sorted participants. `FinestQuad` prefers the candidate whose best single
/// quadruple is cleanest, then falls back like Precedence. `Lexicographic`
/// ignores structure entirely and takes the smallest participant key.
enum class TiePolicy { Precedence, FinestQuad, Lexicographic };

std::string to_string(TiePolicy p);
TiePolicy tie_policy_from_string(const std::string& s);
std::string to_string(ErrorMode m);
ErrorMode error_mode_from_string(const std::string& s);

struct Stage1Config {
  ErrorMode error_mode = ErrorMode::Max;
  TiePolicy tie_policy = TiePolicy::Precedence;
  double epsilon_tie = 1e-12;
};

/// One possible combination step, with its score.
struct Candidate {
  CandidateKind kind = CandidateKind::PairPair;
  // Participants; unused slots stay -1. pair_a/pair_b hold independent
  // variables (pair_b only for PairPair); node_var for NodeTree; tree_a
  // (and tree_b for TreeTree) are tree root ids.
  std::array<int, 2> pair_a{-1, -1};
  std::array<int, 2> pair_b{-1, -1};
  int node_var = -1;
  int tree_a = -1;
  int tree_b = -1;

  ErrorReport error;                       // aggregate + max witness
  double min_quad = 0.0;                   // cleanest single quadruple
  std::array<int, 4> min_witness{-1, -1, -1, -1};
  std::size_t terms = 0;                   // quadruples aggregated
  // Max tetrad violation of the structure this merge asserts (new sibling
  // pairs and the merged leaf group). Exact for tie-set members that could
  // win selection; may be a lower bound for ones already beaten. -1 when the
  // candidate never reached tie evaluation.
  double consistency = -1.0;

  /// Sorted-participant key used by lexicographic ordering.
  std::vector<int> lex_key() const;

  nlohmann::json participants_json() const;
};

/// Score every legal combination of the current state. Errors follow
/// cfg.error_mode: pair/tree and tree/tree aggregate over their quadruples
/// with max or mean; pair/pair is a single quadruple; node/tree always uses
/// the max over its triple splits. Candidates within cfg.epsilon_tie of the
/// minimum error get their `consistency` field filled (the tie policies'
/// structural key). Ordering of the returned vector is deterministic.
std::vector<Candidate> enumerate_candidates(const ForestState& state,
                                            const CorrelationMatrix& m,
                                            const Stage1Config& cfg, QuadTable& tab);

/// Pick the winning candidate: minimum error, ties resolved per
/// cfg.tie_policy (see TiePolicy). Throws EmptyCandidateListError on empty
/// input. Deterministic for any input order of `cands`.
const Candidate& select_candidate(const std::vector<Candidate>& cands,
                                  const Stage1Config& cfg);

/// Apply a chosen candidate to the state.
ForestState apply_candidate(const ForestState& state, const Candidate& c);

/// One executed step, as recorded in the trace.
struct Stage1Step {
  Candidate chosen;
  int new_tree_id = -1;
  std::vector<int> independent_after;                 // sorted
  std::vector<std::pair<int, std::vector<int>>> trees_after;  // (root id, leaf vars)
};

struct Stage1Trace {
  int n = 0;
  Stage1Config cfg;
  bool star = false;  // n == 3 closed-form path, no greedy steps
  std::vector<Stage1Step> steps;
  std::uint64_t quad_lookups = 0;
  std::uint64_t quad_computes = 0;

  nlohmann::json to_json() const;
};

/// Closed-form decomposition for exactly 3 variables: one hidden hub w with
///   |rho_iw| = sqrt(|rho_ij * rho_ik / rho_jk|),
/// signs chosen so the three pairwise products reproduce the input signs
/// with the fewest negative edges (ties toward positive edges in leaf
/// order). Throws NotStarRealizableError when rho_ij * rho_ik * rho_jk <= 0
/// (zero or negative product: no real solution) or when a computed hub
/// edge magnitude exceeds 1.
struct StarDecomposition {
  DecompTree tree;
  std::array<double, 3> edge_rho{0, 0, 0};  // edges hub-0, hub-1, hub-2
};
StarDecomposition star_decompose_3(const CorrelationMatrix& m);

struct DecomposeResult {
  DecompTree tree;
  Stage1Trace trace;
};

/// Run the full greedy construction: start from all-independent variables,
/// repeatedly enumerate + select + apply until one tree remains. n == 3
/// short-circuits to star_decompose_3's topology. Throws TooSmallError for
/// n < 3.
DecomposeResult decompose(const CorrelationMatrix& m, const Stage1Config& cfg = {});

}  // namespace latree
