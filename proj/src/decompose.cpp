#include "latree/decompose.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "latree/error.hpp"
#include "latree/util.hpp"

namespace latree {

std::string to_string(CandidateKind k) {
  switch (k) {
    case CandidateKind::PairPair: return "pair_pair";
    case CandidateKind::PairTree: return "pair_tree";
    case CandidateKind::TreeTree: return "tree_tree";
    case CandidateKind::NodeTree: return "node_tree";
  }
  return "?";
}

CandidateKind candidate_kind_from_string(const std::string& s) {
  if (s == "pair_pair") return CandidateKind::PairPair;
  if (s == "pair_tree") return CandidateKind::PairTree;
  if (s == "tree_tree") return CandidateKind::TreeTree;
  if (s == "node_tree") return CandidateKind::NodeTree;
  throw ParseError("unknown candidate kind '" + s + "'");
}

std::string to_string(TiePolicy p) {
  switch (p) {
    case TiePolicy::Precedence: return "precedence";
    case TiePolicy::FinestQuad: return "finest_quad";
    case TiePolicy::Lexicographic: return "lexicographic";
  }
  return "?";
}

TiePolicy tie_policy_from_string(const std::string& s) {
  if (s == "precedence") return TiePolicy::Precedence;
  if (s == "finest_quad") return TiePolicy::FinestQuad;
  if (s == "lexicographic") return TiePolicy::Lexicographic;
  throw ParseError("unknown tie policy '" + s + "'");
}

std::string to_string(ErrorMode m) {
  return m == ErrorMode::Max ? "max" : "mean";
}

ErrorMode error_mode_from_string(const std::string& s) {
  if (s == "max") return ErrorMode::Max;
  if (s == "mean") return ErrorMode::Mean;
  throw ParseError("unknown error mode '" + s + "'");
}

namespace {

// Larger merges first: tree/tree, pair/tree, pair/pair, node/tree.
int kind_rank(CandidateKind k) {
  switch (k) {
    case CandidateKind::TreeTree: return 0;
    case CandidateKind::PairTree: return 1;
    case CandidateKind::PairPair: return 2;
    case CandidateKind::NodeTree: return 3;
  }
  return 4;
}

void validate_cfg(const Stage1Config& cfg) {
  if (!(cfg.epsilon_tie >= 0.0))
    throw InputError("epsilon_tie must be >= 0");
}

}  // namespace

std::vector<int> Candidate::lex_key() const {
  switch (kind) {
    case CandidateKind::PairPair: {
      std::array<int, 2> a{std::min(pair_a[0], pair_a[1]), std::max(pair_a[0], pair_a[1])};
      std::array<int, 2> b{std::min(pair_b[0], pair_b[1]), std::max(pair_b[0], pair_b[1])};
      if (b < a) std::swap(a, b);
      return {a[0], a[1], b[0], b[1]};
    }
    case CandidateKind::PairTree:
      return {std::min(pair_a[0], pair_a[1]), std::max(pair_a[0], pair_a[1]), tree_a};
    case CandidateKind::TreeTree:
      return {std::min(tree_a, tree_b), std::max(tree_a, tree_b)};
    case CandidateKind::NodeTree:
      return {node_var, tree_a};
  }
  return {};
}

nlohmann::json Candidate::participants_json() const {
  switch (kind) {
    case CandidateKind::PairPair:
      return {{"pair_a", {pair_a[0], pair_a[1]}}, {"pair_b", {pair_b[0], pair_b[1]}}};
    case CandidateKind::PairTree:
      return {{"pair", {pair_a[0], pair_a[1]}}, {"tree", tree_a}};
    case CandidateKind::TreeTree:
      return {{"tree_a", tree_a}, {"tree_b", tree_b}};
    case CandidateKind::NodeTree:
      return {{"node", node_var}, {"tree", tree_a}};
  }
  return nullptr;
}

namespace {

void score_candidate(Candidate& c, const ForestState& state, const Stage1Config& cfg,
                     QuadTable& tab) {
  switch (c.kind) {
    case CandidateKind::PairPair: {
      const double v = tab.value(c.pair_a[0], c.pair_a[1], c.pair_b[0], c.pair_b[1]);
      c.error = {v, {c.pair_a[0], c.pair_a[1], c.pair_b[0], c.pair_b[1]}};
      c.min_quad = v;
      c.min_witness = c.error.witness;
      c.terms = 1;
      return;
    }
    case CandidateKind::PairTree: {
      ErrorScan s = pair_tree_scan(tab, c.pair_a[0], c.pair_a[1], state.tree(c.tree_a));
      c.error = {s.value(cfg.error_mode), s.max_witness};
      c.min_quad = s.min_value;
      c.min_witness = s.min_witness;
      c.terms = s.terms;
      return;
    }
    case CandidateKind::TreeTree: {
      ErrorScan s = tree_tree_scan(tab, state.tree(c.tree_a), state.tree(c.tree_b));
      c.error = {s.value(cfg.error_mode), s.max_witness};
      c.min_quad = s.min_value;
      c.min_witness = s.min_witness;
      c.terms = s.terms;
      return;
    }
    case CandidateKind::NodeTree: {
      // Always aggregated with max: the triple-split quadruples of one tree
      // do not form the pair-against-pair product set the mean is defined on.
      ErrorScan s = node_tree_scan(tab, c.node_var, state.tree(c.tree_a));
      c.error = {s.max_value, s.max_witness};
      c.min_quad = s.min_value;
      c.min_witness = s.min_witness;
      c.terms = s.terms;
      return;
    }
  }
}

// Leaf variables a candidate would merge into one tree.
std::vector<int> merged_group(const ForestState& state, const Candidate& c) {
  std::vector<int> g;
  switch (c.kind) {
    case CandidateKind::PairPair:
      g = {c.pair_a[0], c.pair_a[1], c.pair_b[0], c.pair_b[1]};
      break;
    case CandidateKind::PairTree:
      g = state.tree(c.tree_a).leaf_vars();
      g.push_back(c.pair_a[0]);
      g.push_back(c.pair_a[1]);
      break;
    case CandidateKind::TreeTree: {
      g = state.tree(c.tree_a).leaf_vars();
      const auto other = state.tree(c.tree_b).leaf_vars();
      g.insert(g.end(), other.begin(), other.end());
      break;
    }
    case CandidateKind::NodeTree:
      g = state.tree(c.tree_a).leaf_vars();
      g.push_back(c.node_var);
      break;
  }
  std::sort(g.begin(), g.end());
  return g;
}

// Structural-consistency key: how badly the sibling pairs / merged group a
// candidate asserts are contradicted anywhere in the matrix. Early-aborts
// once provably above `abort_above` (the returned lower bound still loses
// every comparison that matters).
double candidate_consistency(const ForestState& state, const Candidate& c,
                             ConsistencyCache& pairs, const QuadTable& tab,
                             double abort_above) {
  double worst = 0.0;
  if (c.kind == CandidateKind::PairPair || c.kind == CandidateKind::PairTree)
    worst = std::max(worst, pairs.pair(c.pair_a[0], c.pair_a[1]));
  if (c.kind == CandidateKind::PairPair)
    worst = std::max(worst, pairs.pair(c.pair_b[0], c.pair_b[1]));
  if (worst > abort_above) return worst;
  const std::vector<int> group = merged_group(state, c);
  if (static_cast<int>(group.size()) + 2 <= tab.n())
    worst = std::max(worst, group_consistency(tab, group, abort_above));
  return worst;
}

}  // namespace

std::vector<Candidate> enumerate_candidates(const ForestState& state,
                                            const CorrelationMatrix& m,
                                            const Stage1Config& cfg, QuadTable& tab) {
  validate_cfg(cfg);
  if (m.n() != state.n())
    throw ShapeError("state covers " + std::to_string(state.n()) +
                     " variables but matrix has " + std::to_string(m.n()));

  const std::vector<int> indep(state.independent().begin(), state.independent().end());
  std::vector<int> tree_ids;
  for (const auto& [id, t] : state.trees()) tree_ids.push_back(id);

  std::vector<Candidate> cands;
  const std::size_t ni = indep.size();
  // pair/pair: three pairings per independent quadruple
  for (std::size_t a = 0; a < ni; ++a)
    for (std::size_t b = a + 1; b < ni; ++b)
      for (std::size_t c = b + 1; c < ni; ++c)
        for (std::size_t d = c + 1; d < ni; ++d) {
          const int i = indep[a], j = indep[b], k = indep[c], l = indep[d];
          Candidate base;
          base.kind = CandidateKind::PairPair;
          base.pair_a = {i, j};
          base.pair_b = {k, l};
          cands.push_back(base);
          base.pair_a = {i, k};
          base.pair_b = {j, l};
          cands.push_back(base);
          base.pair_a = {i, l};
          base.pair_b = {j, k};
          cands.push_back(base);
        }
  // pair/tree
  for (std::size_t a = 0; a < ni; ++a)
    for (std::size_t b = a + 1; b < ni; ++b)
      for (int t : tree_ids) {
        Candidate c;
        c.kind = CandidateKind::PairTree;
        c.pair_a = {indep[a], indep[b]};
        c.tree_a = t;
        cands.push_back(c);
      }
  // tree/tree
  for (std::size_t a = 0; a < tree_ids.size(); ++a)
    for (std::size_t b = a + 1; b < tree_ids.size(); ++b) {
      Candidate c;
      c.kind = CandidateKind::TreeTree;
      c.tree_a = tree_ids[a];
      c.tree_b = tree_ids[b];
      cands.push_back(c);
    }
  // node/tree
  for (int i : indep)
    for (int t : tree_ids) {
      if (state.tree(t).leaf_count() < 3) continue;
      Candidate c;
      c.kind = CandidateKind::NodeTree;
      c.node_var = i;
      c.tree_a = t;
      cands.push_back(c);
    }

  util::parallel_for(cands.size(),
                     [&](std::size_t i) { score_candidate(cands[i], state, cfg, tab); });

  if (cands.empty() || cfg.tie_policy == TiePolicy::Lexicographic) return cands;

  // Fill the structural-consistency key for the error tie set only; the
  // selection never looks at it for anything else.
  double min_error = std::numeric_limits<double>::infinity();
  for (const Candidate& c : cands) min_error = std::min(min_error, c.error.value);
  std::vector<std::size_t> tie;
  for (std::size_t i = 0; i < cands.size(); ++i)
    if (cands[i].error.value <= min_error + cfg.epsilon_tie) tie.push_back(i);

  // Evaluate in the policy's cheap-key order so the running minimum prunes
  // most group scans early.
  std::stable_sort(tie.begin(), tie.end(), [&](std::size_t x, std::size_t y) {
    const Candidate& cx = cands[x];
    const Candidate& cy = cands[y];
    if (cfg.tie_policy == TiePolicy::FinestQuad && cx.min_quad != cy.min_quad)
      return cx.min_quad < cy.min_quad;
    const int rx = kind_rank(cx.kind), ry = kind_rank(cy.kind);
    if (rx != ry) return rx < ry;
    return cx.lex_key() < cy.lex_key();
  });
  ConsistencyCache pair_cache(tab);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t idx : tie) {
    Candidate& c = cands[idx];
    c.consistency = candidate_consistency(state, c, pair_cache, tab, best);
    best = std::min(best, c.consistency);
  }
  return cands;
}

const Candidate& select_candidate(const std::vector<Candidate>& cands,
                                  const Stage1Config& cfg) {
  validate_cfg(cfg);
  if (cands.empty())
    throw EmptyCandidateListError("cannot select from an empty candidate list");

  double min_error = std::numeric_limits<double>::infinity();
  for (const Candidate& c : cands) min_error = std::min(min_error, c.error.value);

  const Candidate* best = nullptr;
  auto better = [&](const Candidate& a, const Candidate& b) {
    // true when a should replace b
    const double ca = a.consistency < 0 ? 0.0 : a.consistency;
    const double cb = b.consistency < 0 ? 0.0 : b.consistency;
    switch (cfg.tie_policy) {
      case TiePolicy::Lexicographic: {
        const auto ka = a.lex_key(), kb = b.lex_key();
        if (ka != kb) return ka < kb;
        return kind_rank(a.kind) < kind_rank(b.kind);
      }
      case TiePolicy::FinestQuad:
        if (a.min_quad != b.min_quad) return a.min_quad < b.min_quad;
        [[fallthrough]];
      case TiePolicy::Precedence: {
        if (ca != cb) return ca < cb;
        const int ra = kind_rank(a.kind), rb = kind_rank(b.kind);
        if (ra != rb) return ra < rb;
        return a.lex_key() < b.lex_key();
      }
    }
    return false;
  };
  for (const Candidate& c : cands) {
    if (c.error.value > min_error + cfg.epsilon_tie) continue;
    if (best == nullptr || better(c, *best)) best = &c;
  }
  return *best;
}

ForestState apply_candidate(const ForestState& state, const Candidate& c) {
  switch (c.kind) {
    case CandidateKind::PairPair:
      return combine_pair_pair(state, c.pair_a[0], c.pair_a[1], c.pair_b[0], c.pair_b[1]);
    case CandidateKind::PairTree:
      return combine_pair_tree(state, c.pair_a[0], c.pair_a[1], c.tree_a);
    case CandidateKind::TreeTree:
      return combine_tree_tree(state, c.tree_a, c.tree_b);
    case CandidateKind::NodeTree:
      return combine_node_tree(state, c.node_var, c.tree_a);
  }
  throw InputError("candidate has unknown kind");
}

nlohmann::json Stage1Trace::to_json() const {
  nlohmann::json jsteps = nlohmann::json::array();
  for (const Stage1Step& s : steps) {
    nlohmann::json js;
    js["kind"] = latree::to_string(s.chosen.kind);
    js["participants"] = s.chosen.participants_json();
    js["error"] = s.chosen.error.value;
    js["witness"] = s.chosen.error.witness;
    js["min_quad"] = s.chosen.min_quad;
    if (s.chosen.consistency >= 0) js["consistency"] = s.chosen.consistency;
    js["new_tree_id"] = s.new_tree_id;
    nlohmann::json jtrees = nlohmann::json::array();
    for (const auto& [id, leaves] : s.trees_after)
      jtrees.push_back({{"id", id}, {"leaves", leaves}});
    js["state"] = {{"independent", s.independent_after}, {"trees", std::move(jtrees)}};
    jsteps.push_back(std::move(js));
  }
  return nlohmann::json{
      {"n", n},
      {"error_mode", latree::to_string(cfg.error_mode)},
      {"tie_policy", latree::to_string(cfg.tie_policy)},
      {"epsilon_tie", cfg.epsilon_tie},
      {"star", star},
      {"steps", std::move(jsteps)},
      {"quad_evaluations", {{"formula", quad_computes}, {"lookups", quad_lookups}}},
  };
}

StarDecomposition star_decompose_3(const CorrelationMatrix& m) {
  if (m.n() != 3)
    throw ShapeError("star decomposition applies to exactly 3 variables, got " +
                     std::to_string(m.n()));
  const double r01 = m.rho(0, 1), r02 = m.rho(0, 2), r12 = m.rho(1, 2);
  const double product = r01 * r02 * r12;
  if (product <= 0.0) {
    if (r01 == 0.0 || r02 == 0.0 || r12 == 0.0)
      throw NotStarRealizableError(
          "a pairwise correlation is exactly 0; no hidden hub can reproduce it");
    throw NotStarRealizableError(
        "the product of the three correlations is negative (" +
        util::format_double(product) +
        "); sign constraints admit no real hub edges");
  }
  StarDecomposition out;
  out.tree = DecompTree::star3(0, 1, 2, 3);
  double m0 = std::sqrt(std::abs(r01 * r02 / r12));
  double m1 = std::sqrt(std::abs(r01 * r12 / r02));
  double m2 = std::sqrt(std::abs(r02 * r12 / r01));
  for (double* mag : {&m0, &m1, &m2}) {
    if (*mag > 1.0 + 1e-9)
      throw NotStarRealizableError("a hub edge correlation would be " +
                                   util::format_double(*mag) +
                                   ", outside [-1, 1]");
    if (*mag > 1.0) *mag = 1.0;  // round-off from a boundary-feasible input
  }
  // Sign pattern: s_i * s_j must equal sign(r_ij); the two solutions differ
  // by a global flip. Keep the one with fewer negative edges (a strict
  // minority, since 3 is odd); prefer a positive first edge on the
  // (unreachable) tie.
  int s0 = 1;
  int s1 = r01 > 0 ? 1 : -1;
  int s2 = r02 > 0 ? 1 : -1;
  const int negs = (s0 < 0) + (s1 < 0) + (s2 < 0);
  if (negs > 3 - negs || (negs == 3 - negs && s0 < 0)) {
    s0 = -s0;
    s1 = -s1;
    s2 = -s2;
  }
  out.edge_rho = {s0 * m0, s1 * m1, s2 * m2};
  return out;
}

DecomposeResult decompose(const CorrelationMatrix& m, const Stage1Config& cfg) {
  validate_cfg(cfg);
  const int n = m.n();
  if (n < 3)
    throw TooSmallError("decomposition needs at least 3 variables, got " +
                        std::to_string(n));

  DecomposeResult result;
  result.trace.n = n;
  result.trace.cfg = cfg;
  if (n == 3) {
    result.trace.star = true;
    result.tree = star_decompose_3(m).tree;
    return result;
  }

  ForestState state = ForestState::initial(n);
  QuadTable tab(m);
  int guard = 0;
  while (!state.done()) {
    if (++guard > n)
      throw StuckStateError("combination loop exceeded its step budget");
    std::vector<Candidate> cands = enumerate_candidates(state, m, cfg, tab);
    if (cands.empty())
      throw StuckStateError("no legal combination available before completion");
    const Candidate chosen = select_candidate(cands, cfg);
    state = apply_candidate(state, chosen);

    Stage1Step step;
    step.chosen = chosen;
    step.new_tree_id = state.next_hidden() - 1;
    step.independent_after.assign(state.independent().begin(), state.independent().end());
    for (const auto& [id, t] : state.trees())
      step.trees_after.emplace_back(id, t.leaf_vars());
    result.trace.steps.push_back(std::move(step));
  }
  result.trace.quad_lookups = tab.lookups();
  result.trace.quad_computes = tab.computes();
  result.tree = state.trees().begin()->second;
  return result;
}

}  // namespace latree
