// latree: reconstruct latent binary-tree models from pairwise correlations.
//
//   latree decompose --input matrix.csv --format matrix --out-dir out/
//   latree simulate  --n 15 --seed 7 --out-dir out/
//   latree evaluate  --model model.json --tree tree.json
//
// Exit codes: 0 success, 2 invalid input, 3 numeric failure.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <string>

#include "latree/correlation.hpp"
#include "latree/decompose.hpp"
#include "latree/error.hpp"
#include "latree/fit.hpp"
#include "latree/quartet.hpp"
#include "latree/synth.hpp"
#include "latree/tree.hpp"
#include "latree/util.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;

struct DecomposeArgs {
  std::string input;
  std::string format = "matrix";  // matrix | samples
  std::string out_dir = ".";
  double laplace = 0.0;
  std::string error_mode = "max";
  std::string tie_policy = "precedence";
  double epsilon_tie = 1e-12;
  double rho_min = 1e-6;
  std::string simplify = "suppress";  // suppress | flatten
  bool skip_fit = false;
  bool force_trace = false;  // --trace: always write trace.json
  bool no_trace = false;     // --no-trace: never write it
};

struct SimulateArgs {
  int n = 0;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  double rho_lo = 0.3;
  double rho_hi = 0.9;
  double neg_prob = 0.0;
  int rows = 1000;
  double eps = 0.0;
};

struct EvaluateArgs {
  std::string model_path;
  std::string tree_path;
  double rho_tol = 1e-8;
};

void write_json(const std::string& path, const nlohmann::json& j) {
  latree::util::atomic_write_file(path, j.dump(2) + "\n");
}

int run_decompose(const DecomposeArgs& args) {
  latree::CorrelationMatrix m = [&] {
    if (args.format == "matrix") return latree::load_matrix(args.input);
    if (args.format == "samples")
      return latree::compute_correlations(latree::load_samples(args.input), args.laplace);
    throw latree::InputError("unknown --format '" + args.format + "' (matrix|samples)");
  }();
  if (m.n() < 3)
    throw latree::TooSmallError("decomposition needs at least 3 variables");

  latree::Stage1Config cfg;
  cfg.error_mode = latree::error_mode_from_string(args.error_mode);
  cfg.tie_policy = latree::tie_policy_from_string(args.tie_policy);
  cfg.epsilon_tie = args.epsilon_tie;

  std::filesystem::create_directories(args.out_dir);
  const std::filesystem::path out(args.out_dir);

  const latree::DecomposeResult result = latree::decompose(m, cfg);
  const auto policy = args.simplify == "flatten"
                          ? latree::DecompTree::Simplify::FlattenAll
                          : latree::DecompTree::Simplify::SuppressDegree2;
  if (args.simplify != "suppress" && args.simplify != "flatten")
    throw latree::InputError("unknown --simplify '" + args.simplify +
                             "' (suppress|flatten)");
  const latree::DecompTree simplified = result.tree.simplified(policy);

  write_json((out / "tree.json").string(), simplified.to_json());
  latree::util::atomic_write_file((out / "tree.dot").string(), simplified.to_dot());
  // the trace grows as ~n^2 candidate snapshots, so it is opt-in for large n
  const bool emit_trace = args.force_trace || (!args.no_trace && m.n() <= 64);
  if (emit_trace) write_json((out / "trace.json").string(), result.trace.to_json());

  if (m.n() == 3 && !args.skip_fit) {
    // Closed-form star: parameters come from the three-correlation formulas.
    const latree::StarDecomposition star = latree::star_decompose_3(m);
    const latree::FitResult fr = latree::fit_tree(m, star.tree, args.rho_min);
    write_json((out / "params.json").string(), latree::fit_result_json(fr, m));
  } else if (!args.skip_fit) {
    const latree::FitResult fr = latree::fit_tree(m, simplified, args.rho_min);
    write_json((out / "params.json").string(), latree::fit_result_json(fr, m));
  }
  std::cout << "decomposed " << m.n() << " variables in "
            << result.trace.steps.size() << " steps; outputs in " << args.out_dir
            << "\n";
  return kExitOk;
}

int run_simulate(const SimulateArgs& args) {
  latree::GeneratorConfig cfg;
  cfg.rho_lo = args.rho_lo;
  cfg.rho_hi = args.rho_hi;
  cfg.neg_prob = args.neg_prob;
  const latree::GeneratorModel model = latree::generate_model(args.n, args.seed, cfg);
  latree::CorrelationMatrix m = latree::exact_matrix(model);
  if (args.eps > 0.0) m = latree::perturb(m, args.eps, args.seed + 1);

  std::filesystem::create_directories(args.out_dir);
  const std::filesystem::path out(args.out_dir);
  write_json((out / "model.json").string(), model.to_json());
  latree::save_matrix(m, (out / "matrix.csv").string());
  if (args.rows > 0) {
    const latree::SampleTable samples = latree::sample_data(model, args.rows, args.seed + 2);
    std::string csv;
    csv.reserve(static_cast<std::size_t>(samples.rows()) * (2 * args.n));
    for (int r = 0; r < samples.rows(); ++r) {
      for (int c = 0; c < samples.columns(); ++c) {
        if (c) csv += ',';
        csv += static_cast<char>('0' + samples.at(r, c));
      }
      csv += '\n';
    }
    latree::util::atomic_write_file((out / "samples.csv").string(), csv);
  }
  std::cout << "simulated n=" << args.n << " seed=" << args.seed << "; outputs in "
            << args.out_dir << "\n";
  return kExitOk;
}

int run_evaluate(const EvaluateArgs& args) {
  const latree::GeneratorModel model = latree::GeneratorModel::from_json(
      nlohmann::json::parse(latree::util::read_file(args.model_path)));
  nlohmann::json jresult;
  try {
    jresult = nlohmann::json::parse(latree::util::read_file(args.tree_path));
  } catch (const nlohmann::json::exception& e) {
    throw latree::ParseError("cannot parse '" + args.tree_path + "': " + e.what());
  }
  // Accept either a bare tree.json or a params.json that embeds one.
  const bool has_params = jresult.contains("tree") && jresult.contains("edges");
  const latree::DecompTree tree =
      latree::DecompTree::from_json(has_params ? jresult.at("tree") : jresult);

  if (static_cast<int>(tree.leaf_vars().size()) != model.n)
    throw latree::ShapeError("tree has " + std::to_string(tree.leaf_vars().size()) +
                             " leaves but the model has " + std::to_string(model.n));

  const latree::DecompTree truth = model.tree.simplified();
  const bool match = truth.equivalent_to(tree);
  std::cout << "topology: " << (match ? "match" : "mismatch") << "\n";

  if (match && has_params) {
    // Compare per-edge magnitudes via the splits that identify edges across
    // equivalent trees (hidden-node ids are arbitrary, splits are not).
    std::map<std::pair<int, int>, double> fitted;
    for (const auto& je : jresult.at("edges"))
      fitted[{je.at("u").get<int>(), je.at("v").get<int>()}] = je.at("rho").get<double>();
    const auto truth_splits = truth.edge_splits();
    const auto tree_splits = tree.edge_splits();
    std::map<std::pair<int, int>, double> truth_rho;
    for (std::size_t e = 0; e < model.edges.size(); ++e)
      truth_rho[model.edges[e]] = model.edge_rho[e];

    const auto canon = [](std::pair<int, int> e) {
      return std::make_pair(std::min(e.first, e.second), std::max(e.first, e.second));
    };
    double worst = 0.0;
    bool comparable = true;
    std::cout << "edge recovery (|rho| by identifying leaf split):\n";
    for (const auto& [split, edge] : truth_splits) {
      auto it = tree_splits.find(split);
      auto tr = it == tree_splits.end() ? truth_rho.end() : truth_rho.find(canon(edge));
      auto fr = it == tree_splits.end() ? fitted.end() : fitted.find(canon(it->second));
      if (tr == truth_rho.end() || fr == fitted.end()) {
        comparable = false;
        break;
      }
      const double err = std::abs(std::abs(tr->second) - std::abs(fr->second));
      worst = std::max(worst, err);
      std::cout << "  {";
      for (std::size_t k = 0; k < split.size(); ++k)
        std::cout << (k ? "," : "") << split[k];
      std::cout << "}: true " << latree::util::format_double(tr->second) << ", fitted "
                << latree::util::format_double(fr->second) << ", abs error "
                << latree::util::format_double(err) << "\n";
    }
    if (comparable) {
      std::cout << "max edge magnitude error: " << latree::util::format_double(worst)
                << (worst <= args.rho_tol ? " (within tolerance)" : " (above tolerance)")
                << "\n";
    } else {
      std::cout << "edges not comparable across trees\n";
    }

    if (jresult.contains("leaf_marginals")) {
      double pworst = 0.0;
      const auto& marg = jresult.at("leaf_marginals");
      for (int i = 0; i < model.n && i < static_cast<int>(marg.size()); ++i)
        pworst = std::max(pworst,
                          std::abs(marg[i].get<double>() - model.marginal.at(i)));
      std::cout << "max leaf marginal error: " << latree::util::format_double(pworst)
                << "\n";
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"latent binary tree decomposition of pairwise correlations"};
  app.require_subcommand(1);

  DecomposeArgs dargs;
  CLI::App* dec = app.add_subcommand("decompose", "reconstruct a tree from data");
  dec->add_option("--input", dargs.input, "correlation matrix or 0/1 sample CSV")
      ->required();
  dec->add_option("--format", dargs.format, "input kind: matrix|samples");
  dec->add_option("--out-dir", dargs.out_dir, "directory for the result files");
  dec->add_option("--laplace", dargs.laplace, "additive smoothing for sample counts");
  dec->add_option("--error-mode", dargs.error_mode, "max|mean");
  dec->add_option("--tie-policy", dargs.tie_policy, "precedence|finest_quad|lexicographic");
  dec->add_option("--epsilon-tie", dargs.epsilon_tie, "error tie width");
  dec->add_option("--rho-min", dargs.rho_min, "exclude |rho| below this from the fit");
  dec->add_option("--simplify", dargs.simplify, "suppress|flatten");
  dec->add_flag("--skip-fit", dargs.skip_fit, "emit only topology and trace");
  auto* tr = dec->add_flag("--trace", dargs.force_trace,
                           "always write trace.json (default: only for n <= 64)");
  dec->add_flag("--no-trace", dargs.no_trace, "never write trace.json")->excludes(tr);

  SimulateArgs sargs;
  CLI::App* sim = app.add_subcommand("simulate", "draw a model and emit its data");
  sim->add_option("--n", sargs.n, "number of observed variables")->required();
  sim->add_option("--seed", sargs.seed, "generator seed")->required();
  sim->add_option("--out-dir", sargs.out_dir, "directory for the output files");
  sim->add_option("--rho-lo", sargs.rho_lo, "min edge correlation magnitude");
  sim->add_option("--rho-hi", sargs.rho_hi, "max edge correlation magnitude");
  sim->add_option("--neg-prob", sargs.neg_prob, "probability of a negative edge");
  sim->add_option("--rows", sargs.rows, "sample rows to draw (0 = none)");
  sim->add_option("--eps", sargs.eps, "uniform perturbation added to the matrix");

  EvaluateArgs eargs;
  CLI::App* ev = app.add_subcommand("evaluate", "compare a result against a model");
  ev->add_option("--model", eargs.model_path, "model.json from simulate")->required();
  ev->add_option("--tree", eargs.tree_path, "tree.json or params.json to check")
      ->required();
  ev->add_option("--rho-tol", eargs.rho_tol, "edge magnitude tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (dec->parsed()) return run_decompose(dargs);
    if (sim->parsed()) return run_simulate(sargs);
    if (ev->parsed()) return run_evaluate(eargs);
    std::cerr << "no subcommand given\n";
    return kExitInput;
  } catch (const latree::InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const latree::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
