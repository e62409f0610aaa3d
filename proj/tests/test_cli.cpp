// End-to-end checks of the command-line tool.  These run the real binary via
// std::system, so they are skipped unless the LATREE_CLI environment variable
// points at it (ctest sets it; a bare ./latree_tests run skips the suite).
#include <doctest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "latree/tree.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* cli_path() { return std::getenv("LATREE_CLI"); }

// Run a command line against the binary, discarding output; returns the exit
// code (or -1 if the shell could not be spawned).
int run(const std::string& args) {
  const std::string cmd = std::string("\"") + cli_path() + "\" " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  if (rc == -1) return -1;
  return WEXITSTATUS(rc);
}

// Same, but capture combined stdout/stderr into a string.
int run_capture(const std::string& args, std::string* out) {
  const fs::path cap = fs::temp_directory_path() / "latree_cli_capture.txt";
  const std::string cmd =
      std::string("\"") + cli_path() + "\" " + args + " > \"" + cap.string() + "\" 2>&1";
  const int rc = std::system(cmd.c_str());
  std::ifstream in(cap);
  std::ostringstream ss;
  ss << in.rdbuf();
  *out = ss.str();
  if (rc == -1) return -1;
  return WEXITSTATUS(rc);
}

// A clean scratch directory under the system temp dir.
fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "latree_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json slurp_json(const fs::path& p) { return json::parse(slurp(p)); }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("decompose writes tree, trace, params, and dot files") {
  if (!cli_path()) return;
  const fs::path sim = fresh_dir("full_sim");
  const fs::path out = fresh_dir("full_out");

  REQUIRE(run("simulate --n 6 --seed 3 --rows 0 --out-dir \"" + sim.string() + "\"") == 0);
  REQUIRE(fs::exists(sim / "model.json"));
  REQUIRE(fs::exists(sim / "matrix.csv"));
  CHECK(!fs::exists(sim / "samples.csv"));  // --rows 0 suppresses sampling

  std::string text;
  const int code = run_capture("decompose --input \"" + (sim / "matrix.csv").string() +
                                   "\" --out-dir \"" + out.string() + "\"",
                               &text);
  REQUIRE(code == 0);
  CHECK(text.find("decomposed 6 variables") != std::string::npos);

  // tree.json must load back through the library and cover all six leaves.
  const latree::DecompTree tree = latree::DecompTree::from_json(slurp_json(out / "tree.json"));
  CHECK(tree.leaf_vars() == std::vector<int>{0, 1, 2, 3, 4, 5});

  const json trace = slurp_json(out / "trace.json");
  REQUIRE(trace.contains("steps"));
  CHECK(trace.at("steps").size() >= 1);

  const json params = slurp_json(out / "params.json");
  CHECK(params.contains("tree"));
  CHECK(params.contains("edges"));
  CHECK(params.contains("hidden"));
  CHECK(params.contains("diagnostics"));

  const std::string dot = slurp(out / "tree.dot");
  CHECK(dot.find("graph") != std::string::npos);
  CHECK(dot.find("x0") != std::string::npos);
}

TEST_CASE("decompose --skip-fit and --no-trace suppress their outputs") {
  if (!cli_path()) return;
  const fs::path sim = fresh_dir("skip_sim");
  const fs::path out = fresh_dir("skip_out");

  REQUIRE(run("simulate --n 5 --seed 11 --rows 0 --out-dir \"" + sim.string() + "\"") == 0);
  REQUIRE(run("decompose --input \"" + (sim / "matrix.csv").string() +
              "\" --out-dir \"" + out.string() + "\" --skip-fit --no-trace") == 0);

  CHECK(fs::exists(out / "tree.json"));
  CHECK(fs::exists(out / "tree.dot"));
  CHECK(!fs::exists(out / "params.json"));
  CHECK(!fs::exists(out / "trace.json"));
}

TEST_CASE("repeated runs are byte-identical") {
  if (!cli_path()) return;
  const fs::path sim_a = fresh_dir("det_sim_a");
  const fs::path sim_b = fresh_dir("det_sim_b");
  const std::string sim_args = "simulate --n 7 --seed 29 --rows 200 --eps 0.002";
  REQUIRE(run(sim_args + " --out-dir \"" + sim_a.string() + "\"") == 0);
  REQUIRE(run(sim_args + " --out-dir \"" + sim_b.string() + "\"") == 0);
  for (const char* name : {"model.json", "matrix.csv", "samples.csv"})
    CHECK(slurp(sim_a / name) == slurp(sim_b / name));

  const fs::path out_a = fresh_dir("det_out_a");
  const fs::path out_b = fresh_dir("det_out_b");
  const std::string dec_args = "decompose --input \"" + (sim_a / "matrix.csv").string() + "\"";
  REQUIRE(run(dec_args + " --out-dir \"" + out_a.string() + "\"") == 0);
  REQUIRE(run(dec_args + " --out-dir \"" + out_b.string() + "\"") == 0);
  for (const char* name : {"tree.json", "trace.json", "params.json", "tree.dot"})
    CHECK(slurp(out_a / name) == slurp(out_b / name));
}

TEST_CASE("simulate --eps perturbs the matrix by at most eps") {
  if (!cli_path()) return;
  const fs::path clean = fresh_dir("eps_clean");
  const fs::path noisy = fresh_dir("eps_noisy");
  REQUIRE(run("simulate --n 6 --seed 17 --rows 0 --out-dir \"" + clean.string() + "\"") == 0);
  REQUIRE(run("simulate --n 6 --seed 17 --rows 0 --eps 0.01 --out-dir \"" +
              noisy.string() + "\"") == 0);

  // Parse both matrix files (count line, n matrix rows, marginals line) and
  // compare the matrix cells.
  const auto parse = [](const fs::path& p) {
    std::vector<std::vector<double>> rows;
    std::ifstream in(p);
    std::string line;
    while (std::getline(in, line)) {
      std::vector<double> row;
      std::istringstream ls(line);
      std::string cell;
      while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
      rows.push_back(std::move(row));
    }
    REQUIRE(rows.size() == 8);  // count, 6 rows, marginals
    return std::vector<std::vector<double>>(rows.begin() + 1, rows.begin() + 7);
  };
  const auto a = parse(clean / "matrix.csv");
  const auto b = parse(noisy / "matrix.csv");
  bool moved = false;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      const double d = std::abs(a[i][j] - b[i][j]);
      CHECK(d <= 0.01 + 1e-12);
      if (d > 1e-15) moved = true;
    }
  CHECK(moved);
  CHECK(b[2][2] == 1.0);  // diagonal stays exact
}

TEST_CASE("evaluate reports a topology match with edge recovery") {
  if (!cli_path()) return;
  const fs::path sim = fresh_dir("eval_sim");
  const fs::path out = fresh_dir("eval_out");
  REQUIRE(run("simulate --n 5 --seed 7 --rows 0 --out-dir \"" + sim.string() + "\"") == 0);
  REQUIRE(run("decompose --input \"" + (sim / "matrix.csv").string() +
              "\" --out-dir \"" + out.string() + "\"") == 0);

  // Against the bare tree: verdict only.
  std::string text;
  REQUIRE(run_capture("evaluate --model \"" + (sim / "model.json").string() +
                          "\" --tree \"" + (out / "tree.json").string() + "\"",
                      &text) == 0);
  CHECK(text.find("topology: match") != std::string::npos);

  // Against the fitted parameters: per-edge table and tolerance verdicts.
  REQUIRE(run_capture("evaluate --model \"" + (sim / "model.json").string() +
                          "\" --tree \"" + (out / "params.json").string() + "\"",
                      &text) == 0);
  CHECK(text.find("topology: match") != std::string::npos);
  CHECK(text.find("edge recovery") != std::string::npos);
  CHECK(text.find("max edge magnitude error:") != std::string::npos);
  CHECK(text.find("(within tolerance)") != std::string::npos);
  CHECK(text.find("max leaf marginal error:") != std::string::npos);
}

TEST_CASE("input problems exit with code 2") {
  if (!cli_path()) return;
  const fs::path dir = fresh_dir("bad_inputs");

  SUBCASE("missing input file") {
    CHECK(run("decompose --input \"" + (dir / "nope.csv").string() + "\" --out-dir \"" +
              dir.string() + "\"") == 2);
  }
  SUBCASE("matrix smaller than three variables") {
    std::ofstream(dir / "tiny.csv") << "2\n1,0.5\n0.5,1\n0.5,0.5\n";
    CHECK(run("decompose --input \"" + (dir / "tiny.csv").string() + "\" --out-dir \"" +
              dir.string() + "\"") == 2);
  }
  SUBCASE("simulate rejects n below 3") {
    CHECK(run("simulate --n 2 --seed 1 --out-dir \"" + dir.string() + "\"") == 2);
  }
  SUBCASE("unknown flag") {
    CHECK(run("decompose --bogus") == 2);
  }
  SUBCASE("evaluate leaf-count mismatch") {
    const fs::path sim5 = fresh_dir("mismatch_sim5");
    const fs::path sim6 = fresh_dir("mismatch_sim6");
    const fs::path out5 = fresh_dir("mismatch_out5");
    REQUIRE(run("simulate --n 5 --seed 2 --rows 0 --out-dir \"" + sim5.string() + "\"") == 0);
    REQUIRE(run("simulate --n 6 --seed 2 --rows 0 --out-dir \"" + sim6.string() + "\"") == 0);
    REQUIRE(run("decompose --input \"" + (sim5 / "matrix.csv").string() +
                "\" --out-dir \"" + out5.string() + "\"") == 0);
    CHECK(run("evaluate --model \"" + (sim6 / "model.json").string() + "\" --tree \"" +
              (out5 / "tree.json").string() + "\"") == 2);
  }
}

TEST_CASE("numeric failures exit with code 3") {
  if (!cli_path()) return;
  const fs::path dir = fresh_dir("numeric_fail");
  // A 3x3 correlation matrix whose off-diagonal product is negative cannot be
  // realized by any single hidden cause.
  std::ofstream(dir / "star.csv") << "3\n1,-0.5,0.5\n-0.5,1,0.5\n0.5,0.5,1\n0.5,0.5,0.5\n";
  CHECK(run("decompose --input \"" + (dir / "star.csv").string() + "\" --out-dir \"" +
            dir.string() + "\"") == 3);
}

}  // TEST_SUITE("cli")
