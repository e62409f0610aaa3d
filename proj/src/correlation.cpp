#include "latree/correlation.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>

#include "latree/error.hpp"
#include "latree/util.hpp"

namespace latree {

namespace {

constexpr double kTol = 1e-12;

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& tok, const std::string& context) {
  const char* s = tok.c_str();
  char* end = nullptr;
  double v = std::strtod(s, &end);
  while (end != nullptr && (*end == ' ' || *end == '\t')) ++end;
  if (end == s || (end != nullptr && *end != '\0'))
    throw ParseError("cannot parse number '" + tok + "' in " + context);
  return v;
}

}  // namespace

SampleTable SampleTable::from_rows(std::vector<std::vector<std::uint8_t>> rows) {
  SampleTable t;
  if (rows.empty()) throw ShapeError("sample table has no rows");
  t.cols_ = static_cast<int>(rows.front().size());
  if (t.cols_ == 0) throw ShapeError("sample table has no columns");
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (static_cast<int>(rows[r].size()) != t.cols_)
      throw ShapeError("sample row " + std::to_string(r) + " has " +
                       std::to_string(rows[r].size()) + " values, expected " +
                       std::to_string(t.cols_));
    for (std::uint8_t v : rows[r])
      if (v > 1)
        throw ShapeError("sample row " + std::to_string(r) +
                         " contains a value other than 0/1");
  }
  t.data_ = std::move(rows);
  return t;
}

CorrelationMatrix::CorrelationMatrix(Eigen::MatrixXd rho, Eigen::VectorXd marginals)
    : rho_(std::move(rho)), marginals_(std::move(marginals)) {
  const auto n = rho_.rows();
  if (n != rho_.cols())
    throw ShapeError("correlation matrix is " + std::to_string(n) + "x" +
                     std::to_string(rho_.cols()) + ", expected square");
  if (n < 2) throw TooSmallError("correlation matrix needs at least 2 variables");
  if (marginals_.size() != n)
    throw ShapeError("got " + std::to_string(marginals_.size()) +
                     " marginals for " + std::to_string(n) + " variables");
  for (Eigen::Index i = 0; i < n; ++i) {
    double p = marginals_(i);
    if (!std::isfinite(p) || p <= 0.0 || p >= 1.0)
      throw DegenerateVariableError("marginal of variable " + std::to_string(i) +
                                    " is " + util::format_double(p) +
                                    ", must lie strictly inside (0, 1)");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(rho_(i, i) - 1.0) > kTol)
      throw OutOfRangeError("diagonal entry (" + std::to_string(i) + "," +
                            std::to_string(i) + ") is " +
                            util::format_double(rho_(i, i)) + ", expected 1");
    rho_(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double a = rho_(i, j), b = rho_(j, i);
      if (!std::isfinite(a) || !std::isfinite(b))
        throw OutOfRangeError("non-finite correlation at (" + std::to_string(i) +
                              "," + std::to_string(j) + ")");
      if (std::abs(a - b) > kTol)
        throw AsymmetricMatrixError("entries (" + std::to_string(i) + "," +
                                    std::to_string(j) + ")=" + util::format_double(a) +
                                    " and (" + std::to_string(j) + "," +
                                    std::to_string(i) + ")=" + util::format_double(b) +
                                    " differ by more than 1e-12");
      double v = 0.5 * (a + b);
      if (std::abs(v) > 1.0 + kTol)
        throw OutOfRangeError("correlation (" + std::to_string(i) + "," +
                              std::to_string(j) + ")=" + util::format_double(v) +
                              " lies outside [-1, 1]");
      if (std::abs(v) >= 1.0 - kTol) {
        v = (v > 0) ? 1.0 : -1.0;
        unit_offdiagonal_.emplace_back(static_cast<int>(i), static_cast<int>(j));
      }
      rho_(i, j) = rho_(j, i) = v;
    }
  }
}

CorrelationMatrix compute_correlations(const SampleTable& samples, double laplace) {
  if (laplace < 0.0) throw InputError("laplace smoothing count must be >= 0");
  const int n = samples.columns();
  const int rows = samples.rows();
  if (rows < 2) throw ShapeError("need at least 2 sample rows to estimate correlations");

  std::vector<long long> ones(n, 0);
  for (int r = 0; r < rows; ++r)
    for (int i = 0; i < n; ++i) ones[i] += samples.at(r, i);
  for (int i = 0; i < n; ++i)
    if (ones[i] == 0 || ones[i] == rows)
      throw DegenerateVariableError("column " + std::to_string(i) +
                                    " is constant; its correlations are undefined");

  const double denom = rows + 4.0 * laplace;
  Eigen::VectorXd p(n);
  for (int i = 0; i < n; ++i) p(i) = (ones[i] + 2.0 * laplace) / denom;

  Eigen::MatrixXd rho = Eigen::MatrixXd::Identity(n, n);
  for (int i = 0; i < n; ++i) {
    const double si = std::sqrt(p(i) * (1.0 - p(i)));
    for (int j = i + 1; j < n; ++j) {
      long long n11 = 0;
      for (int r = 0; r < rows; ++r)
        n11 += static_cast<long long>(samples.at(r, i)) & samples.at(r, j);
      const double p11 = (n11 + laplace) / denom;
      const double sj = std::sqrt(p(j) * (1.0 - p(j)));
      double v = (p11 - p(i) * p(j)) / (si * sj);
      // Empirical/smoothed correlations are bounded by 1; trim fp overshoot.
      if (v > 1.0) v = 1.0;
      if (v < -1.0) v = -1.0;
      rho(i, j) = rho(j, i) = v;
    }
  }
  return CorrelationMatrix(std::move(rho), std::move(p));
}

SampleTable load_samples(const std::string& path) {
  std::istringstream in(util::read_file(path));
  std::vector<std::vector<std::uint8_t>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto toks = split_csv(line);
    std::vector<std::uint8_t> row;
    row.reserve(toks.size());
    bool numeric = true;
    for (const auto& t : toks) {
      std::string s = t;
      // trim spaces
      while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.erase(s.begin());
      while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.pop_back();
      if (s == "0") {
        row.push_back(0);
      } else if (s == "1") {
        row.push_back(1);
      } else {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (rows.empty()) continue;  // header row
      throw ParseError("non-binary value on line " + std::to_string(lineno) +
                       " of '" + path + "'");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("no sample rows found in '" + path + "'");
  return SampleTable::from_rows(std::move(rows));
}

CorrelationMatrix load_matrix(const std::string& path) {
  std::istringstream in(util::read_file(path));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  if (lines.empty()) throw ParseError("'" + path + "' is empty");
  long n_raw = 0;
  try {
    std::size_t used = 0;
    n_raw = std::stol(lines[0], &used);
    if (used != lines[0].size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw ParseError("first line of '" + path + "' must be the variable count, got '" +
                     lines[0] + "'");
  }
  if (n_raw < 3)
    throw TooSmallError("matrix file declares n=" + std::to_string(n_raw) +
                        "; decomposition needs n >= 3");
  const int n = static_cast<int>(n_raw);
  if (static_cast<int>(lines.size()) != n + 2)
    throw ParseError("'" + path + "' has " + std::to_string(lines.size()) +
                     " non-empty lines, expected " + std::to_string(n + 2) +
                     " (count, " + std::to_string(n) + " matrix rows, marginals)");

  Eigen::MatrixXd rho(n, n);
  for (int i = 0; i < n; ++i) {
    auto toks = split_csv(lines[1 + i]);
    if (static_cast<int>(toks.size()) != n)
      throw ParseError("matrix row " + std::to_string(i) + " in '" + path + "' has " +
                       std::to_string(toks.size()) + " values, expected " +
                       std::to_string(n));
    for (int j = 0; j < n; ++j)
      rho(i, j) = parse_double(toks[j], "matrix row " + std::to_string(i));
  }
  auto mtoks = split_csv(lines[n + 1]);
  if (static_cast<int>(mtoks.size()) != n)
    throw ParseError("marginal line in '" + path + "' has " +
                     std::to_string(mtoks.size()) + " values, expected " +
                     std::to_string(n));
  Eigen::VectorXd p(n);
  for (int j = 0; j < n; ++j) p(j) = parse_double(mtoks[j], "marginal line");
  return CorrelationMatrix(std::move(rho), std::move(p));
}

std::string format_matrix(const CorrelationMatrix& m) {
  std::ostringstream out;
  const int n = m.n();
  out << n << "\n";
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (j) out << ",";
      out << util::format_double(m.rho(i, j));
    }
    out << "\n";
  }
  for (int j = 0; j < n; ++j) {
    if (j) out << ",";
    out << util::format_double(m.marginal(j));
  }
  out << "\n";
  return out.str();
}

void save_matrix(const CorrelationMatrix& m, const std::string& path) {
  util::atomic_write_file(path, format_matrix(m));
}

}  // namespace latree
