#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace latree {

/// A rectangular table of binary observations: one row per sample, one
/// column per observed variable. Values are strictly 0/1.
class SampleTable {
 public:
  SampleTable() = default;

  /// Validates rectangularity and 0/1 entries. Throws ShapeError otherwise.
  static SampleTable from_rows(std::vector<std::vector<std::uint8_t>> rows);

  int columns() const { return cols_; }
  int rows() const { return static_cast<int>(data_.size()); }
  std::uint8_t at(int row, int col) const { return data_[row][col]; }
  const std::vector<std::vector<std::uint8_t>>& data() const { return data_; }

 private:
  int cols_ = 0;
  std::vector<std::vector<std::uint8_t>> data_;
};

/// Pearson correlation matrix over n binary variables, together with the
/// marginal probabilities p_i = P(x_i = 1). Immutable once constructed.
///
/// Construction validates: square shape, n >= 2, symmetry and unit diagonal
/// within 1e-12, all |entries| <= 1 within 1e-12, marginals strictly inside
/// (0, 1). Off-diagonal entries within 1e-12 of +/-1 are clamped to exactly
/// +/-1 and reported via unit_offdiagonal().
class CorrelationMatrix {
 public:
  CorrelationMatrix(Eigen::MatrixXd rho, Eigen::VectorXd marginals);

  int n() const { return static_cast<int>(rho_.rows()); }
  double rho(int i, int j) const { return rho_(i, j); }
  double marginal(int i) const { return marginals_(i); }
  const Eigen::MatrixXd& matrix() const { return rho_; }
  const Eigen::VectorXd& marginals() const { return marginals_; }

  /// Variable pairs (i < j) whose correlation was clamped to exactly +/-1.
  const std::vector<std::pair<int, int>>& unit_offdiagonal() const {
    return unit_offdiagonal_;
  }

 private:
  Eigen::MatrixXd rho_;
  Eigen::VectorXd marginals_;
  std::vector<std::pair<int, int>> unit_offdiagonal_;
};

/// Estimate marginals and pairwise correlations from 0/1 samples.
///
/// `laplace` adds that count to each cell of every pairwise 2x2 contingency
/// table before normalizing (so marginals use c_i + 2*laplace out of
/// rows + 4*laplace; the marginal implied for variable i is the same no
/// matter which partner j it is paired with). laplace == 0 reproduces the
/// plain empirical estimator.
///
/// Throws ShapeError for fewer than 2 rows, InputError for laplace < 0, and
/// DegenerateVariableError if any column is constant.
CorrelationMatrix compute_correlations(const SampleTable& samples, double laplace = 0.0);

/// Parse a 0/1 sample CSV (comma-separated, optional non-numeric header row).
SampleTable load_samples(const std::string& path);

/// Load a correlation matrix file: first line n, then n comma-separated
/// matrix rows, then one line of n marginals. Requires n >= 3 here (the
/// decomposition floor). Throws ParseError / TooSmallError / the
/// CorrelationMatrix constructor's validation errors.
CorrelationMatrix load_matrix(const std::string& path);

/// Serialize in the load_matrix format with round-trippable doubles.
std::string format_matrix(const CorrelationMatrix& m);

/// Atomically write format_matrix(m) to `path`.
void save_matrix(const CorrelationMatrix& m, const std::string& path);

}  // namespace latree
