#pragma once

// Bounded revised simplex (primal and dual) over a sparse LU basis
// factorization with product-form eta updates.
//
// Every row r carries a logical column s_r = a_r x with bounds [lo_r, hi_r],
// so the working system is [A  -I] z = 0 with all columns boxed.
// Rows may be appended after a solve; the basis stays valid and dual
// feasible, which is what branch-and-bound and cutting planes need.

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

namespace coplan::mp::detail {

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

class LpEngine {
 public:
  explicit LpEngine(int num_structural);

  int num_structural() const { return n_; }
  int num_rows() const { return m_; }

  void set_cost(int j, double cost);
  void set_bounds(int j, double lo, double hi);
  double lower(int j) const { return lo_[static_cast<std::size_t>(j)]; }
  double upper(int j) const { return hi_[static_cast<std::size_t>(j)]; }
  int add_row(const std::vector<std::pair<int, double>>& coefs, double lo, double hi);

  LpStatus solve(long iteration_limit = 200000);

  double objective() const;
  double value(int j) const { return x_[static_cast<std::size_t>(j)]; }
  double row_activity(int r) const { return x_[static_cast<std::size_t>(n_ + r)]; }
  std::vector<double> structural_values() const;
  long iterations() const { return total_iterations_; }

 private:
  enum class Status : std::uint8_t { Basic, AtLower, AtUpper, AtZero };

  // Either a column replacement (eta matrix) or a row appended after the
  // factorization, whose logical enters the basis at position `row`.
  struct Eta {
    int row;
    std::vector<std::pair<int, double>> entries;  // eta column, or the new row over basic positions
    bool border = false;
  };

  std::size_t col_count() const { return static_cast<std::size_t>(n_ + m_); }
  bool is_logical(int j) const { return j >= n_; }
  bool is_fixed(int j) const;
  double nonbasic_value(int j, Status s) const;
  void place_nonbasic(int j);

  void crash_basis();
  bool refactor();
  void ftran(Eigen::VectorXd& v) const;
  void btran(Eigen::VectorXd& v) const;
  void column_of(int j, Eigen::VectorXd& out) const;
  double dot_column(const Eigen::VectorXd& rho, int j) const;
  void compute_primal();
  void compute_duals(const Eigen::VectorXd& basic_costs);
  void pivot(int row, int entering, const Eigen::VectorXd& alpha);
  double primal_infeasibility(int j) const;
  bool dual_feasible() const;

  LpStatus primal_simplex(long& budget);
  LpStatus dual_simplex(long& budget);

  int n_ = 0;
  int m_ = 0;
  std::vector<std::vector<std::pair<int, double>>> cols_;  // structural only
  std::vector<double> lo_, hi_, cost_, x_, d_;
  std::vector<Status> status_;
  std::vector<int> head_;  // basic column per row position
  std::vector<int> pos_;   // row position per column, -1 when nonbasic

  mutable Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
  std::vector<Eta> etas_;
  int factor_rows_ = 0;
  bool factor_valid_ = false;
  bool has_basis_ = false;
  long total_iterations_ = 0;
};

}  // namespace coplan::mp::detail
