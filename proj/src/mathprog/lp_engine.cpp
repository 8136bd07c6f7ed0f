#include "mathprog/lp_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace coplan::mp::detail {

namespace {

constexpr double kInfinity = std::numeric_limits<double>::infinity();
constexpr double kPrimalTol = 1e-9;
constexpr double kDualTol = 1e-9;
constexpr double kPivotTol = 1e-9;
constexpr std::size_t kMaxEtas = 64;

}  // namespace

LpEngine::LpEngine(int num_structural) : n_(num_structural) {
  const auto n = static_cast<std::size_t>(n_);
  cols_.resize(n);
  lo_.assign(n, 0.0);
  hi_.assign(n, kInfinity);
  cost_.assign(n, 0.0);
  x_.assign(n, 0.0);
  d_.assign(n, 0.0);
  status_.assign(n, Status::AtLower);
  pos_.assign(n, -1);
}

void LpEngine::set_cost(int j, double cost) {
  cost_[static_cast<std::size_t>(j)] = cost;
}

bool LpEngine::is_fixed(int j) const {
  const auto k = static_cast<std::size_t>(j);
  return hi_[k] - lo_[k] <= 0.0;
}

double LpEngine::nonbasic_value(int j, Status s) const {
  const auto k = static_cast<std::size_t>(j);
  switch (s) {
    case Status::AtLower: return lo_[k];
    case Status::AtUpper: return hi_[k];
    default: return 0.0;
  }
}

void LpEngine::place_nonbasic(int j) {
  const auto k = static_cast<std::size_t>(j);
  Status s = status_[k];
  if (s == Status::Basic) return;
  if (s == Status::AtLower && !std::isfinite(lo_[k])) s = Status::AtUpper;
  if (s == Status::AtUpper && !std::isfinite(hi_[k])) s = Status::AtLower;
  if (s == Status::AtLower && !std::isfinite(lo_[k])) s = Status::AtZero;
  if (s == Status::AtZero) {
    if (std::isfinite(lo_[k])) s = Status::AtLower;
    else if (std::isfinite(hi_[k])) s = Status::AtUpper;
  }
  status_[k] = s;
  x_[k] = nonbasic_value(j, s);
}

void LpEngine::set_bounds(int j, double lo, double hi) {
  const auto k = static_cast<std::size_t>(j);
  lo_[k] = lo;
  hi_[k] = hi;
  if (status_[k] != Status::Basic) {
    // Pick the side matching the reduced-cost sign so dual feasibility survives.
    if (d_[k] < 0.0 && std::isfinite(hi)) status_[k] = Status::AtUpper;
    else status_[k] = Status::AtLower;
    place_nonbasic(j);
  }
}

int LpEngine::add_row(const std::vector<std::pair<int, double>>& coefs, double lo, double hi) {
  const int r = m_++;
  for (const auto& [j, v] : coefs) {
    if (v != 0.0) cols_[static_cast<std::size_t>(j)].emplace_back(r, v);
  }
  lo_.push_back(lo);
  hi_.push_back(hi);
  cost_.push_back(0.0);
  x_.push_back(0.0);
  d_.push_back(0.0);
  status_.push_back(Status::Basic);
  const int col = n_ + r;
  if (has_basis_) {
    if (factor_valid_) {
      Eta border;
      border.row = r;
      border.border = true;
      for (const auto& [j, v] : coefs) {
        const int at = pos_[static_cast<std::size_t>(j)];
        if (v != 0.0 && at >= 0) border.entries.emplace_back(at, v);
      }
      etas_.push_back(std::move(border));
    }
    head_.push_back(col);
    pos_.push_back(r);
  } else {
    pos_.push_back(-1);
    status_.back() = Status::AtLower;
    factor_valid_ = false;
  }
  return r;
}

double LpEngine::objective() const {
  double obj = 0.0;
  for (int j = 0; j < n_; ++j) obj += cost_[static_cast<std::size_t>(j)] * x_[static_cast<std::size_t>(j)];
  return obj;
}

std::vector<double> LpEngine::structural_values() const {
  return {x_.begin(), x_.begin() + n_};
}

void LpEngine::crash_basis() {
  head_.assign(static_cast<std::size_t>(m_), 0);
  pos_.assign(col_count(), -1);
  for (int j = 0; j < n_; ++j) {
    auto k = static_cast<std::size_t>(j);
    if (status_[k] == Status::Basic) status_[k] = Status::AtLower;
    place_nonbasic(j);
  }
  for (int r = 0; r < m_; ++r) {
    const int col = n_ + r;
    head_[static_cast<std::size_t>(r)] = col;
    pos_[static_cast<std::size_t>(col)] = r;
    status_[static_cast<std::size_t>(col)] = Status::Basic;
  }
  has_basis_ = true;
  factor_valid_ = false;
}

bool LpEngine::refactor() {
  etas_.clear();
  factor_rows_ = m_;
  if (m_ == 0) {
    factor_valid_ = true;
    return true;
  }
  std::vector<Eigen::Triplet<double>> trips;
  for (int i = 0; i < m_; ++i) {
    const int j = head_[static_cast<std::size_t>(i)];
    if (is_logical(j)) {
      trips.emplace_back(j - n_, i, -1.0);
    } else {
      for (const auto& [r, v] : cols_[static_cast<std::size_t>(j)]) trips.emplace_back(r, i, v);
    }
  }
  Eigen::SparseMatrix<double> basis(m_, m_);
  basis.setFromTriplets(trips.begin(), trips.end());
  basis.makeCompressed();
  lu_.analyzePattern(basis);
  lu_.factorize(basis);
  factor_valid_ = lu_.info() == Eigen::Success;
  if (factor_valid_) {
    // Reject numerically singular factors.
    Eigen::VectorXd probe = Eigen::VectorXd::Ones(m_);
    Eigen::VectorXd sol = lu_.solve(probe);
    if (!sol.allFinite() || (basis * sol - probe).lpNorm<Eigen::Infinity>() > 1e-6) factor_valid_ = false;
  }
  return factor_valid_;
}

void LpEngine::ftran(Eigen::VectorXd& v) const {
  if (m_ == 0) return;
  if (factor_rows_ > 0) v.head(factor_rows_) = lu_.solve(v.head(factor_rows_)).eval();
  for (const Eta& e : etas_) {
    if (e.border) {
      double acc = -v[e.row];
      for (const auto& [i, a] : e.entries) acc += a * v[i];
      v[e.row] = acc;
      continue;
    }
    const double vr = v[e.row];
    if (vr == 0.0) continue;
    for (const auto& [i, eta] : e.entries) {
      if (i == e.row) continue;
      v[i] += eta * vr;
    }
    double pivot_entry = 0.0;
    for (const auto& [i, eta] : e.entries) {
      if (i == e.row) pivot_entry = eta;
    }
    v[e.row] = pivot_entry * vr;
  }
}

void LpEngine::btran(Eigen::VectorXd& v) const {
  if (m_ == 0) return;
  for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
    if (it->border) {
      const double yr = -v[it->row];
      v[it->row] = yr;
      for (const auto& [i, a] : it->entries) v[i] -= a * yr;
      continue;
    }
    double acc = 0.0;
    for (const auto& [i, eta] : it->entries) acc += v[i] * eta;
    v[it->row] = acc;
  }
  if (factor_rows_ > 0) v.head(factor_rows_) = lu_.transpose().solve(v.head(factor_rows_)).eval();
}

void LpEngine::column_of(int j, Eigen::VectorXd& out) const {
  out.setZero(m_);
  if (is_logical(j)) {
    out[j - n_] = -1.0;
  } else {
    for (const auto& [r, v] : cols_[static_cast<std::size_t>(j)]) out[r] = v;
  }
}

double LpEngine::dot_column(const Eigen::VectorXd& rho, int j) const {
  if (is_logical(j)) return -rho[j - n_];
  double acc = 0.0;
  for (const auto& [r, v] : cols_[static_cast<std::size_t>(j)]) acc += rho[r] * v;
  return acc;
}

void LpEngine::compute_primal() {
  if (m_ == 0) return;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m_);
  const int total = n_ + m_;
  for (int j = 0; j < total; ++j) {
    const auto k = static_cast<std::size_t>(j);
    if (status_[k] == Status::Basic) continue;
    x_[k] = nonbasic_value(j, status_[k]);
    const double xv = x_[k];
    if (xv == 0.0) continue;
    if (is_logical(j)) {
      rhs[j - n_] += xv;
    } else {
      for (const auto& [r, v] : cols_[k]) rhs[r] -= v * xv;
    }
  }
  ftran(rhs);
  for (int i = 0; i < m_; ++i) x_[static_cast<std::size_t>(head_[static_cast<std::size_t>(i)])] = rhs[i];
}

void LpEngine::compute_duals(const Eigen::VectorXd& basic_costs) {
  Eigen::VectorXd y = basic_costs;
  btran(y);
  const int total = n_ + m_;
  for (int j = 0; j < total; ++j) {
    const auto k = static_cast<std::size_t>(j);
    if (status_[k] == Status::Basic) {
      d_[k] = 0.0;
    } else {
      d_[k] = cost_[k] - (m_ > 0 ? dot_column(y, j) : 0.0);
    }
  }
}

double LpEngine::primal_infeasibility(int j) const {
  const auto k = static_cast<std::size_t>(j);
  if (x_[k] < lo_[k] - kPrimalTol) return lo_[k] - x_[k];
  if (x_[k] > hi_[k] + kPrimalTol) return x_[k] - hi_[k];
  return 0.0;
}

bool LpEngine::dual_feasible() const {
  const int total = n_ + m_;
  for (int j = 0; j < total; ++j) {
    const auto k = static_cast<std::size_t>(j);
    if (status_[k] == Status::Basic || is_fixed(j)) continue;
    const double dj = d_[k];
    switch (status_[k]) {
      case Status::AtLower:
        if (dj < -kDualTol) return false;
        break;
      case Status::AtUpper:
        if (dj > kDualTol) return false;
        break;
      case Status::AtZero:
        if (std::abs(dj) > kDualTol) return false;
        break;
      default: break;
    }
  }
  return true;
}

void LpEngine::pivot(int row, int entering, const Eigen::VectorXd& alpha) {
  Eta eta;
  eta.row = row;
  const double ar = alpha[row];
  for (int i = 0; i < m_; ++i) {
    if (i == row) {
      eta.entries.emplace_back(i, 1.0 / ar);
    } else if (std::abs(alpha[i]) > 1e-14) {
      eta.entries.emplace_back(i, -alpha[i] / ar);
    }
  }
  etas_.push_back(std::move(eta));
  const int leaving = head_[static_cast<std::size_t>(row)];
  pos_[static_cast<std::size_t>(leaving)] = -1;
  head_[static_cast<std::size_t>(row)] = entering;
  pos_[static_cast<std::size_t>(entering)] = row;
  status_[static_cast<std::size_t>(entering)] = Status::Basic;
}

LpStatus LpEngine::primal_simplex(long& budget) {
  int degenerate_run = 0;
  bool bland = false;
  Eigen::VectorXd basic_costs(m_);
  Eigen::VectorXd alpha(m_);
  const int total = n_ + m_;
  while (true) {
    if (budget-- <= 0) return LpStatus::IterationLimit;
    ++total_iterations_;
    if (etas_.size() > kMaxEtas) {
      if (!refactor()) {
        crash_basis();
        refactor();
      }
      compute_primal();
    }
    bool phase1 = false;
    for (int i = 0; i < m_; ++i) {
      const int j = head_[static_cast<std::size_t>(i)];
      const auto k = static_cast<std::size_t>(j);
      if (x_[k] < lo_[k] - kPrimalTol) {
        basic_costs[i] = -1.0;
        phase1 = true;
      } else if (x_[k] > hi_[k] + kPrimalTol) {
        basic_costs[i] = 1.0;
        phase1 = true;
      } else {
        basic_costs[i] = 0.0;
      }
    }
    if (!phase1) {
      for (int i = 0; i < m_; ++i) basic_costs[i] = cost_[static_cast<std::size_t>(head_[static_cast<std::size_t>(i)])];
    }
    Eigen::VectorXd y = basic_costs;
    btran(y);

    int entering = -1;
    double best = 0.0;
    double entering_d = 0.0;
    for (int j = 0; j < total; ++j) {
      const auto k = static_cast<std::size_t>(j);
      if (status_[k] == Status::Basic || is_fixed(j)) continue;
      const double cj = phase1 ? 0.0 : cost_[k];
      const double dj = cj - (m_ > 0 ? dot_column(y, j) : 0.0);
      bool eligible = false;
      if (status_[k] == Status::AtLower) eligible = dj < -kDualTol;
      else if (status_[k] == Status::AtUpper) eligible = dj > kDualTol;
      else eligible = std::abs(dj) > kDualTol;
      if (!eligible) continue;
      if (bland) {
        entering = j;
        entering_d = dj;
        break;
      }
      if (std::abs(dj) > best) {
        best = std::abs(dj);
        entering = j;
        entering_d = dj;
      }
    }
    if (entering < 0) {
      if (phase1) return LpStatus::Infeasible;
      compute_duals(basic_costs);
      return LpStatus::Optimal;
    }

    const double dir = entering_d < 0.0 ? 1.0 : -1.0;
    column_of(entering, alpha);
    ftran(alpha);
    const auto ek = static_cast<std::size_t>(entering);
    const double range = hi_[ek] - lo_[ek];

    // Harris two-pass ratio test.
    double relaxed_min = range;
    for (int i = 0; i < m_; ++i) {
      const double rate = -dir * alpha[i];
      if (std::abs(rate) <= kPivotTol) continue;
      const auto k = static_cast<std::size_t>(head_[static_cast<std::size_t>(i)]);
      const double xv = x_[k];
      double limit = kInfinity;
      if (rate < 0.0) {
        if (phase1 && xv > hi_[k] + kPrimalTol) limit = (xv - hi_[k] + kPrimalTol) / -rate;
        else if (xv >= lo_[k] - kPrimalTol && std::isfinite(lo_[k])) limit = (xv - lo_[k] + kPrimalTol) / -rate;
      } else {
        if (phase1 && xv < lo_[k] - kPrimalTol) limit = (lo_[k] - xv + kPrimalTol) / rate;
        else if (xv <= hi_[k] + kPrimalTol && std::isfinite(hi_[k])) limit = (hi_[k] - xv + kPrimalTol) / rate;
      }
      relaxed_min = std::min(relaxed_min, limit);
    }
    if (!std::isfinite(relaxed_min)) {
      if (phase1) {
        // A phase-one direction cannot be unbounded; rebuild and retry.
        refactor();
        compute_primal();
        continue;
      }
      return LpStatus::Unbounded;
    }
    int leave_row = -1;
    double step = range;
    double best_alpha = 0.0;
    bool leave_to_upper = false;
    for (int i = 0; i < m_; ++i) {
      const double rate = -dir * alpha[i];
      if (std::abs(rate) <= kPivotTol) continue;
      const int j = head_[static_cast<std::size_t>(i)];
      const auto k = static_cast<std::size_t>(j);
      const double xv = x_[k];
      double limit = kInfinity;
      bool to_upper = false;
      if (rate < 0.0) {
        if (phase1 && xv > hi_[k] + kPrimalTol) {
          limit = (xv - hi_[k]) / -rate;
          to_upper = true;
        } else if (xv >= lo_[k] - kPrimalTol && std::isfinite(lo_[k])) {
          limit = (xv - lo_[k]) / -rate;
        }
      } else {
        if (phase1 && xv < lo_[k] - kPrimalTol) {
          limit = (lo_[k] - xv) / rate;
        } else if (xv <= hi_[k] + kPrimalTol && std::isfinite(hi_[k])) {
          limit = (hi_[k] - xv) / rate;
          to_upper = true;
        }
      }
      if (limit > relaxed_min) continue;
      const bool better = bland ? (leave_row < 0 || j < head_[static_cast<std::size_t>(leave_row)])
                                : std::abs(alpha[i]) > best_alpha;
      if (better) {
        best_alpha = std::abs(alpha[i]);
        leave_row = i;
        step = std::max(limit, 0.0);
        leave_to_upper = to_upper;
      }
    }

    if (leave_row < 0 || (std::isfinite(range) && range <= step)) {
      // Bound flip of the entering column.
      const double t = range;
      for (int i = 0; i < m_; ++i) x_[static_cast<std::size_t>(head_[static_cast<std::size_t>(i)])] -= dir * t * alpha[i];
      status_[ek] = dir > 0 ? Status::AtUpper : Status::AtLower;
      x_[ek] = nonbasic_value(entering, status_[ek]);
      degenerate_run = 0;
      bland = false;
      continue;
    }

    for (int i = 0; i < m_; ++i) x_[static_cast<std::size_t>(head_[static_cast<std::size_t>(i)])] -= dir * step * alpha[i];
    x_[ek] += dir * step;
    const int leaving = head_[static_cast<std::size_t>(leave_row)];
    const auto lk = static_cast<std::size_t>(leaving);
    status_[lk] = leave_to_upper ? Status::AtUpper : Status::AtLower;
    if (is_fixed(leaving)) status_[lk] = Status::AtLower;
    const double xl = nonbasic_value(leaving, status_[lk]);
    pivot(leave_row, entering, alpha);
    x_[lk] = xl;

    if (step < 1e-12) {
      if (++degenerate_run > 50) bland = true;
    } else {
      degenerate_run = 0;
      bland = false;
    }
  }
}

LpStatus LpEngine::dual_simplex(long& budget) {
  Eigen::VectorXd rho(m_);
  Eigen::VectorXd alpha(m_);
  std::vector<double> row_alpha(col_count(), 0.0);
  const int total = n_ + m_;
  while (true) {
    if (budget-- <= 0) return LpStatus::IterationLimit;
    ++total_iterations_;
    if (etas_.size() > kMaxEtas) {
      if (!refactor()) return LpStatus::IterationLimit;
      compute_primal();
      Eigen::VectorXd cb(m_);
      for (int i = 0; i < m_; ++i) cb[i] = cost_[static_cast<std::size_t>(head_[static_cast<std::size_t>(i)])];
      compute_duals(cb);
      if (!dual_feasible()) return LpStatus::IterationLimit;
    }
    int leave_row = -1;
    double worst = 0.0;
    for (int i = 0; i < m_; ++i) {
      const double inf = primal_infeasibility(head_[static_cast<std::size_t>(i)]);
      if (inf > worst) {
        worst = inf;
        leave_row = i;
      }
    }
    if (leave_row < 0) return LpStatus::Optimal;

    const int leaving = head_[static_cast<std::size_t>(leave_row)];
    const auto lk = static_cast<std::size_t>(leaving);
    const bool below = x_[lk] < lo_[lk];
    const double target = below ? lo_[lk] : hi_[lk];

    rho.setZero();
    rho[leave_row] = 1.0;
    btran(rho);

    double relaxed_min = kInfinity;
    for (int j = 0; j < total; ++j) {
      const auto k = static_cast<std::size_t>(j);
      row_alpha[k] = 0.0;
      if (status_[k] == Status::Basic) continue;
      const double a = dot_column(rho, j);
      row_alpha[k] = a;
      if (is_fixed(j) || std::abs(a) <= kPivotTol) continue;
      bool candidate = false;
      if (status_[k] == Status::AtZero) candidate = true;
      else if (status_[k] == Status::AtLower) candidate = below ? a < 0.0 : a > 0.0;
      else candidate = below ? a > 0.0 : a < 0.0;
      if (!candidate) continue;
      relaxed_min = std::min(relaxed_min, (std::abs(d_[k]) + kDualTol) / std::abs(a));
    }
    if (!std::isfinite(relaxed_min)) return LpStatus::Infeasible;

    int entering = -1;
    double best_alpha = 0.0;
    for (int j = 0; j < total; ++j) {
      const auto k = static_cast<std::size_t>(j);
      if (status_[k] == Status::Basic || is_fixed(j)) continue;
      const double a = row_alpha[k];
      if (std::abs(a) <= kPivotTol) continue;
      bool candidate = false;
      if (status_[k] == Status::AtZero) candidate = true;
      else if (status_[k] == Status::AtLower) candidate = below ? a < 0.0 : a > 0.0;
      else candidate = below ? a > 0.0 : a < 0.0;
      if (!candidate) continue;
      if (std::abs(d_[k]) / std::abs(a) <= relaxed_min && std::abs(a) > best_alpha) {
        best_alpha = std::abs(a);
        entering = j;
      }
    }
    if (entering < 0) return LpStatus::Infeasible;
    const auto ek = static_cast<std::size_t>(entering);

    double dq = d_[ek];
    // Clamp a slightly wrong-signed reduced cost so the step keeps dual feasibility.
    if (status_[ek] == Status::AtLower && dq < 0.0) dq = 0.0;
    if (status_[ek] == Status::AtUpper && dq > 0.0) dq = 0.0;
    if (status_[ek] == Status::AtZero) dq = 0.0;
    const double theta = dq / row_alpha[ek];
    for (int j = 0; j < total; ++j) {
      const auto k = static_cast<std::size_t>(j);
      if (status_[k] == Status::Basic) continue;
      d_[k] -= theta * row_alpha[k];
    }
    d_[ek] = 0.0;

    column_of(entering, alpha);
    ftran(alpha);
    const double ar = alpha[leave_row];
    if (std::abs(ar) <= kPivotTol * 1e-3) {
      // Row and column disagree: factorization drifted.
      if (!refactor()) return LpStatus::IterationLimit;
      compute_primal();
      Eigen::VectorXd cb(m_);
      for (int i = 0; i < m_; ++i) cb[i] = cost_[static_cast<std::size_t>(head_[static_cast<std::size_t>(i)])];
      compute_duals(cb);
      continue;
    }
    const double t = (x_[lk] - target) / ar;
    for (int i = 0; i < m_; ++i) x_[static_cast<std::size_t>(head_[static_cast<std::size_t>(i)])] -= alpha[i] * t;
    x_[ek] += t;
    status_[lk] = below ? Status::AtLower : Status::AtUpper;
    if (is_fixed(leaving)) status_[lk] = Status::AtLower;
    d_[lk] = -theta;
    pivot(leave_row, entering, alpha);
    x_[lk] = target;
  }
}

LpStatus LpEngine::solve(long iteration_limit) {
  long budget = iteration_limit;
  if (!has_basis_) crash_basis();
  for (int j = 0; j < n_ + m_; ++j) place_nonbasic(j);
  if (!factor_valid_ && !refactor()) {
    crash_basis();
    refactor();
  }
  compute_primal();
  Eigen::VectorXd cb(m_);
  for (int i = 0; i < m_; ++i) cb[i] = cost_[static_cast<std::size_t>(head_[static_cast<std::size_t>(i)])];
  compute_duals(cb);

  LpStatus status = LpStatus::IterationLimit;
  if (dual_feasible()) {
    status = dual_simplex(budget);
    if (status == LpStatus::Optimal && !dual_feasible()) status = LpStatus::IterationLimit;
  }
  if (status != LpStatus::Optimal) {
    if (!refactor()) {
      crash_basis();
      refactor();
    }
    compute_primal();
    status = primal_simplex(budget);
  }
  // Clean-up pass against accumulated drift.
  for (int pass = 0; pass < 3 && status == LpStatus::Optimal; ++pass) {
    if ((pass > 0 || etas_.size() > 16) && !refactor()) {
      crash_basis();
      refactor();
    }
    compute_primal();
    bool clean = true;
    for (int i = 0; i < m_; ++i) {
      if (primal_infeasibility(head_[static_cast<std::size_t>(i)]) > 0.0) clean = false;
    }
    for (int i = 0; i < m_; ++i) cb[i] = cost_[static_cast<std::size_t>(head_[static_cast<std::size_t>(i)])];
    compute_duals(cb);
    if (clean && dual_feasible()) break;
    status = primal_simplex(budget);
  }
  return status;
}

}  // namespace coplan::mp::detail
