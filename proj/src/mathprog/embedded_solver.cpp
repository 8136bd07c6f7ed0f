#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <map>
#include <mutex>
#include <optional>

#include "coplan/mathprog.hpp"
#include "mathprog/lp_engine.hpp"

namespace coplan::mp {

namespace {

using detail::LpEngine;
using detail::LpStatus;

constexpr double kCutTol = 1e-9;
constexpr int kMaxCutRounds = 400;
constexpr double kTailOff = 1e-6;
constexpr double kArtificialBound = 1e7;
constexpr double kGapSlack = 1e-7;

struct Node {
  std::vector<std::pair<int, double>> fixes;
  double bound = -kInf;
  int depth = 0;
};

enum class RelaxStatus { Optimal, Infeasible, Unbounded, Limit };

class Session {
 public:
  Session(const Program& program, const SolveOptions& options)
      : p_(program),
        opt_(options),
        nv_(program.num_vars()),
        nsq_(static_cast<int>(program.objective_squares().size())),
        sign_(program.sense() == Sense::Minimize ? 1.0 : -1.0),
        lp_(nv_ + nsq_),
        start_(std::chrono::steady_clock::now()) {}

  SolveOutcome run();

 private:
  bool build();
  RelaxStatus relax(double& value, std::vector<double>& x);
  bool add_cuts(const std::vector<double>& x);
  bool fractional(const std::vector<double>& x) const;
  void apply_fixes(const std::vector<std::pair<int, double>>& fixes);
  double internal_value(const std::vector<double>& x) const;
  double reported(double internal) const { return sign_ * internal + p_.objective_constant(); }
  double gap_of(double inc, double lb) const { return relative_gap(reported(inc), reported(lb), p_.sense()); }
  double floored_gap(double inc, double lb) const {
    if (p_.sense() != Sense::Minimize || !std::isfinite(opt_.objective_floor)) return gap_of(inc, lb);
    const double f = opt_.objective_floor;
    return relative_gap(std::max(reported(inc), f), std::max(reported(lb), f), p_.sense());
  }
  bool out_of_time() const {
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    return elapsed > opt_.time_limit_s;
  }
  void try_incumbent(const std::vector<double>& x);

  const Program& p_;
  SolveOptions opt_;
  int nv_;
  int nsq_;
  double sign_;
  LpEngine lp_;
  std::chrono::steady_clock::time_point start_;
  std::vector<int> binaries_;
  std::vector<double> base_lo_, base_hi_;
  std::vector<char> artificial_;
  double incumbent_ = kInf;
  std::vector<double> best_x_;
  bool hit_artificial_ = false;
};

bool Session::build() {
  base_lo_.resize(static_cast<std::size_t>(nv_));
  base_hi_.resize(static_cast<std::size_t>(nv_));
  artificial_.assign(static_cast<std::size_t>(nv_), 0);
  std::vector<char> squared(static_cast<std::size_t>(nv_), 0);
  for (const auto& s : p_.objective_squares()) squared[static_cast<std::size_t>(s.var.id)] = 1;
  for (const auto& q : p_.quad_rows())
    for (const auto& s : q.squares) squared[static_cast<std::size_t>(s.var.id)] = 1;

  for (int j = 0; j < nv_; ++j) {
    const auto k = static_cast<std::size_t>(j);
    const VarInfo& v = p_.vars()[k];
    double lo = v.lower;
    double hi = v.upper;
    if (v.kind == VarKind::Binary) {
      lo = std::max(lo, 0.0);
      hi = std::min(hi, 1.0);
      if (lo > hi) return false;
      binaries_.push_back(j);
    }
    if (squared[k]) {
      if (!std::isfinite(lo)) {
        lo = -kArtificialBound;
        artificial_[k] = 1;
      }
      if (!std::isfinite(hi)) {
        hi = kArtificialBound;
        artificial_[k] = 1;
      }
    }
    base_lo_[k] = lo;
    base_hi_[k] = hi;
    lp_.set_bounds(j, lo, hi);
  }
  for (const auto& t : p_.objective()) lp_.set_cost(t.var.id, sign_ * t.coef);
  for (int s = 0; s < nsq_; ++s) {
    lp_.set_bounds(nv_ + s, 0.0, kInf);
    lp_.set_cost(nv_ + s, 1.0);
  }

  for (const auto& r : p_.rows()) {
    if (r.terms.empty()) {
      const bool ok = (r.sense == RowSense::LessEqual && 0.0 <= r.rhs + kFeasibilityTol) ||
                      (r.sense == RowSense::GreaterEqual && 0.0 >= r.rhs - kFeasibilityTol) ||
                      (r.sense == RowSense::Equal && std::abs(r.rhs) <= kFeasibilityTol);
      if (!ok) return false;
      continue;
    }
    std::vector<std::pair<int, double>> coefs;
    coefs.reserve(r.terms.size());
    for (const auto& t : r.terms) coefs.emplace_back(t.var.id, t.coef);
    const double lo = r.sense == RowSense::LessEqual ? -kInf : r.rhs;
    const double hi = r.sense == RowSense::GreaterEqual ? kInf : r.rhs;
    lp_.add_row(coefs, lo, hi);
  }

  // One tangent per objective square at the point nearest the origin.
  for (int s = 0; s < nsq_; ++s) {
    const auto& sq = p_.objective_squares()[static_cast<std::size_t>(s)];
    const double x0 = std::clamp(0.0, lp_.lower(sq.var.id), lp_.upper(sq.var.id));
    lp_.add_row({{nv_ + s, 1.0}, {sq.var.id, -2.0 * sq.weight * x0}}, -sq.weight * x0 * x0, kInf);
  }
  return true;
}

bool Session::add_cuts(const std::vector<double>& x) {
  bool added = false;
  for (int s = 0; s < nsq_; ++s) {
    const auto& sq = p_.objective_squares()[static_cast<std::size_t>(s)];
    const double x0 = x[static_cast<std::size_t>(sq.var.id)];
    const double exact = sq.weight * x0 * x0;
    const double theta = x[static_cast<std::size_t>(nv_ + s)];
    if (exact - theta > kCutTol * std::max(1.0, exact)) {
      lp_.add_row({{nv_ + s, 1.0}, {sq.var.id, -2.0 * sq.weight * x0}}, -exact, kInf);
      added = true;
    }
  }
  for (const auto& q : p_.quad_rows()) {
    double g = 0.0;
    double shift = 0.0;
    std::map<int, double> coefs;
    for (const auto& s : q.squares) {
      const double x0 = x[static_cast<std::size_t>(s.var.id)];
      g += s.weight * x0 * x0;
      shift += s.weight * x0 * x0;
      coefs[s.var.id] += 2.0 * s.weight * x0;
    }
    for (const auto& t : q.linear) {
      g += t.coef * x[static_cast<std::size_t>(t.var.id)];
      coefs[t.var.id] += t.coef;
    }
    if (g - q.rhs > kCutTol * std::max(1.0, std::abs(q.rhs))) {
      std::vector<std::pair<int, double>> row;
      for (const auto& [j, c] : coefs) {
        if (c != 0.0) row.emplace_back(j, c);
      }
      lp_.add_row(row, -kInf, q.rhs + shift);
      added = true;
    }
  }
  return added;
}

RelaxStatus Session::relax(double& value, std::vector<double>& x) {
  double previous = -kInf;
  for (int round = 0; round < kMaxCutRounds; ++round) {
    const LpStatus st = lp_.solve();
    if (st == LpStatus::Infeasible) return RelaxStatus::Infeasible;
    if (st == LpStatus::Unbounded) return RelaxStatus::Unbounded;
    if (st == LpStatus::IterationLimit) return RelaxStatus::Limit;
    x = lp_.structural_values();
    value = lp_.objective();
    if (!p_.has_quadratic()) return RelaxStatus::Optimal;
    // A fractional point only needs its bound; stop once it prunes or stalls.
    if (value >= incumbent_ - 1e-9 * std::max(1.0, std::abs(incumbent_))) return RelaxStatus::Optimal;
    if (fractional(x) && value - previous <= kTailOff * std::max(1.0, std::abs(value))) return RelaxStatus::Optimal;
    previous = value;
    if (!add_cuts(x)) return RelaxStatus::Optimal;
  }
  return RelaxStatus::Optimal;
}

bool Session::fractional(const std::vector<double>& x) const {
  return std::any_of(binaries_.begin(), binaries_.end(), [&](int j) {
    const double v = x[static_cast<std::size_t>(j)];
    return std::abs(v - std::round(v)) > kIntegralityTol;
  });
}

void Session::apply_fixes(const std::vector<std::pair<int, double>>& fixes) {
  std::map<int, double> fixed(fixes.begin(), fixes.end());
  for (int j : binaries_) {
    const auto k = static_cast<std::size_t>(j);
    double lo = base_lo_[k];
    double hi = base_hi_[k];
    if (auto it = fixed.find(j); it != fixed.end()) lo = hi = it->second;
    if (lp_.lower(j) != lo || lp_.upper(j) != hi) lp_.set_bounds(j, lo, hi);
  }
}

double Session::internal_value(const std::vector<double>& x) const {
  double v = 0.0;
  for (const auto& t : p_.objective()) v += sign_ * t.coef * x[static_cast<std::size_t>(t.var.id)];
  for (const auto& s : p_.objective_squares()) {
    const double xv = x[static_cast<std::size_t>(s.var.id)];
    v += s.weight * xv * xv;
  }
  return v;
}

void Session::try_incumbent(const std::vector<double>& x) {
  std::vector<double> cand(x.begin(), x.begin() + nv_);
  for (int j : binaries_) cand[static_cast<std::size_t>(j)] = std::round(cand[static_cast<std::size_t>(j)]);
  for (int j = 0; j < nv_; ++j) {
    const auto k = static_cast<std::size_t>(j);
    cand[k] = std::clamp(cand[k], p_.vars()[k].lower, p_.vars()[k].upper);
  }
  if (p_.max_violation(cand) > kFeasibilityTol) return;
  const double v = internal_value(cand);
  if (v < incumbent_) {
    incumbent_ = v;
    best_x_ = std::move(cand);
    hit_artificial_ = false;
    for (int j = 0; j < nv_; ++j) {
      const auto k = static_cast<std::size_t>(j);
      if (artificial_[k] && std::abs(best_x_[k]) >= kArtificialBound * (1 - 1e-9)) hit_artificial_ = true;
    }
  }
}

SolveOutcome Session::run() {
  SolveOutcome out;
  if (!build()) {
    out.status = SolveStatus::Infeasible;
    return out;
  }

  std::multimap<double, Node> open;
  std::optional<Node> dive = Node{};
  long nodes = 0;
  bool limited = false;
  double lb_final = -kInf;

  auto open_bound = [&]() {
    double lb = kInf;
    if (!open.empty()) lb = open.begin()->first;
    if (dive) lb = std::min(lb, dive->bound);
    return lb;
  };
  auto abs_tol = [&]() { return 1e-9 * std::max(1.0, std::abs(incumbent_)); };

  std::vector<double> x;
  while (dive || !open.empty()) {
    const double lb = open_bound();
    if (std::isfinite(incumbent_) && floored_gap(incumbent_, lb) <= opt_.gap) {
      lb_final = lb;
      break;
    }
    if (nodes >= opt_.max_nodes || out_of_time()) {
      limited = true;
      lb_final = lb;
      break;
    }
    Node node;
    if (dive) {
      node = std::move(*dive);
      dive.reset();
    } else {
      node = std::move(open.begin()->second);
      open.erase(open.begin());
    }
    if (node.bound >= incumbent_ - abs_tol()) continue;
    ++nodes;
    apply_fixes(node.fixes);
    double value = 0.0;
    const RelaxStatus st = relax(value, x);
    if (st == RelaxStatus::Infeasible) continue;
    if (st == RelaxStatus::Unbounded) {
      out.status = SolveStatus::Unbounded;
      out.nodes = nodes;
      out.lp_iterations = lp_.iterations();
      return out;
    }
    if (st == RelaxStatus::Limit) {
      limited = true;
      lb_final = std::min(open_bound(), node.bound);
      break;
    }
    value = std::max(value, node.bound);
    if (value >= incumbent_ - abs_tol()) continue;

    int branch = -1;
    double best_score = -1.0;
    int best_priority = 0;
    for (int j : binaries_) {
      const double xv = x[static_cast<std::size_t>(j)];
      const double frac = std::abs(xv - std::round(xv));
      if (frac <= kIntegralityTol) continue;
      const int pr = p_.vars()[static_cast<std::size_t>(j)].branch_priority;
      const double score = std::min(xv - std::floor(xv), std::ceil(xv) - xv);
      if (branch < 0 || pr > best_priority || (pr == best_priority && score > best_score + 1e-12)) {
        branch = j;
        best_score = score;
        best_priority = pr;
      }
    }

    if (branch < 0) {
      if (!binaries_.empty()) {
        // Polish: re-solve with every binary fixed at its rounded value.
        std::vector<std::pair<int, double>> fixes;
        fixes.reserve(binaries_.size());
        for (int j : binaries_) fixes.emplace_back(j, std::round(x[static_cast<std::size_t>(j)]));
        apply_fixes(fixes);
        std::vector<double> xp;
        double vp = 0.0;
        if (relax(vp, xp) == RelaxStatus::Optimal) try_incumbent(xp);
      }
      try_incumbent(x);
      continue;
    }

    const double xv = x[static_cast<std::size_t>(branch)];
    Node down{node.fixes, value, node.depth + 1};
    down.fixes.emplace_back(branch, 0.0);
    Node up{node.fixes, value, node.depth + 1};
    up.fixes.emplace_back(branch, 1.0);
    Node& first = xv >= 0.5 ? up : down;
    Node& second = xv >= 0.5 ? down : up;
    const double best_open = open.empty() ? kInf : open.begin()->first;
    const bool plunge = !std::isfinite(incumbent_) || !std::isfinite(best_open) ||
                        value <= best_open + 0.5 * (incumbent_ - best_open);
    open.emplace(second.bound, std::move(second));
    if (plunge) {
      dive = std::move(first);
    } else {
      open.emplace(first.bound, std::move(first));
    }
  }
  if (!dive && open.empty() && !limited) lb_final = incumbent_;

  out.nodes = nodes;
  out.lp_iterations = lp_.iterations();
  if (!std::isfinite(incumbent_)) {
    out.status = limited ? SolveStatus::Limit : SolveStatus::Infeasible;
    if (limited) out.relaxation_value = reported(lb_final);
    return out;
  }
  if (hit_artificial_) {
    out.status = SolveStatus::Unbounded;
    return out;
  }
  lb_final = std::min(lb_final, incumbent_);
  out.incumbent_value = reported(incumbent_);
  out.relaxation_value = reported(lb_final);
  out.assignment = best_x_;
  out.gap = gap_of(incumbent_, lb_final);
  out.status = out.gap <= opt_.gap + kGapSlack ? SolveStatus::OptimalWithinGap : SolveStatus::Limit;
  return out;
}

class EmbeddedBackend final : public SolverBackend {
 public:
  std::string_view name() const override { return "embedded"; }
  SolveOutcome solve(const Program& program, const SolveOptions& options) const override {
    if (!(options.gap >= 0.0 && options.gap <= 1.0)) throw ModelError("gap must lie in [0, 1]");
    Session session(program, options);
    return session.run();
  }
};

using Factory = std::function<std::unique_ptr<SolverBackend>()>;

std::map<std::string, Factory, std::less<>>& registry() {
  static std::map<std::string, Factory, std::less<>> reg{
      {"embedded", [] { return std::make_unique<EmbeddedBackend>(); }}};
  return reg;
}

std::mutex& registry_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

std::unique_ptr<SolverBackend> make_backend(std::string_view name) {
  std::lock_guard lock(registry_mutex());
  auto& reg = registry();
  auto it = reg.find(name);
  if (it == reg.end()) throw ModelError("unknown solver backend '" + std::string(name) + "'");
  return it->second();
}

void register_backend(std::string name, std::function<std::unique_ptr<SolverBackend>()> factory) {
  std::lock_guard lock(registry_mutex());
  registry()[std::move(name)] = std::move(factory);
}

std::vector<std::string> available_backends() {
  std::lock_guard lock(registry_mutex());
  std::vector<std::string> names;
  for (const auto& [k, v] : registry()) names.push_back(k);
  return names;
}

const SolverBackend& default_backend() {
  static const std::unique_ptr<SolverBackend> backend = [] {
    const char* env = std::getenv("COPLAN_SOLVER");
    return make_backend(env != nullptr && *env != '\0' ? std::string_view(env) : std::string_view("embedded"));
  }();
  return *backend;
}

SolveOutcome solve_with_gap(const Program& program, double gap, double time_limit_s) {
  SolveOptions options;
  options.gap = gap;
  options.time_limit_s = time_limit_s;
  return solve_with_gap(program, options);
}

SolveOutcome solve_with_gap(const Program& program, const SolveOptions& options) {
  return default_backend().solve(program, options);
}

}  // namespace coplan::mp
