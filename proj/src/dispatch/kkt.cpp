#include <algorithm>
#include <cmath>
#include <numeric>

#include "coplan/dispatch.hpp"
#include "kkt_internal.hpp"

namespace coplan::dispatch {

namespace {

using Sparse = std::vector<std::pair<int, double>>;

struct ModelWriter {
  InnerModel& m;

  int var(const std::string& name, double lo, double hi, double q) {
    const int j = m.n++;
    m.q_diag.push_back(q);
    m.names.push_back(name);
    m.lower.push_back(lo);
    m.upper.push_back(hi);
    m.sign_constrained.push_back(lo == 0.0 ? 1 : 0);
    if (lo != 0.0 && std::isfinite(lo)) leq({{j, -1.0}}, -lo);
    if (std::isfinite(hi)) leq({{j, 1.0}}, hi);
    return j;
  }
  void leq(Sparse row, double h0, Sparse hu = {}) {
    m.g_rows.push_back(std::move(row));
    m.h0.push_back(h0);
    m.h_u.push_back(std::move(hu));
  }
  void eq(Sparse row, double f0, Sparse fu = {}) {
    m.e_rows.push_back(std::move(row));
    m.f0.push_back(f0);
    m.f_u.push_back(std::move(fu));
  }
};

double dot(const Sparse& row, const std::vector<double>& x) {
  double s = 0.0;
  for (const auto& [j, c] : row) s += c * x[static_cast<std::size_t>(j)];
  return s;
}

}  // namespace

std::vector<double> InnerModel::h_at(const std::vector<double>& u) const {
  std::vector<double> h = h0;
  for (std::size_t r = 0; r < h.size(); ++r) h[r] += dot(h_u[r], u);
  return h;
}

std::vector<double> InnerModel::f_at(const std::vector<double>& u) const {
  std::vector<double> f = f0;
  for (std::size_t r = 0; r < f.size(); ++r) f[r] += dot(f_u[r], u);
  return f;
}

InnerModel build_inner_model(const network::PlanDecision& plan, const Table& hub_load_kw,
                             const io::InstanceSpec& instance, const std::vector<int>& periods) {
  InnerModel m;
  ModelWriter w{m};
  const int n = instance.num_nodes();
  const int L = instance.num_lines();
  const int H = instance.num_hubs();
  const int S = static_cast<int>(periods.size());
  const int root = instance.root_index();
  const double vlo = instance.voltage.lo * instance.voltage.lo;
  const double vhi = instance.voltage.hi * instance.voltage.hi;
  const bool ess = instance.has_ess() && std::any_of(plan.y_rcs.begin(), plan.y_rcs.end(), [](int y) { return y != 0; });
  if (ess && S != instance.horizon) throw mp::ModelError("ESS coupling requires the full horizon in one inner model");

  std::vector<char> in_periods(static_cast<std::size_t>(instance.horizon), 0);
  for (int t : periods) in_periods[static_cast<std::size_t>(t)] = 1;
  for (const auto& c : diu_coordinates(instance)) {
    if (in_periods[static_cast<std::size_t>(c.period)] == 0) continue;
    if (c.kind == DiuKind::PPv && plan.y_rcs[static_cast<std::size_t>(c.owner)] == 0) continue;
    m.coords.push_back(c);
  }
  DiuRealization base = diu_lower_corner(instance);
  if (!instance.has_pv()) base.p_pv = zeros(H, instance.horizon);
  auto coord_of = [&](DiuKind kind, int owner, int t) {
    for (std::size_t c = 0; c < m.coords.size(); ++c) {
      const auto& d = m.coords[c];
      if (d.kind == kind && d.owner == owner && d.period == t) return static_cast<int>(c);
    }
    return -1;
  };

  const double inv_sqrt2 = 0.70710678118654752440;
  std::vector<std::vector<int>> pvar(static_cast<std::size_t>(L)), qvar(static_cast<std::size_t>(L));
  std::vector<std::vector<int>> vvar(static_cast<std::size_t>(n));
  std::vector<int> psub, qsub;
  std::vector<std::vector<int>> ch(static_cast<std::size_t>(H)), dis(static_cast<std::size_t>(H)), evar(static_cast<std::size_t>(H));
  for (int s = 0; s < S; ++s) {
    const int t = periods[static_cast<std::size_t>(s)];
    const std::string tag = "_" + std::to_string(t);
    for (int i = 0; i < n; ++i) {
      vvar[static_cast<std::size_t>(i)].push_back(
          i == root ? -1 : w.var("v" + std::to_string(instance.nodes[static_cast<std::size_t>(i)].id) + tag, vlo, vhi, 0.0));
    }
    const auto& sub = instance.substation;
    psub.push_back(w.var("psub" + tag, sub.p_min, sub.p_max, 0.0));
    qsub.push_back(w.var("qsub" + tag, sub.q_min, sub.q_max, 0.0));
    for (int e = 0; e < L; ++e) {
      if (plan.y_line[static_cast<std::size_t>(e)] == 0) {
        pvar[static_cast<std::size_t>(e)].push_back(-1);
        qvar[static_cast<std::size_t>(e)].push_back(-1);
        continue;
      }
      const auto& line = instance.lines[static_cast<std::size_t>(e)];
      const double cap = line.capacity;
      const double q2 = 2.0 * loss_weight(instance, e, t);
      const std::string lt = "_" + std::to_string(line.from) + "_" + std::to_string(line.to) + tag;
      const int p = w.var("p" + lt, -cap, cap, q2);
      const int q = w.var("q" + lt, -cap, cap, q2);
      for (double a : {1.0, -1.0}) {
        for (double c : {1.0, -1.0}) w.leq({{p, a * inv_sqrt2}, {q, c * inv_sqrt2}}, cap);
      }
      pvar[static_cast<std::size_t>(e)].push_back(p);
      qvar[static_cast<std::size_t>(e)].push_back(q);
    }
  }
  const auto& es = instance.ess;
  const double e0 = es.e_min + 0.5 * (es.e_max - es.e_min);
  if (ess) {
    for (int k = 0; k < H; ++k) {
      if (plan.y_rcs[static_cast<std::size_t>(k)] == 0) continue;
      const std::string ht = "_h" + std::to_string(instance.hubs[static_cast<std::size_t>(k)].id);
      for (int s = 0; s < S; ++s) {
        const std::string tag = ht + "_" + std::to_string(periods[static_cast<std::size_t>(s)]);
        ch[static_cast<std::size_t>(k)].push_back(w.var("ch" + tag, 0.0, es.p_ch_max, 0.0));
        dis[static_cast<std::size_t>(k)].push_back(w.var("dis" + tag, 0.0, es.p_dis_max, 0.0));
        if (s + 1 < S) evar[static_cast<std::size_t>(k)].push_back(w.var("e" + ht + "_" + std::to_string(s + 1), es.e_min, es.e_max, 0.0));
      }
      // e_{s+1} - e_s - eta_ch ch_s + eta_dis dis_s = 0 with e_0 = e_S = e0 fixed.
      for (int s = 0; s < S; ++s) {
        Sparse row;
        double f = 0.0;
        if (s + 1 < S) row.emplace_back(evar[static_cast<std::size_t>(k)][static_cast<std::size_t>(s)], 1.0);
        else f -= e0;
        if (s > 0) row.emplace_back(evar[static_cast<std::size_t>(k)][static_cast<std::size_t>(s - 1)], -1.0);
        else f += e0;
        row.emplace_back(ch[static_cast<std::size_t>(k)][static_cast<std::size_t>(s)], -es.eta_ch);
        row.emplace_back(dis[static_cast<std::size_t>(k)][static_cast<std::size_t>(s)], es.eta_dis);
        w.eq(std::move(row), f);
      }
    }
  }

  for (int s = 0; s < S; ++s) {
    const int t = periods[static_cast<std::size_t>(s)];
    std::vector<Sparse> pb(static_cast<std::size_t>(n)), qb(static_cast<std::size_t>(n));
    std::vector<double> pf(static_cast<std::size_t>(n), 0.0), qf(static_cast<std::size_t>(n), 0.0);
    std::vector<Sparse> pfu(static_cast<std::size_t>(n)), qfu(static_cast<std::size_t>(n));
    for (int e = 0; e < L; ++e) {
      const int p = pvar[static_cast<std::size_t>(e)][static_cast<std::size_t>(s)];
      if (p < 0) continue;
      const int q = qvar[static_cast<std::size_t>(e)][static_cast<std::size_t>(s)];
      const auto& line = instance.lines[static_cast<std::size_t>(e)];
      const int fi = instance.node_index(line.from);
      const int ti = instance.node_index(line.to);
      pb[static_cast<std::size_t>(ti)].emplace_back(p, 1.0);
      pb[static_cast<std::size_t>(fi)].emplace_back(p, -1.0);
      qb[static_cast<std::size_t>(ti)].emplace_back(q, 1.0);
      qb[static_cast<std::size_t>(fi)].emplace_back(q, -1.0);
      Sparse drop{{p, -2.0 * line.r}, {q, -2.0 * line.x}};
      double f = 0.0;
      const int vf = vvar[static_cast<std::size_t>(fi)][static_cast<std::size_t>(s)];
      const int vt = vvar[static_cast<std::size_t>(ti)][static_cast<std::size_t>(s)];
      if (vf >= 0) drop.emplace_back(vf, 1.0);
      else f -= 1.0;
      if (vt >= 0) drop.emplace_back(vt, -1.0);
      else f += 1.0;
      w.eq(std::move(drop), f);
    }
    pb[static_cast<std::size_t>(root)].emplace_back(psub[static_cast<std::size_t>(s)], 1.0);
    qb[static_cast<std::size_t>(root)].emplace_back(qsub[static_cast<std::size_t>(s)], 1.0);
    for (int i = 0; i < n; ++i) {
      const auto ii = static_cast<std::size_t>(i);
      const int cp = coord_of(DiuKind::PLoad, i, t);
      if (cp >= 0) pfu[ii].emplace_back(cp, 1.0);
      else pf[ii] += base.p_load[ii][static_cast<std::size_t>(t)];
      const int cq = coord_of(DiuKind::QLoad, i, t);
      if (cq >= 0) qfu[ii].emplace_back(cq, 1.0);
      else qf[ii] += base.q_load[ii][static_cast<std::size_t>(t)];
    }
    for (int k = 0; k < H; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      const auto node = static_cast<std::size_t>(instance.node_index(instance.hubs[kk].dn_node));
      const double kw = hub_load_kw.empty() ? 0.0 : hub_load_kw[kk][static_cast<std::size_t>(t)];
      pf[node] += kw / instance.bases.power_kva;
      if (plan.y_rcs[kk] != 0 && instance.has_pv()) {
        const int c = coord_of(DiuKind::PPv, k, t);
        if (c >= 0) pfu[node].emplace_back(c, -1.0);
        else pf[node] -= base.p_pv[kk][static_cast<std::size_t>(t)];
      }
      if (!ch[kk].empty()) {
        pb[node].emplace_back(ch[kk][static_cast<std::size_t>(s)], -1.0);
        pb[node].emplace_back(dis[kk][static_cast<std::size_t>(s)], 1.0);
      }
    }
    for (int i = 0; i < n; ++i) {
      const auto ii = static_cast<std::size_t>(i);
      w.eq(pb[ii], pf[ii], pfu[ii]);
      w.eq(qb[ii], qf[ii], qfu[ii]);
    }
  }
  return m;
}

KktResiduals check_kkt(const KktCertificate& cert, const InnerModel& m) {
  KktResiduals r;
  const auto& x = cert.x;
  if (static_cast<int>(x.size()) != m.n || cert.pi.size() != m.g_rows.size() || cert.nu.size() != m.e_rows.size() ||
      static_cast<int>(cert.lambda.size()) != m.n || cert.u.size() != m.coords.size()) {
    throw mp::ModelError("KKT certificate dimensions do not match the inner model");
  }
  const auto h = m.h_at(cert.u);
  const auto f = m.f_at(cert.u);
  std::vector<double> grad(static_cast<std::size_t>(m.n), 0.0);
  for (int j = 0; j < m.n; ++j) {
    grad[static_cast<std::size_t>(j)] = m.q_diag[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(j)];
    if (m.sign_constrained[static_cast<std::size_t>(j)] != 0) grad[static_cast<std::size_t>(j)] -= cert.lambda[static_cast<std::size_t>(j)];
  }
  for (std::size_t i = 0; i < m.g_rows.size(); ++i) {
    for (const auto& [j, c] : m.g_rows[i]) grad[static_cast<std::size_t>(j)] += c * cert.pi[i];
    const double slack = h[i] - dot(m.g_rows[i], x);
    r.primal = std::max(r.primal, -slack);
    r.dual = std::max(r.dual, -cert.pi[i]);
    r.complementarity = std::max(r.complementarity, std::abs(cert.pi[i] * slack));
  }
  for (std::size_t i = 0; i < m.e_rows.size(); ++i) {
    for (const auto& [j, c] : m.e_rows[i]) grad[static_cast<std::size_t>(j)] += c * cert.nu[i];
    r.primal = std::max(r.primal, std::abs(dot(m.e_rows[i], x) - f[i]));
  }
  for (int j = 0; j < m.n; ++j) {
    const auto jj = static_cast<std::size_t>(j);
    r.stationarity = std::max(r.stationarity, std::abs(grad[jj]));
    if (m.sign_constrained[jj] == 0) continue;
    r.primal = std::max(r.primal, -x[jj]);
    r.dual = std::max(r.dual, -cert.lambda[jj]);
    r.complementarity = std::max(r.complementarity, std::abs(cert.lambda[jj] * x[jj]));
  }
  for (std::size_t c = 0; c < m.coords.size(); ++c) {
    r.primal = std::max(r.primal, std::max(m.coords[c].lo - cert.u[c], cert.u[c] - m.coords[c].hi));
  }
  return r;
}

namespace detail {

namespace {

struct PeriodSolve {
  InnerModel model;
  KktCertificate cert;
  double value = 0.0;
};

double row_min(const Sparse& row, const InnerModel& m) {
  double s = 0.0;
  for (const auto& [j, c] : row) {
    s += c > 0 ? c * m.lower[static_cast<std::size_t>(j)] : c * m.upper[static_cast<std::size_t>(j)];
  }
  return s;
}

double rhs_max(double h0, const Sparse& hu, const InnerModel& m) {
  double s = h0;
  for (const auto& [c, a] : hu) s += std::max(a * m.coords[static_cast<std::size_t>(c)].lo, a * m.coords[static_cast<std::size_t>(c)].hi);
  return s;
}

// One attempt at the single-level MILP with dual bound `bound`. Returns false
// when some multiplier ends at the bound.
bool solve_kkt_milp(const InnerModel& m, double bound, PeriodSolve& out) {
  mp::ProgramBuilder b(mp::Sense::Maximize);
  const int n = m.n;
  const auto G = m.g_rows.size();
  const auto E = m.e_rows.size();
  const auto C = m.coords.size();
  std::vector<mp::VarRef> x, pi, nu, lam, o, w, bits;
  for (int j = 0; j < n; ++j) x.push_back(b.add_continuous(m.lower[static_cast<std::size_t>(j)], m.upper[static_cast<std::size_t>(j)], m.names[static_cast<std::size_t>(j)]));
  for (std::size_t c = 0; c < C; ++c) bits.push_back(b.add_binary("b" + std::to_string(c)));
  for (std::size_t i = 0; i < G; ++i) {
    pi.push_back(b.add_continuous(0.0, bound, "pi" + std::to_string(i)));
    o.push_back(b.add_binary("o" + std::to_string(i)));
  }
  for (std::size_t i = 0; i < E; ++i) {
    const auto v = b.add_free("nu" + std::to_string(i));
    b.set_bounds(v, -bound, bound);
    nu.push_back(v);
  }
  for (int j = 0; j < n; ++j) {
    if (m.sign_constrained[static_cast<std::size_t>(j)] != 0) {
      lam.push_back(b.add_continuous(0.0, bound, "lam" + std::to_string(j)));
      w.push_back(b.add_binary("w" + std::to_string(j)));
    } else {
      lam.emplace_back();
      w.emplace_back();
    }
  }
  auto u_expr = [&](int c) {
    const auto& d = m.coords[static_cast<std::size_t>(c)];
    return mp::LinearExpr(d.lo).add(bits[static_cast<std::size_t>(c)], d.hi - d.lo);
  };

  std::vector<mp::LinearExpr> stat(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    stat[static_cast<std::size_t>(j)].add(x[static_cast<std::size_t>(j)], m.q_diag[static_cast<std::size_t>(j)]);
    if (lam[static_cast<std::size_t>(j)].valid()) stat[static_cast<std::size_t>(j)].add(lam[static_cast<std::size_t>(j)], -1.0);
  }
  mp::LinearExpr dual_obj;  // pi'h(u) + nu'f(u)
  auto product = [&](mp::VarRef mult, double lo_m, int c, double coef) {
    // coef * mult * u_c with u_c = lo + (hi - lo) b_c; z = mult * b_c linearized exactly.
    const auto& d = m.coords[static_cast<std::size_t>(c)];
    const mp::VarRef bit = bits[static_cast<std::size_t>(c)];
    const auto z = b.add_free();
    b.set_bounds(z, std::min(lo_m, 0.0), bound);
    b.add_row(mp::LinearExpr().add(z, 1.0).add(bit, -bound), mp::RowSense::LessEqual, 0.0);
    b.add_row(mp::LinearExpr().add(z, 1.0).add(bit, -lo_m), mp::RowSense::GreaterEqual, 0.0);
    b.add_row(mp::LinearExpr().add(z, 1.0).add(mult, -1.0).add(bit, -lo_m), mp::RowSense::LessEqual, -lo_m);
    b.add_row(mp::LinearExpr().add(z, 1.0).add(mult, -1.0).add(bit, -bound), mp::RowSense::GreaterEqual, -bound);
    dual_obj.add(mult, coef * d.lo).add(z, coef * (d.hi - d.lo));
  };
  for (std::size_t i = 0; i < G; ++i) {
    mp::LinearExpr gx;
    for (const auto& [j, c] : m.g_rows[i]) {
      gx.add(x[static_cast<std::size_t>(j)], c);
      stat[static_cast<std::size_t>(j)].add(pi[i], c);
    }
    mp::LinearExpr hu(m.h0[i]);
    for (const auto& [c, a] : m.h_u[i]) hu.add(u_expr(c), a);
    mp::LinearExpr slack = hu;
    slack.add(gx, -1.0);
    b.add_row(slack, mp::RowSense::GreaterEqual, 0.0);
    const double big = std::max(1e-6, 1.1 * (rhs_max(m.h0[i], m.h_u[i], m) - row_min(m.g_rows[i], m)));
    mp::add_bigM_indicator(b, o[i], mp::LinearExpr().add(pi[i], 1.0), bound, mp::BigMMode::UpperWhenOff);
    mp::add_bigM_indicator(b, o[i], slack, big, mp::BigMMode::UpperWhenOn);
    dual_obj.add(pi[i], m.h0[i]);
    for (const auto& [c, a] : m.h_u[i]) product(pi[i], 0.0, c, a);
  }
  for (std::size_t i = 0; i < E; ++i) {
    mp::LinearExpr ex;
    for (const auto& [j, c] : m.e_rows[i]) {
      ex.add(x[static_cast<std::size_t>(j)], c);
      stat[static_cast<std::size_t>(j)].add(nu[i], c);
    }
    mp::LinearExpr fu(m.f0[i]);
    for (const auto& [c, a] : m.f_u[i]) fu.add(u_expr(c), a);
    ex.add(fu, -1.0);
    b.add_row(ex, mp::RowSense::Equal, 0.0);
    dual_obj.add(nu[i], m.f0[i]);
    for (const auto& [c, a] : m.f_u[i]) product(nu[i], -bound, c, a);
  }
  for (int j = 0; j < n; ++j) {
    b.add_row(stat[static_cast<std::size_t>(j)], mp::RowSense::Equal, 0.0);
    if (!lam[static_cast<std::size_t>(j)].valid()) continue;
    const double ub = m.upper[static_cast<std::size_t>(j)];
    if (!std::isfinite(ub)) throw mp::ModelError("KKT reformulation needs bounded sign-constrained variables");
    mp::add_bigM_indicator(b, w[static_cast<std::size_t>(j)], mp::LinearExpr().add(lam[static_cast<std::size_t>(j)], 1.0), bound, mp::BigMMode::UpperWhenOff);
    if (ub > 0.0) mp::add_bigM_indicator(b, w[static_cast<std::size_t>(j)], mp::LinearExpr().add(x[static_cast<std::size_t>(j)], 1.0), ub * 1.1, mp::BigMMode::UpperWhenOn);
  }
  mp::LinearExpr obj;
  obj.add(dual_obj, -0.5);
  b.set_objective(obj);
  const mp::Program prog = std::move(b).finish();
  const mp::SolveOutcome res = mp::solve_with_gap(prog, 0.0);
  if (!res.has_solution()) {
    if (res.status == mp::SolveStatus::Infeasible) {
      out.value = std::numeric_limits<double>::infinity();
      return true;
    }
    throw OracleError(std::string("KKT reformulation returned no solution: ") + std::string(mp::to_string(res.status)));
  }
  KktCertificate cert;
  bool at_bound = false;
  auto grab = [&](const std::vector<mp::VarRef>& vs, std::vector<double>& dst) {
    dst.clear();
    for (const auto& v : vs) {
      const double val = v.valid() ? res.value(v) : 0.0;
      if (v.valid() && std::abs(val) >= bound * (1.0 - 1e-6)) at_bound = true;
      dst.push_back(val);
    }
  };
  cert.x.clear();
  for (const auto& v : x) cert.x.push_back(res.value(v));
  grab(pi, cert.pi);
  grab(nu, cert.nu);
  grab(lam, cert.lambda);
  for (const auto& v : o) cert.o.push_back(res.value(v) > 0.5 ? 1 : 0);
  for (const auto& v : w) cert.w.push_back(v.valid() && res.value(v) > 0.5 ? 1 : 0);
  for (std::size_t c = 0; c < C; ++c) {
    const auto& d = m.coords[c];
    cert.u.push_back(res.value(bits[c]) > 0.5 ? d.hi : d.lo);
  }
  if (at_bound) return false;
  cert.residuals = check_kkt(cert, m);
  out.cert = std::move(cert);
  out.value = res.incumbent_value;
  return true;
}

PeriodSolve solve_period(const InnerModel& m, const WorstCaseOptions& options) {
  PeriodSolve ps;
  ps.model = m;
  double scale = 1.0;
  for (int j = 0; j < m.n; ++j) {
    const double span = std::max(std::abs(m.lower[static_cast<std::size_t>(j)]), std::abs(m.upper[static_cast<std::size_t>(j)]));
    if (std::isfinite(span)) scale = std::max(scale, m.q_diag[static_cast<std::size_t>(j)] * span);
  }
  double bound = options.dual_bound > 0.0 ? options.dual_bound : 10.0 * scale * static_cast<double>(std::max<std::size_t>(1, m.e_rows.size()));
  for (int attempt = 0; attempt < 6; ++attempt) {
    if (solve_kkt_milp(m, bound, ps)) return ps;
    bound *= 10.0;
  }
  throw OracleError("KKT reformulation: multipliers remain at the dual bound " + std::to_string(bound / 10.0));
}

InnerModel concat(const std::vector<InnerModel>& parts) {
  InnerModel all;
  for (const auto& m : parts) {
    const int xo = all.n;
    const int co = static_cast<int>(all.coords.size());
    auto shift = [](const Sparse& row, int off) {
      Sparse r = row;
      for (auto& [j, c] : r) j += off;
      return r;
    };
    for (std::size_t i = 0; i < m.g_rows.size(); ++i) {
      all.g_rows.push_back(shift(m.g_rows[i], xo));
      all.h0.push_back(m.h0[i]);
      all.h_u.push_back(shift(m.h_u[i], co));
    }
    for (std::size_t i = 0; i < m.e_rows.size(); ++i) {
      all.e_rows.push_back(shift(m.e_rows[i], xo));
      all.f0.push_back(m.f0[i]);
      all.f_u.push_back(shift(m.f_u[i], co));
    }
    all.n += m.n;
    all.q_diag.insert(all.q_diag.end(), m.q_diag.begin(), m.q_diag.end());
    all.sign_constrained.insert(all.sign_constrained.end(), m.sign_constrained.begin(), m.sign_constrained.end());
    all.names.insert(all.names.end(), m.names.begin(), m.names.end());
    all.lower.insert(all.lower.end(), m.lower.begin(), m.lower.end());
    all.upper.insert(all.upper.end(), m.upper.begin(), m.upper.end());
    all.coords.insert(all.coords.end(), m.coords.begin(), m.coords.end());
  }
  return all;
}

}  // namespace

WorstCase kkt_worst_case(const network::PlanDecision& plan, const Table& hub_load_kw, const io::InstanceSpec& instance,
                         const WorstCaseOptions& options) {
  const bool ess = instance.has_ess() && std::any_of(plan.y_rcs.begin(), plan.y_rcs.end(), [](int y) { return y != 0; });
  std::vector<std::vector<int>> blocks;
  if (ess) {
    blocks.emplace_back(static_cast<std::size_t>(instance.horizon));
    std::iota(blocks.back().begin(), blocks.back().end(), 0);
  } else {
    for (int t = 0; t < instance.horizon; ++t) blocks.push_back({t});
  }
  std::vector<PeriodSolve> solves(blocks.size());
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    solves[i] = solve_period(build_inner_model(plan, hub_load_kw, instance, blocks[i]), options);
  }
  WorstCase wc;
  wc.D = 0.0;
  std::vector<InnerModel> models;
  KktCertificate cert;
  for (auto& s : solves) {
    wc.D += s.value;
    if (!std::isfinite(s.value)) continue;
    models.push_back(s.model);
    auto app = [](auto& dst, const auto& src) { dst.insert(dst.end(), src.begin(), src.end()); };
    app(cert.x, s.cert.x);
    app(cert.pi, s.cert.pi);
    app(cert.nu, s.cert.nu);
    app(cert.lambda, s.cert.lambda);
    app(cert.o, s.cert.o);
    app(cert.w, s.cert.w);
    app(cert.u, s.cert.u);
  }
  InnerModel model = concat(models);
  DiuRealization u = diu_lower_corner(instance);
  if (!instance.has_pv()) u.p_pv = zeros(instance.num_hubs(), instance.horizon);
  for (std::size_t c = 0; c < model.coords.size(); ++c) {
    const auto& d = model.coords[c];
    Table& tab = d.kind == DiuKind::PLoad ? u.p_load : d.kind == DiuKind::QLoad ? u.q_load : u.p_pv;
    tab[static_cast<std::size_t>(d.owner)][static_cast<std::size_t>(d.period)] = cert.u[c];
  }
  cert.residuals = check_kkt(cert, model);
  wc.u = u;
  wc.evaluations = static_cast<long>(blocks.size());
  wc.cert = std::move(cert);
  wc.model = std::move(model);
  return wc;
}

}  // namespace detail

}  // namespace coplan::dispatch
