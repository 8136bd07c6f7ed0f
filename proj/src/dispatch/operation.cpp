#include <algorithm>
#include <cmath>

#include "coplan/dispatch.hpp"

namespace coplan::dispatch {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

Table series_table(const std::vector<io::BoxSeries>& series, int rows, int horizon, bool by_node,
                   const io::InstanceSpec& instance, bool upper) {
  Table out = zeros(rows, horizon);
  for (const auto& s : series) {
    const int idx = by_node ? instance.node_index(s.owner) : instance.hub_index(s.owner);
    if (idx < 0) continue;
    const auto& src = upper ? s.hi : s.lo;
    for (int t = 0; t < horizon && t < static_cast<int>(src.size()); ++t) {
      out[static_cast<std::size_t>(idx)][static_cast<std::size_t>(t)] = src[static_cast<std::size_t>(t)];
    }
  }
  return out;
}

double& entry(DiuRealization& u, DiuKind kind, int owner, int t) {
  Table& tab = kind == DiuKind::PLoad ? u.p_load : kind == DiuKind::QLoad ? u.q_load : u.p_pv;
  return tab[static_cast<std::size_t>(owner)][static_cast<std::size_t>(t)];
}

}  // namespace

Table zeros(int rows, int periods) {
  return Table(static_cast<std::size_t>(std::max(rows, 0)), std::vector<double>(static_cast<std::size_t>(std::max(periods, 0)), 0.0));
}

bool DiuRealization::approx_equal(const DiuRealization& other, double tol) const {
  auto same = [tol](const Table& a, const Table& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i].size() != b[i].size()) return false;
      for (std::size_t t = 0; t < a[i].size(); ++t) {
        if (std::abs(a[i][t] - b[i][t]) > tol) return false;
      }
    }
    return true;
  };
  return same(p_load, other.p_load) && same(q_load, other.q_load) && same(p_pv, other.p_pv);
}

DiuRealization diu_lower_corner(const io::InstanceSpec& instance) {
  DiuRealization u;
  const int T = instance.horizon;
  u.p_load = series_table(instance.diu.p_load, instance.num_nodes(), T, true, instance, false);
  u.q_load = series_table(instance.diu.q_load, instance.num_nodes(), T, true, instance, false);
  u.p_pv = series_table(instance.diu.p_pv, instance.num_hubs(), T, false, instance, false);
  return u;
}

std::vector<DiuCoordinate> diu_coordinates(const io::InstanceSpec& instance) {
  const int T = instance.horizon;
  const DiuRealization lo = diu_lower_corner(instance);
  DiuRealization hi;
  hi.p_load = series_table(instance.diu.p_load, instance.num_nodes(), T, true, instance, true);
  hi.q_load = series_table(instance.diu.q_load, instance.num_nodes(), T, true, instance, true);
  hi.p_pv = series_table(instance.diu.p_pv, instance.num_hubs(), T, false, instance, true);
  std::vector<DiuCoordinate> coords;
  auto scan = [&](DiuKind kind, const Table& a, const Table& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (int t = 0; t < T; ++t) {
        const double l = a[i][static_cast<std::size_t>(t)];
        const double h = b[i][static_cast<std::size_t>(t)];
        if (h > l) coords.push_back({kind, static_cast<int>(i), t, l, h});
      }
    }
  };
  scan(DiuKind::PLoad, lo.p_load, hi.p_load);
  scan(DiuKind::QLoad, lo.q_load, hi.q_load);
  if (instance.has_pv()) scan(DiuKind::PPv, lo.p_pv, hi.p_pv);
  std::stable_sort(coords.begin(), coords.end(),
                   [](const DiuCoordinate& a, const DiuCoordinate& b) { return a.period < b.period; });
  return coords;
}

DiuRealization diu_vertex(const io::InstanceSpec& instance, const std::vector<DiuCoordinate>& coords,
                          const std::vector<char>& upper) {
  DiuRealization u = diu_lower_corner(instance);
  if (!instance.has_pv()) u.p_pv = zeros(instance.num_hubs(), instance.horizon);
  for (std::size_t c = 0; c < coords.size(); ++c) {
    const auto& d = coords[c];
    entry(u, d.kind, d.owner, d.period) = upper[c] != 0 ? d.hi : d.lo;
  }
  return u;
}

bool diu_within_box(const io::InstanceSpec& instance, const DiuRealization& u, double tol) {
  const int T = instance.horizon;
  const DiuRealization lo = diu_lower_corner(instance);
  DiuRealization hi;
  hi.p_load = series_table(instance.diu.p_load, instance.num_nodes(), T, true, instance, true);
  hi.q_load = series_table(instance.diu.q_load, instance.num_nodes(), T, true, instance, true);
  hi.p_pv = series_table(instance.diu.p_pv, instance.num_hubs(), T, false, instance, true);
  auto inside = [tol](const Table& v, const Table& a, const Table& b) {
    if (v.size() != a.size()) return false;
    for (std::size_t i = 0; i < v.size(); ++i) {
      for (std::size_t t = 0; t < v[i].size(); ++t) {
        if (v[i][t] < a[i][t] - tol || v[i][t] > b[i][t] + tol) return false;
      }
    }
    return true;
  };
  return inside(u.p_load, lo.p_load, hi.p_load) && inside(u.q_load, lo.q_load, hi.q_load) &&
         inside(u.p_pv, lo.p_pv, hi.p_pv);
}

mp::LinearExpr Switch::expr(double scale) const {
  if (is_var()) return mp::LinearExpr().add(var, scale);
  return mp::LinearExpr(scale * value);
}

double loss_weight(const io::InstanceSpec& instance, int line, int period) {
  return 365.0 * instance.tou_prices[static_cast<std::size_t>(period)] * instance.bases.power_kva *
         instance.lines[static_cast<std::size_t>(line)].r;
}

OperationVars add_operation_block(mp::ProgramBuilder& b, const io::InstanceSpec& instance, const OperationInputs& in,
                                  const DiuRealization& u, LossMode mode, bool relax_substation, bool relax_capacity,
                                  bool relax_voltage) {
  const int n = instance.num_nodes();
  const int L = instance.num_lines();
  const int H = instance.num_hubs();
  const int S = static_cast<int>(in.periods.size());
  const int root = instance.root_index();
  const double vlo = instance.voltage.lo * instance.voltage.lo;
  const double vhi = instance.voltage.hi * instance.voltage.hi;
  bool any_ess = false;
  if (instance.has_ess()) {
    for (const auto& s : in.hubs) any_ess = any_ess || !s.surely_off();
  }
  if (any_ess && S != instance.horizon) {
    throw mp::ModelError("ESS coupling requires the full horizon in one operation block");
  }

  OperationVars ov;
  ov.p.assign(static_cast<std::size_t>(L), {});
  ov.q.assign(static_cast<std::size_t>(L), {});
  ov.v.assign(static_cast<std::size_t>(n), {});
  ov.e.assign(static_cast<std::size_t>(H), {});
  ov.ch.assign(static_cast<std::size_t>(H), {});
  ov.dis.assign(static_cast<std::size_t>(H), {});

  for (int s = 0; s < S; ++s) {
    const int t = in.periods[static_cast<std::size_t>(s)];
    const std::string tag = "_" + std::to_string(t);
    for (int i = 0; i < n; ++i) {
      double lo = relax_voltage ? -mp::kInf : vlo;
      double hi = relax_voltage ? mp::kInf : vhi;
      if (i == root) lo = hi = 1.0;
      auto v = lo == -mp::kInf ? b.add_free("v" + std::to_string(instance.nodes[static_cast<std::size_t>(i)].id) + tag)
                               : b.add_continuous(lo, hi, "v" + std::to_string(instance.nodes[static_cast<std::size_t>(i)].id) + tag);
      if (lo == -mp::kInf) b.set_bounds(v, lo, hi);
      ov.v[static_cast<std::size_t>(i)].push_back(v);
    }
    const auto& sub = instance.substation;
    if (relax_substation) {
      ov.p_sub.push_back(b.add_free("psub" + tag));
      ov.q_sub.push_back(b.add_free("qsub" + tag));
    } else {
      ov.p_sub.push_back(b.add_continuous(sub.p_min, sub.p_max, "psub" + tag));
      ov.q_sub.push_back(b.add_continuous(sub.q_min, sub.q_max, "qsub" + tag));
    }
    for (int e = 0; e < L; ++e) {
      const Switch& sw = in.lines[static_cast<std::size_t>(e)];
      if (sw.surely_off()) {
        ov.p[static_cast<std::size_t>(e)].push_back({});
        ov.q[static_cast<std::size_t>(e)].push_back({});
        continue;
      }
      const auto& line = instance.lines[static_cast<std::size_t>(e)];
      const std::string lt = "_" + std::to_string(line.from) + "_" + std::to_string(line.to) + tag;
      const double cap = line.capacity;
      mp::VarRef p = b.add_free("p" + lt);
      mp::VarRef q = b.add_free("q" + lt);
      if (!relax_capacity) {
        b.set_bounds(p, -cap, cap);
        b.set_bounds(q, -cap, cap);
        const std::pair<double, double> dirs[] = {{1.0, 0.0}, {0.0, 1.0}, {kInvSqrt2, kInvSqrt2}, {kInvSqrt2, -kInvSqrt2}};
        for (const auto& [a, c] : dirs) {
          if (!sw.is_var() && (a == 0.0 || c == 0.0)) continue;  // bounds already cover the axes
          for (double sign : {1.0, -1.0}) {
            mp::LinearExpr row;
            row.add(p, sign * a).add(q, sign * c);
            row.add(sw.expr(-cap));
            b.add_row(row, mp::RowSense::LessEqual, 0.0);
          }
        }
        mp::QuadConstraint disk;
        disk.squares = {{p, 1.0}, {q, 1.0}};
        if (sw.is_var()) {
          disk.linear = {{sw.var, -cap * cap}};
          disk.rhs = 0.0;
        } else {
          disk.rhs = cap * cap;
        }
        b.add_quad_row(std::move(disk));
      }
      ov.p[static_cast<std::size_t>(e)].push_back(p);
      ov.q[static_cast<std::size_t>(e)].push_back(q);
      const int fi = instance.node_index(line.from);
      const int ti = instance.node_index(line.to);
      mp::LinearExpr drop;
      drop.add(ov.v[static_cast<std::size_t>(fi)].back(), 1.0)
          .add(ov.v[static_cast<std::size_t>(ti)].back(), -1.0)
          .add(p, -2.0 * line.r)
          .add(q, -2.0 * line.x);
      if (sw.is_var()) {
        const double big = b.big_m_for(drop);
        mp::add_bigM_indicator(b, sw.var, drop, big, mp::BigMMode::UpperWhenOn);
        mp::LinearExpr neg;
        neg.add(drop, -1.0);
        mp::add_bigM_indicator(b, sw.var, neg, big, mp::BigMMode::UpperWhenOn);
      } else {
        b.add_row(drop, mp::RowSense::Equal, 0.0);
      }
      for (mp::VarRef f : {p, q}) {
        const double w = loss_weight(instance, e, t);
        if (w <= 0.0) continue;
        if (mode == LossMode::ObjectiveSquares) {
          b.add_objective_square(f, w);
        }
      }
      if (mode == LossMode::Epigraph) {
        const double w = loss_weight(instance, e, t);
        if (w > 0.0) {
          for (mp::VarRef f : {p, q}) {
            const auto theta = b.add_continuous(0.0, mp::kInf, "loss" + lt);
            mp::QuadConstraint epi;
            epi.squares = {{f, w}};
            epi.linear = {{theta, -1.0}};
            b.add_quad_row(std::move(epi));
            for (double frac : {0.125, 0.25, 0.5, 1.0}) {
              for (double sign : {1.0, -1.0}) {
                const double f0 = sign * frac * cap;
                b.add_row(mp::LinearExpr().add(theta, 1.0).add(f, -2.0 * w * f0), mp::RowSense::GreaterEqual, -w * f0 * f0);
              }
            }
            ov.loss.add(theta, 1.0);
          }
        }
      }
    }
  }

  if (any_ess) {
    const auto& ess = instance.ess;
    const double e0 = ess.e_min + 0.5 * (ess.e_max - ess.e_min);
    for (int k = 0; k < H; ++k) {
      const Switch& sw = in.hubs[static_cast<std::size_t>(k)];
      if (sw.surely_off()) continue;
      const std::string ht = "_h" + std::to_string(instance.hubs[static_cast<std::size_t>(k)].id);
      auto& ev = ov.e[static_cast<std::size_t>(k)];
      ev.push_back(b.add_continuous(e0, e0, "e" + ht + "_0"));
      for (int s = 0; s < S; ++s) {
        const std::string tag = ht + "_" + std::to_string(in.periods[static_cast<std::size_t>(s)]);
        const auto ch = b.add_continuous(0.0, ess.p_ch_max, "ch" + tag);
        const auto dis = b.add_continuous(0.0, ess.p_dis_max, "dis" + tag);
        if (sw.is_var()) {
          b.add_row(mp::LinearExpr().add(ch, 1.0).add(sw.var, -ess.p_ch_max), mp::RowSense::LessEqual, 0.0);
          b.add_row(mp::LinearExpr().add(dis, 1.0).add(sw.var, -ess.p_dis_max), mp::RowSense::LessEqual, 0.0);
        }
        const bool last = s + 1 == S;
        const auto next = last ? b.add_continuous(e0, e0, "e" + ht + "_end")
                               : b.add_continuous(ess.e_min, ess.e_max, "e" + ht + "_" + std::to_string(s + 1));
        mp::LinearExpr bal;
        bal.add(next, 1.0).add(ev.back(), -1.0).add(ch, -ess.eta_ch).add(dis, ess.eta_dis);
        b.add_row(bal, mp::RowSense::Equal, 0.0);
        ev.push_back(next);
        ov.ch[static_cast<std::size_t>(k)].push_back(ch);
        ov.dis[static_cast<std::size_t>(k)].push_back(dis);
      }
    }
  }

  for (int s = 0; s < S; ++s) {
    const int t = in.periods[static_cast<std::size_t>(s)];
    std::vector<mp::LinearExpr> pbal(static_cast<std::size_t>(n)), qbal(static_cast<std::size_t>(n));
    for (int e = 0; e < L; ++e) {
      const mp::VarRef p = ov.p[static_cast<std::size_t>(e)][static_cast<std::size_t>(s)];
      if (!p.valid()) continue;
      const mp::VarRef q = ov.q[static_cast<std::size_t>(e)][static_cast<std::size_t>(s)];
      const auto& line = instance.lines[static_cast<std::size_t>(e)];
      const auto fi = static_cast<std::size_t>(instance.node_index(line.from));
      const auto ti = static_cast<std::size_t>(instance.node_index(line.to));
      pbal[ti].add(p, 1.0);
      pbal[fi].add(p, -1.0);
      qbal[ti].add(q, 1.0);
      qbal[fi].add(q, -1.0);
    }
    pbal[static_cast<std::size_t>(root)].add(ov.p_sub[static_cast<std::size_t>(s)], 1.0);
    qbal[static_cast<std::size_t>(root)].add(ov.q_sub[static_cast<std::size_t>(s)], 1.0);
    for (int k = 0; k < H; ++k) {
      const Switch& sw = in.hubs[static_cast<std::size_t>(k)];
      const auto node = static_cast<std::size_t>(instance.node_index(instance.hubs[static_cast<std::size_t>(k)].dn_node));
      pbal[node].add(in.hub_load[static_cast<std::size_t>(k)][static_cast<std::size_t>(s)], -1.0);
      if (instance.has_pv()) {
        const double pv = u.p_pv[static_cast<std::size_t>(k)][static_cast<std::size_t>(t)];
        if (pv != 0.0) pbal[node].add(sw.expr(pv));
      }
      if (!ov.ch[static_cast<std::size_t>(k)].empty()) {
        pbal[node].add(ov.ch[static_cast<std::size_t>(k)][static_cast<std::size_t>(s)], -1.0);
        pbal[node].add(ov.dis[static_cast<std::size_t>(k)][static_cast<std::size_t>(s)], 1.0);
      }
    }
    for (int i = 0; i < n; ++i) {
      const std::string tag = "_" + std::to_string(instance.nodes[static_cast<std::size_t>(i)].id) + "_" + std::to_string(t);
      b.add_row(pbal[static_cast<std::size_t>(i)], mp::RowSense::Equal,
                u.p_load[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)], "pbal" + tag);
      b.add_row(qbal[static_cast<std::size_t>(i)], mp::RowSense::Equal,
                u.q_load[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)], "qbal" + tag);
    }
  }
  return ov;
}

}  // namespace coplan::dispatch
