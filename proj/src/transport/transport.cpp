#include "coplan/transport.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "coplan/mathprog.hpp"

namespace coplan::transport {

namespace {

constexpr double kSqrt2 = 1.4142135623730950488;
constexpr double kPi = 3.14159265358979323846;

int find_root(std::vector<int>& parent, int v) {
  while (parent[static_cast<std::size_t>(v)] != v) {
    parent[static_cast<std::size_t>(v)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(v)])];
    v = parent[static_cast<std::size_t>(v)];
  }
  return v;
}

// Uniform on [0, 1) from the top 53 bits; identical across standard libraries.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::mt19937_64 keyed_rng(unsigned long long seed, unsigned long long stream, unsigned long long index) {
  std::seed_seq seq{static_cast<unsigned>(seed & 0xffffffffu), static_cast<unsigned>(seed >> 32),
                    static_cast<unsigned>(stream), static_cast<unsigned>(index & 0xffffffffu),
                    static_cast<unsigned>(index >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

Matrix shortest_distance_matrix(const std::vector<io::HubSpec>& hubs, const std::vector<io::HubEdgeSpec>& edges) {
  const int h = static_cast<int>(hubs.size());
  auto index_of = [&](int id) {
    for (int k = 0; k < h; ++k) {
      if (hubs[static_cast<std::size_t>(k)].id == id) return k;
    }
    throw TransportError("hub edge references unknown hub " + std::to_string(id));
  };
  Matrix d(static_cast<std::size_t>(h), std::vector<double>(static_cast<std::size_t>(h), std::numeric_limits<double>::infinity()));
  std::vector<int> parent(static_cast<std::size_t>(h));
  std::iota(parent.begin(), parent.end(), 0);
  for (int k = 0; k < h; ++k) d[static_cast<std::size_t>(k)][static_cast<std::size_t>(k)] = 0.0;
  for (const auto& e : edges) {
    if (!(e.distance_km >= 0.0)) throw TransportError("hub edge distances must be nonnegative");
    const int a = index_of(e.a);
    const int b = index_of(e.b);
    auto& ab = d[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
    ab = std::min(ab, e.distance_km);
    d[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)] = ab;
    parent[static_cast<std::size_t>(find_root(parent, a))] = find_root(parent, b);
  }
  std::vector<std::vector<int>> groups;
  std::vector<int> group_of(static_cast<std::size_t>(h), -1);
  for (int k = 0; k < h; ++k) {
    const int r = find_root(parent, k);
    if (group_of[static_cast<std::size_t>(r)] < 0) {
      group_of[static_cast<std::size_t>(r)] = static_cast<int>(groups.size());
      groups.emplace_back();
    }
    groups[static_cast<std::size_t>(group_of[static_cast<std::size_t>(r)])].push_back(hubs[static_cast<std::size_t>(k)].id);
  }
  if (groups.size() > 1) {
    std::ostringstream msg;
    msg << "hub graph is disconnected; components:";
    for (const auto& g : groups) {
      msg << " {";
      for (std::size_t i = 0; i < g.size(); ++i) msg << (i ? "," : "") << g[i];
      msg << '}';
    }
    throw TransportError(msg.str());
  }
  for (int m = 0; m < h; ++m) {
    for (int i = 0; i < h; ++i) {
      const double dim = d[static_cast<std::size_t>(i)][static_cast<std::size_t>(m)];
      for (int j = 0; j < h; ++j) {
        double& dij = d[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        dij = std::min(dij, dim + d[static_cast<std::size_t>(m)][static_cast<std::size_t>(j)]);
      }
    }
  }
  return d;
}

Matrix shortest_distance_matrix(const io::InstanceSpec& instance) {
  return shortest_distance_matrix(instance.hubs, instance.hub_edges);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / kSqrt2); }

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * kPi); }

double normal_quantile(double p) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                             1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                             6.680131188771972e+01,  -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                             -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                             3.754408661907416e+00};
  const double plow = 0.02425;
  double x = 0.0;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  for (int it = 0; it < 2; ++it) {
    const double e = normal_cdf(x) - p;
    const double u = e * std::sqrt(2.0 * kPi) * std::exp(0.5 * x * x);
    x = x - u / (1.0 + 0.5 * x * u);
  }
  return x;
}

double TruncatedNormal::mean() const {
  if (hi <= lo) return lo;
  if (!(sigma > 0.0)) return std::clamp(mu, lo, hi);
  const double alpha = (lo - mu) / sigma;
  const double beta = (hi - mu) / sigma;
  const double z = normal_cdf(beta) - normal_cdf(alpha);
  if (!(z > 1e-300)) return std::clamp(mu, lo, hi);
  return std::clamp(mu + sigma * (normal_pdf(alpha) - normal_pdf(beta)) / z, lo, hi);
}

double TruncatedNormal::quantile(double p) const {
  if (hi <= lo) return lo;
  if (!(sigma > 0.0)) return std::clamp(mu, lo, hi);
  const double alpha = (lo - mu) / sigma;
  const double beta = (hi - mu) / sigma;
  double x = 0.0;
  if (alpha > 0.0) {
    // Upper tail: work with survival probabilities for accuracy.
    const double sa = normal_cdf(-alpha);
    const double sb = normal_cdf(-beta);
    if (!(sa - sb > 1e-300)) return std::clamp(mu, lo, hi);
    x = mu - sigma * normal_quantile(sa - p * (sa - sb));
  } else {
    const double fa = normal_cdf(alpha);
    const double fb = normal_cdf(beta);
    if (!(fb - fa > 1e-300)) return std::clamp(mu, lo, hi);
    x = mu + sigma * normal_quantile(fa + p * (fb - fa));
  }
  return std::clamp(x, lo, hi);
}

double TruncatedNormal::sample(std::mt19937_64& rng) const { return quantile(uniform01(rng)); }

std::vector<std::vector<int>> TransportScenario::m_in(int num_hubs) const {
  std::vector<std::vector<int>> m(static_cast<std::size_t>(num_hubs), std::vector<int>(arrival_hub.size(), 0));
  for (std::size_t u = 0; u < arrival_hub.size(); ++u) m[static_cast<std::size_t>(arrival_hub[u])][u] = 1;
  return m;
}

namespace {

void fill_evs(const io::InstanceSpec& instance, TransportScenario& s) {
  const double total = std::accumulate(instance.hubs.begin(), instance.hubs.end(), 0.0,
                                       [](double acc, const io::HubSpec& h) { return acc + h.pop_weight; });
  s.arrival_hub.clear();
  s.soc_init.clear();
  s.soc_target.clear();
  for (int u = 0; u < s.fleet_size; ++u) {
    auto rng = keyed_rng(s.seed, 0xE5, static_cast<unsigned long long>(u));
    const double pick = uniform01(rng) * total;
    double acc = 0.0;
    int hub = instance.num_hubs() - 1;
    for (int k = 0; k < instance.num_hubs(); ++k) {
      acc += instance.hubs[static_cast<std::size_t>(k)].pop_weight;
      if (pick < acc) {
        hub = k;
        break;
      }
    }
    while (hub > 0 && instance.hubs[static_cast<std::size_t>(hub)].pop_weight <= 0.0) --hub;
    const auto& ev = instance.ev;
    double init = ev.soc_init_kwh.lo + uniform01(rng) * (ev.soc_init_kwh.hi - ev.soc_init_kwh.lo);
    double target = ev.soc_target_kwh.lo + uniform01(rng) * (ev.soc_target_kwh.hi - ev.soc_target_kwh.lo);
    init = std::clamp(init, ev.e_min_kwh, ev.e_max_kwh);
    target = std::clamp(std::max(target, init), ev.e_min_kwh, ev.e_max_kwh);
    s.arrival_hub.push_back(hub);
    s.soc_init.push_back(init);
    s.soc_target.push_back(target);
  }
}

int round_into(double x, double lo, double hi) {
  const double a = std::ceil(lo - 1e-9);
  const double b = std::floor(hi + 1e-9);
  if (a > b) return static_cast<int>(std::lround(std::clamp(x, lo, hi)));
  return static_cast<int>(std::clamp(std::round(x), a, b));
}

}  // namespace

TransportScenario sample_scenario(const io::InstanceSpec& instance, const io::AlgoParams& params, IntervalMode mode,
                                  double mu_prev, long draw_index) {
  TransportScenario s;
  s.seed = params.seed;
  s.draw_index = draw_index;
  const double lo = instance.fleet.lo;
  const double hi = instance.fleet.hi;
  s.sigma = std::isnan(params.fleet_sigma) ? instance.fleet.sigma : params.fleet_sigma;
  const double mu0 = std::isnan(params.fleet_mu) ? instance.fleet.mu : params.fleet_mu;
  switch (mode) {
    case IntervalMode::Full: s.interval = {lo, hi}; break;
    case IntervalMode::Lower: s.interval = {lo, std::clamp(mu_prev, lo, hi)}; break;
    case IntervalMode::Upper: s.interval = {std::clamp(mu_prev, lo, hi), hi}; break;
    case IntervalMode::AtUpperBound: s.interval = {hi, hi}; break;
  }
  s.mu = mode == IntervalMode::Full ? mu0 : std::clamp(mu_prev, s.interval.lo, s.interval.hi);
  double draw = 0.0;
  if (s.interval.hi - s.interval.lo <= 0.0) {
    if (mode == IntervalMode::Lower || mode == IntervalMode::Upper) {
      s.note = "sampling interval collapsed at " + std::to_string(s.interval.lo) + "; using its point mass";
    }
    draw = s.interval.lo;
  } else {
    auto rng = keyed_rng(params.seed, 0xF1, static_cast<unsigned long long>(draw_index));
    draw = TruncatedNormal{s.mu, s.sigma, s.interval.lo, s.interval.hi}.sample(rng);
  }
  s.draw = draw;
  s.fleet_size = round_into(draw, lo, hi);
  fill_evs(instance, s);
  return s;
}

TransportScenario fixed_fleet_scenario(const io::InstanceSpec& instance, unsigned long long seed, int fleet_size) {
  TransportScenario s;
  s.seed = seed;
  s.fleet_size = fleet_size;
  s.interval = {static_cast<double>(fleet_size), static_cast<double>(fleet_size)};
  s.mu = fleet_size;
  s.draw = fleet_size;
  fill_evs(instance, s);
  return s;
}

std::vector<double> canonical_schedule(const io::InstanceSpec& instance, double soc_init, double soc_target) {
  const auto& ev = instance.ev;
  std::vector<double> p(static_cast<std::size_t>(instance.horizon), 0.0);
  for (int t : ev.charge_window) p[static_cast<std::size_t>(t)] = ev.p_min_kw;
  double need = soc_target - soc_init - ev.p_min_kw * static_cast<double>(ev.charge_window.size());
  std::vector<int> order = ev.charge_window;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double pa = instance.tou_prices[static_cast<std::size_t>(a)];
    const double pb = instance.tou_prices[static_cast<std::size_t>(b)];
    return pa != pb ? pa < pb : a < b;
  });
  for (int t : order) {
    if (need <= 0.0) break;
    const double add = std::min(need, ev.p_max_kw - ev.p_min_kw);
    p[static_cast<std::size_t>(t)] += add;
    need -= add;
  }
  const double final_soc = soc_init + std::accumulate(p.begin(), p.end(), 0.0);
  if (need > 1e-9 || final_soc > ev.e_max_kwh + 1e-9 || final_soc < ev.e_min_kwh - 1e-9) {
    throw AssignmentInfeasible("EV energy window cannot be met: init " + std::to_string(soc_init) + " kWh, target " +
                               std::to_string(soc_target) + " kWh");
  }
  return p;
}

double EvAssignment::p_ev(int hub, int ev, int period) const {
  return m_se[static_cast<std::size_t>(hub)][static_cast<std::size_t>(ev)] != 0
             ? p_ut[static_cast<std::size_t>(ev)][static_cast<std::size_t>(period)]
             : 0.0;
}

bool count_bounds_active(const io::InstanceSpec& instance) {
  return std::any_of(instance.hubs.begin(), instance.hubs.end(),
                     [](const io::HubSpec& h) { return h.n_min > 0.0 || std::isfinite(h.n_max); });
}

std::vector<int> hub_preference(const Matrix& distance, int arrival) {
  std::vector<int> order(distance.size());
  std::iota(order.begin(), order.end(), 0);
  const auto& row = distance[static_cast<std::size_t>(arrival)];
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return row[static_cast<std::size_t>(a)] < row[static_cast<std::size_t>(b)]; });
  return order;
}

namespace {

void finish_costs(EvAssignment& a, const TransportScenario& s, const io::InstanceSpec& instance, const Matrix& dist) {
  const int h = instance.num_hubs();
  a.n_k.assign(static_cast<std::size_t>(h), 0);
  a.travel_cost = 0.0;
  a.charging_cost = 0.0;
  const double cev = instance.ev.travel_cost_per_km();
  for (int u = 0; u < s.fleet_size; ++u) {
    for (int k = 0; k < h; ++k) {
      if (a.m_se[static_cast<std::size_t>(k)][static_cast<std::size_t>(u)] == 0) continue;
      a.n_k[static_cast<std::size_t>(k)]++;
      a.travel_cost += 365.0 * cev * dist[static_cast<std::size_t>(s.arrival_hub[static_cast<std::size_t>(u)])][static_cast<std::size_t>(k)];
    }
    for (int t : instance.ev.charge_window) {
      a.charging_cost += 365.0 * instance.tou_prices[static_cast<std::size_t>(t)] *
                         a.p_ut[static_cast<std::size_t>(u)][static_cast<std::size_t>(t)];
    }
  }
  a.objective = a.travel_cost + a.charging_cost;
}

}  // namespace

EvAssignment closest_assignment(const std::vector<int>& y_rcs, const TransportScenario& scenario,
                                const io::InstanceSpec& instance) {
  const int h = instance.num_hubs();
  const Matrix dist = shortest_distance_matrix(instance);
  EvAssignment a;
  a.m_se.assign(static_cast<std::size_t>(h), std::vector<int>(static_cast<std::size_t>(scenario.fleet_size), 0));
  for (int u = 0; u < scenario.fleet_size; ++u) {
    int chosen = -1;
    for (int k : hub_preference(dist, scenario.arrival_hub[static_cast<std::size_t>(u)])) {
      if (y_rcs[static_cast<std::size_t>(k)] != 0) {
        chosen = k;
        break;
      }
    }
    if (chosen < 0) throw AssignmentInfeasible("no open RCS for a nonzero fleet");
    a.m_se[static_cast<std::size_t>(chosen)][static_cast<std::size_t>(u)] = 1;
    a.p_ut.push_back(canonical_schedule(instance, scenario.soc_init[static_cast<std::size_t>(u)],
                                        scenario.soc_target[static_cast<std::size_t>(u)]));
  }
  finish_costs(a, scenario, instance, dist);
  return a;
}

EvAssignment solve_assignment(const std::vector<int>& y_rcs, const TransportScenario& scenario,
                              const io::InstanceSpec& instance, double gap) {
  const int h = instance.num_hubs();
  const int n = scenario.fleet_size;
  const int T = instance.horizon;
  if (n > 0 && std::none_of(y_rcs.begin(), y_rcs.end(), [](int v) { return v != 0; })) {
    throw AssignmentInfeasible("no open RCS for a nonzero fleet");
  }
  if (n == 0) {
    if (std::any_of(instance.hubs.begin(), instance.hubs.end(), [](const io::HubSpec& hub) { return hub.n_min > 0.0; })) {
      throw AssignmentInfeasible("middle-level assignment is infeasible");
    }
    return closest_assignment(y_rcs, scenario, instance);
  }
  const Matrix dist = shortest_distance_matrix(instance);
  const auto& ev = instance.ev;
  const double cev = instance.ev.travel_cost_per_km();
  std::vector<char> in_window(static_cast<std::size_t>(T), 0);
  for (int t : ev.charge_window) in_window[static_cast<std::size_t>(t)] = 1;

  mp::ProgramBuilder b(mp::Sense::Minimize);
  std::vector<std::vector<mp::VarRef>> m(static_cast<std::size_t>(h)), pev(static_cast<std::size_t>(h) * static_cast<std::size_t>(n));
  std::vector<std::vector<mp::VarRef>> p(static_cast<std::size_t>(n));
  mp::LinearExpr obj;
  for (int u = 0; u < n; ++u) {
    for (int t = 0; t < T; ++t) {
      const bool w = in_window[static_cast<std::size_t>(t)] != 0;
      const auto v = b.add_continuous(w ? ev.p_min_kw : 0.0, w ? ev.p_max_kw : 0.0, "p_" + std::to_string(u) + "_" + std::to_string(t));
      p[static_cast<std::size_t>(u)].push_back(v);
      if (w) obj.add(v, 365.0 * instance.tou_prices[static_cast<std::size_t>(t)]);
    }
    mp::LinearExpr energy(scenario.soc_init[static_cast<std::size_t>(u)]);
    for (int t : ev.charge_window) energy.add(p[static_cast<std::size_t>(u)][static_cast<std::size_t>(t)], 1.0);
    b.add_row(energy, mp::RowSense::GreaterEqual, std::max(ev.e_min_kwh, scenario.soc_target[static_cast<std::size_t>(u)]));
    b.add_row(energy, mp::RowSense::LessEqual, ev.e_max_kwh);
  }
  for (int k = 0; k < h; ++k) {
    for (int u = 0; u < n; ++u) {
      const auto v = b.add_binary("m_" + std::to_string(k) + "_" + std::to_string(u));
      if (y_rcs[static_cast<std::size_t>(k)] == 0) b.set_bounds(v, 0.0, 0.0);
      m[static_cast<std::size_t>(k)].push_back(v);
      obj.add(v, 365.0 * cev * dist[static_cast<std::size_t>(scenario.arrival_hub[static_cast<std::size_t>(u)])][static_cast<std::size_t>(k)]);
      auto& row = pev[static_cast<std::size_t>(k) * static_cast<std::size_t>(n) + static_cast<std::size_t>(u)];
      for (int t : ev.charge_window) {
        const auto q = b.add_continuous(0.0, mp::kInf);
        row.push_back(q);
        const double big = ev.p_max_kw;
        mp::add_bigM_indicator(b, v, mp::LinearExpr().add(q, 1.0), big, mp::BigMMode::UpperWhenOff);
        mp::LinearExpr diff;
        diff.add(q, 1.0).add(p[static_cast<std::size_t>(u)][static_cast<std::size_t>(t)], -1.0);
        // |q - p| <= M (1 - m)
        mp::add_bigM_indicator(b, v, diff, big, mp::BigMMode::UpperWhenOn);
        mp::LinearExpr neg;
        neg.add(diff, -1.0);
        mp::add_bigM_indicator(b, v, neg, big, mp::BigMMode::UpperWhenOn);
      }
    }
  }
  for (int u = 0; u < n; ++u) {
    mp::LinearExpr one;
    for (int k = 0; k < h; ++k) one.add(m[static_cast<std::size_t>(k)][static_cast<std::size_t>(u)], 1.0);
    b.add_row(one, mp::RowSense::Equal, 1.0);
  }
  for (int k = 0; k < h; ++k) {
    const auto& hub = instance.hubs[static_cast<std::size_t>(k)];
    mp::LinearExpr count;
    for (int u = 0; u < n; ++u) count.add(m[static_cast<std::size_t>(k)][static_cast<std::size_t>(u)], 1.0);
    if (hub.n_min > 0.0) b.add_row(count, mp::RowSense::GreaterEqual, hub.n_min);
    if (std::isfinite(hub.n_max)) b.add_row(count, mp::RowSense::LessEqual, hub.n_max);
  }
  b.set_objective(obj);
  const mp::Program prog = std::move(b).finish();
  const mp::SolveOutcome out = mp::solve_with_gap(prog, gap);
  if (out.status == mp::SolveStatus::Infeasible) throw AssignmentInfeasible("middle-level assignment is infeasible");
  if (!out.has_solution()) throw AssignmentInfeasible("middle-level assignment returned no solution");

  EvAssignment a;
  a.m_se.assign(static_cast<std::size_t>(h), std::vector<int>(static_cast<std::size_t>(n), 0));
  a.p_ut.assign(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(T), 0.0));
  for (int u = 0; u < n; ++u) {
    for (int k = 0; k < h; ++k) {
      a.m_se[static_cast<std::size_t>(k)][static_cast<std::size_t>(u)] =
          out.value(m[static_cast<std::size_t>(k)][static_cast<std::size_t>(u)]) > 0.5 ? 1 : 0;
    }
    for (int t = 0; t < T; ++t) {
      a.p_ut[static_cast<std::size_t>(u)][static_cast<std::size_t>(t)] = out.value(p[static_cast<std::size_t>(u)][static_cast<std::size_t>(t)]);
    }
  }
  if (!count_bounds_active(instance)) {
    // Equal-cost alternatives resolved towards the lowest hub id.
    for (int u = 0; u < n; ++u) {
      const int arr = scenario.arrival_hub[static_cast<std::size_t>(u)];
      int current = 0;
      for (int k = 0; k < h; ++k) {
        if (a.m_se[static_cast<std::size_t>(k)][static_cast<std::size_t>(u)] != 0) current = k;
      }
      const double dcur = dist[static_cast<std::size_t>(arr)][static_cast<std::size_t>(current)];
      for (int k = 0; k < current; ++k) {
        if (y_rcs[static_cast<std::size_t>(k)] != 0 && dist[static_cast<std::size_t>(arr)][static_cast<std::size_t>(k)] <= dcur + 1e-12) {
          a.m_se[static_cast<std::size_t>(current)][static_cast<std::size_t>(u)] = 0;
          a.m_se[static_cast<std::size_t>(k)][static_cast<std::size_t>(u)] = 1;
          break;
        }
      }
    }
  }
  finish_costs(a, scenario, instance, dist);
  return a;
}

std::vector<std::vector<double>> charging_load(const EvAssignment& assignment, int horizon) {
  const std::size_t h = assignment.m_se.size();
  std::vector<std::vector<double>> load(h, std::vector<double>(static_cast<std::size_t>(horizon), 0.0));
  for (std::size_t k = 0; k < h; ++k) {
    for (std::size_t u = 0; u < assignment.p_ut.size(); ++u) {
      if (assignment.m_se[k][u] == 0) continue;
      for (int t = 0; t < horizon; ++t) load[k][static_cast<std::size_t>(t)] += assignment.p_ut[u][static_cast<std::size_t>(t)];
    }
  }
  return load;
}

std::vector<std::string> check_assignment(const EvAssignment& a, const std::vector<int>& y_rcs,
                                          const TransportScenario& s, const io::InstanceSpec& instance, double tol) {
  std::vector<std::string> issues;
  const int h = instance.num_hubs();
  const auto& ev = instance.ev;
  std::vector<char> in_window(static_cast<std::size_t>(instance.horizon), 0);
  for (int t : ev.charge_window) in_window[static_cast<std::size_t>(t)] = 1;
  auto flag = [&](const std::string& what, int u) { issues.push_back(what + " (EV " + std::to_string(u) + ")"); };
  for (int k = 0; k < h; ++k) {
    int count = 0;
    for (int u = 0; u < s.fleet_size; ++u) count += a.m_se[static_cast<std::size_t>(k)][static_cast<std::size_t>(u)];
    const auto& hub = instance.hubs[static_cast<std::size_t>(k)];
    if (count != a.n_k[static_cast<std::size_t>(k)]) issues.push_back("n_k mismatch at hub " + std::to_string(hub.id));
    if (count < hub.n_min - tol || count > hub.n_max + tol) issues.push_back("n_k outside bounds at hub " + std::to_string(hub.id));
  }
  for (int u = 0; u < s.fleet_size; ++u) {
    int ones = 0;
    for (int k = 0; k < h; ++k) {
      const int v = a.m_se[static_cast<std::size_t>(k)][static_cast<std::size_t>(u)];
      ones += v;
      if (v > y_rcs[static_cast<std::size_t>(k)]) flag("assigned to a hub without RCS", u);
    }
    if (ones != 1) flag("not assigned to exactly one hub", u);
    double energy = s.soc_init[static_cast<std::size_t>(u)];
    for (int t = 0; t < instance.horizon; ++t) {
      const double p = a.p_ut[static_cast<std::size_t>(u)][static_cast<std::size_t>(t)];
      if (in_window[static_cast<std::size_t>(t)] == 0) {
        if (std::abs(p) > tol) flag("charging outside the window", u);
        continue;
      }
      energy += p;
      if (p < ev.p_min_kw - tol || p > ev.p_max_kw + tol) flag("charging power outside limits", u);
      for (int k = 0; k < h; ++k) {
        const double expect = a.m_se[static_cast<std::size_t>(k)][static_cast<std::size_t>(u)] != 0 ? p : 0.0;
        if (std::abs(a.p_ev(k, u, t) - expect) > tol) flag("hub power not linked to assignment", u);
      }
    }
    if (energy < ev.e_min_kwh - tol || energy > ev.e_max_kwh + tol) flag("final energy outside the SoC window", u);
    if (energy < s.soc_target[static_cast<std::size_t>(u)] - tol) flag("departure energy below target", u);
  }
  return issues;
}

nlohmann::json scenario_to_json(const TransportScenario& s) {
  return nlohmann::json{{"schema_version", io::kSchemaVersion},
                        {"fleet_size", s.fleet_size},
                        {"arrival_hub", s.arrival_hub},
                        {"soc_init", s.soc_init},
                        {"soc_target", s.soc_target},
                        {"draw_interval", {s.interval.lo, s.interval.hi}},
                        {"mu", s.mu},
                        {"sigma", s.sigma},
                        {"draw", s.draw},
                        {"seed", s.seed},
                        {"draw_index", s.draw_index}};
}

TransportScenario scenario_from_json(const nlohmann::json& doc) {
  TransportScenario s;
  try {
    if (doc.at("schema_version").get<int>() != io::kSchemaVersion) throw io::IoError("scenario: unsupported schema_version");
    s.fleet_size = doc.at("fleet_size").get<int>();
    s.arrival_hub = doc.at("arrival_hub").get<std::vector<int>>();
    s.soc_init = doc.at("soc_init").get<std::vector<double>>();
    s.soc_target = doc.at("soc_target").get<std::vector<double>>();
    const auto iv = doc.at("draw_interval").get<std::vector<double>>();
    if (iv.size() != 2) throw io::IoError("scenario: draw_interval needs two entries");
    s.interval = {iv[0], iv[1]};
    s.mu = doc.at("mu").get<double>();
    s.sigma = doc.at("sigma").get<double>();
    s.draw = doc.value("draw", static_cast<double>(s.fleet_size));
    s.seed = doc.at("seed").get<unsigned long long>();
    s.draw_index = doc.at("draw_index").get<long>();
  } catch (const nlohmann::json::exception& e) {
    throw io::IoError(std::string("scenario: ") + e.what());
  }
  const auto n = static_cast<std::size_t>(s.fleet_size);
  if (s.arrival_hub.size() != n || s.soc_init.size() != n || s.soc_target.size() != n) {
    throw io::IoError("scenario: per-EV arrays must have fleet_size entries");
  }
  return s;
}

}  // namespace coplan::transport
