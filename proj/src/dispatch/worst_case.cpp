#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "coplan/dispatch.hpp"
#include "kkt_internal.hpp"

namespace coplan::dispatch {

namespace {

constexpr double kInfD = std::numeric_limits<double>::infinity();

struct Group {
  std::vector<int> periods;
  std::vector<int> coords;  // indices into the coordinate list
};

DiuRealization with_bits(DiuRealization base, const std::vector<DiuCoordinate>& coords, const std::vector<int>& ids,
                         unsigned long long mask) {
  for (std::size_t j = 0; j < ids.size(); ++j) {
    const auto& c = coords[static_cast<std::size_t>(ids[j])];
    Table& tab = c.kind == DiuKind::PLoad ? base.p_load : c.kind == DiuKind::QLoad ? base.q_load : base.p_pv;
    tab[static_cast<std::size_t>(c.owner)][static_cast<std::size_t>(c.period)] = ((mask >> j) & 1ULL) ? c.hi : c.lo;
  }
  return base;
}

DiuRealization with_flags(DiuRealization base, const std::vector<DiuCoordinate>& coords, const std::vector<int>& ids,
                          const std::vector<char>& up) {
  for (std::size_t j = 0; j < ids.size(); ++j) {
    const auto& c = coords[static_cast<std::size_t>(ids[j])];
    Table& tab = c.kind == DiuKind::PLoad ? base.p_load : c.kind == DiuKind::QLoad ? base.q_load : base.p_pv;
    tab[static_cast<std::size_t>(c.owner)][static_cast<std::size_t>(c.period)] = up[j] != 0 ? c.hi : c.lo;
  }
  return base;
}

struct GroupResult {
  double value = -kInfD;
  std::vector<char> up;
  long evaluations = 0;
  bool exhaustive = true;
};

double evaluate(const network::PlanDecision& plan, const Table& hub_load_kw, const io::InstanceSpec& instance,
                const DiuRealization& u, const std::vector<int>& periods) {
  const DistFlowState st = dispatch_min_loss_periods(plan, hub_load_kw, u, instance, periods);
  return st.feasible ? st.loss_cost : kInfD;
}

GroupResult sweep_group(const network::PlanDecision& plan, const Table& hub_load_kw, const io::InstanceSpec& instance,
                        const DiuRealization& base, const std::vector<DiuCoordinate>& coords, const Group& g,
                        bool parallel) {
  const int d = static_cast<int>(g.coords.size());
  const long long count = 1LL << d;
  std::vector<double> values(static_cast<std::size_t>(count), -kInfD);
  if (parallel) {
#pragma omp parallel for schedule(dynamic)
    for (long long mask = 0; mask < count; ++mask) {
      values[static_cast<std::size_t>(mask)] =
          evaluate(plan, hub_load_kw, instance, with_bits(base, coords, g.coords, static_cast<unsigned long long>(mask)), g.periods);
    }
  } else {
    for (long long mask = 0; mask < count; ++mask) {
      values[static_cast<std::size_t>(mask)] =
          evaluate(plan, hub_load_kw, instance, with_bits(base, coords, g.coords, static_cast<unsigned long long>(mask)), g.periods);
    }
  }
  GroupResult r;
  long long best = 0;
  for (long long mask = 0; mask < count; ++mask) {
    if (values[static_cast<std::size_t>(mask)] > values[static_cast<std::size_t>(best)]) best = mask;
  }
  r.value = values[static_cast<std::size_t>(best)];
  r.up.resize(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) r.up[static_cast<std::size_t>(j)] = static_cast<char>((best >> j) & 1LL);
  r.evaluations = count;
  return r;
}

// Coordinate-wise best response over the box endpoints, then a pairwise-flip sweep.
GroupResult refine_group(const network::PlanDecision& plan, const Table& hub_load_kw, const io::InstanceSpec& instance,
                         const DiuRealization& base, const std::vector<DiuCoordinate>& coords, const Group& g,
                         bool parallel) {
  const int d = static_cast<int>(g.coords.size());
  GroupResult r;
  r.exhaustive = false;
  r.up.assign(static_cast<std::size_t>(d), 0);
  for (int j = 0; j < d; ++j) {
    r.up[static_cast<std::size_t>(j)] = coords[static_cast<std::size_t>(g.coords[static_cast<std::size_t>(j)])].kind == DiuKind::PPv ? 0 : 1;
  }
  r.value = evaluate(plan, hub_load_kw, instance, with_flags(base, coords, g.coords, r.up), g.periods);
  r.evaluations = 1;
  auto better = [](double a, double b) { return a > b + 1e-12 * std::max(1.0, std::abs(b)); };
  for (int pass = 0; pass < 4 * d + 4 && std::isfinite(r.value); ++pass) {
    bool improved = false;
    std::vector<std::vector<int>> moves;
    for (int j = 0; j < d; ++j) moves.push_back({j});
    if (pass > 0) {
      for (int a = 0; a < d; ++a) {
        for (int b = a + 1; b < d; ++b) moves.push_back({a, b});
      }
    }
    std::vector<double> vals(moves.size(), -kInfD);
    auto eval_move = [&](std::size_t m) {
      auto up = r.up;
      for (int j : moves[m]) up[static_cast<std::size_t>(j)] ^= 1;
      vals[m] = evaluate(plan, hub_load_kw, instance, with_flags(base, coords, g.coords, up), g.periods);
    };
    if (parallel) {
#pragma omp parallel for schedule(dynamic)
      for (std::size_t m = 0; m < moves.size(); ++m) eval_move(m);
    } else {
      for (std::size_t m = 0; m < moves.size(); ++m) eval_move(m);
    }
    r.evaluations += static_cast<long>(moves.size());
    std::size_t best = 0;
    for (std::size_t m = 1; m < moves.size(); ++m) {
      if (vals[m] > vals[best]) best = m;
    }
    if (!moves.empty() && better(vals[best], r.value)) {
      for (int j : moves[best]) r.up[static_cast<std::size_t>(j)] ^= 1;
      r.value = vals[best];
      improved = true;
    }
    if (!improved && pass > 0) break;
  }
  return r;
}

bool ess_in_play(const network::PlanDecision& plan, const io::InstanceSpec& instance) {
  return instance.has_ess() && std::any_of(plan.y_rcs.begin(), plan.y_rcs.end(), [](int y) { return y != 0; });
}

WorstCase vertex_enum(const network::PlanDecision& plan, const Table& hub_load_kw, const io::InstanceSpec& instance,
                      const WorstCaseOptions& options) {
  std::vector<DiuCoordinate> coords;
  for (const auto& c : diu_coordinates(instance)) {
    // PV of unbuilt stations has no effect on the dispatch.
    if (c.kind == DiuKind::PPv && plan.y_rcs[static_cast<std::size_t>(c.owner)] == 0) continue;
    coords.push_back(c);
  }
  DiuRealization base = diu_lower_corner(instance);
  if (!instance.has_pv()) base.p_pv = zeros(instance.num_hubs(), instance.horizon);

  std::vector<Group> groups;
  if (ess_in_play(plan, instance)) {
    Group g;
    g.periods.resize(static_cast<std::size_t>(instance.horizon));
    std::iota(g.periods.begin(), g.periods.end(), 0);
    g.coords.resize(coords.size());
    std::iota(g.coords.begin(), g.coords.end(), 0);
    groups.push_back(std::move(g));
  } else {
    for (int t = 0; t < instance.horizon; ++t) {
      Group g;
      g.periods = {t};
      for (std::size_t c = 0; c < coords.size(); ++c) {
        if (coords[c].period == t) g.coords.push_back(static_cast<int>(c));
      }
      groups.push_back(std::move(g));
    }
  }
  long planned = 0;
  for (const auto& g : groups) {
    if (static_cast<int>(g.coords.size()) <= options.exhaustive_dim_limit) planned += 1L << g.coords.size();
  }
  if (planned > options.vertex_budget) {
    throw OracleError("vertex enumeration needs " + std::to_string(planned) + " evaluations, above the budget of " +
                      std::to_string(options.vertex_budget) + "; group DIU coordinates or lower the exhaustive dimension limit");
  }

  WorstCase wc;
  wc.D = 0.0;
  DiuRealization u = base;
  for (const auto& g : groups) {
    const bool full = static_cast<int>(g.coords.size()) <= options.exhaustive_dim_limit;
    const GroupResult r = full ? sweep_group(plan, hub_load_kw, instance, base, coords, g, options.parallel)
                               : refine_group(plan, hub_load_kw, instance, base, coords, g, options.parallel);
    wc.evaluations += r.evaluations;
    wc.exhaustive = wc.exhaustive && r.exhaustive;
    u = with_flags(u, coords, g.coords, r.up);
    wc.D += r.value;
  }
  wc.u = u;
  return wc;
}

}  // namespace

WorstCase worst_case_diu(const network::PlanDecision& plan, const Table& hub_load_kw, const io::InstanceSpec& instance,
                         const WorstCaseOptions& options) {
  if (options.method == WorstCaseMethod::VertexEnum) return vertex_enum(plan, hub_load_kw, instance, options);
  return detail::kkt_worst_case(plan, hub_load_kw, instance, options);
}

}  // namespace coplan::dispatch
