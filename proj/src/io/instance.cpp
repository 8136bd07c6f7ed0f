#include "coplan/instance.hpp"

#include <cmath>
#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace coplan::io {

using nlohmann::json;

std::string to_string(RcsType type) {
  switch (type) {
    case RcsType::EvOnly: return "EV-only";
    case RcsType::PvEv: return "PV-EV";
    case RcsType::PvEssEv: return "PV-ESS-EV";
  }
  return "unknown";
}

int InstanceSpec::root_index() const {
  for (int i = 0; i < num_nodes(); ++i) {
    if (nodes[static_cast<std::size_t>(i)].kind == NodeKind::Root) return i;
  }
  return -1;
}

int InstanceSpec::node_index(int id) const {
  for (int i = 0; i < num_nodes(); ++i) {
    if (nodes[static_cast<std::size_t>(i)].id == id) return i;
  }
  return -1;
}

int InstanceSpec::hub_index(int id) const {
  for (int i = 0; i < num_hubs(); ++i) {
    if (hubs[static_cast<std::size_t>(i)].id == id) return i;
  }
  return -1;
}

double AlgoParams::resolved_epsilon_tilde() const {
  return epsilon_tilde >= 0.0 ? epsilon_tilde : epsilon / (2.0 * (1.0 + epsilon));
}

namespace {

std::string join(const std::vector<std::string>& issues) {
  std::ostringstream out;
  out << issues.size() << " validation issue(s):";
  for (const auto& s : issues) out << "\n  " << s;
  return out.str();
}

// Field reader that records schema problems instead of throwing.
class Reader {
 public:
  explicit Reader(std::vector<std::string>& issues) : issues_(issues) {}

  const json* child(const json& obj, const std::string& key, const std::string& path, bool required) {
    if (!obj.is_object()) {
      issues_.push_back(path + ": expected an object");
      return nullptr;
    }
    auto it = obj.find(key);
    if (it == obj.end()) {
      if (required) issues_.push_back(path + "." + key + ": missing");
      return nullptr;
    }
    return &*it;
  }

  double number(const json& obj, const std::string& key, const std::string& path, double fallback, bool required = true) {
    const json* v = child(obj, key, path, required);
    if (v == nullptr) return fallback;
    if (!v->is_number()) {
      issues_.push_back(path + "." + key + ": expected a number");
      return fallback;
    }
    return v->get<double>();
  }

  int integer(const json& obj, const std::string& key, const std::string& path, int fallback, bool required = true) {
    const json* v = child(obj, key, path, required);
    if (v == nullptr) return fallback;
    if (!v->is_number_integer()) {
      issues_.push_back(path + "." + key + ": expected an integer");
      return fallback;
    }
    return v->get<int>();
  }

  std::string text(const json& obj, const std::string& key, const std::string& path, std::string fallback,
                   bool required = true) {
    const json* v = child(obj, key, path, required);
    if (v == nullptr) return fallback;
    if (!v->is_string()) {
      issues_.push_back(path + "." + key + ": expected a string");
      return fallback;
    }
    return v->get<std::string>();
  }

  std::vector<double> numbers(const json& obj, const std::string& key, const std::string& path) {
    std::vector<double> out;
    const json* v = child(obj, key, path, true);
    if (v == nullptr) return out;
    if (!v->is_array()) {
      issues_.push_back(path + "." + key + ": expected an array");
      return out;
    }
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (!(*v)[i].is_number()) {
        issues_.push_back(path + "." + key + "[" + std::to_string(i) + "]: expected a number");
        out.push_back(0.0);
      } else {
        out.push_back((*v)[i].get<double>());
      }
    }
    return out;
  }

  const json* array(const json& obj, const std::string& key, const std::string& path, bool required = true) {
    const json* v = child(obj, key, path, required);
    if (v == nullptr) return nullptr;
    if (!v->is_array()) {
      issues_.push_back(path + "." + key + ": expected an array");
      return nullptr;
    }
    return v;
  }

  void add(std::string issue) { issues_.push_back(std::move(issue)); }

 private:
  std::vector<std::string>& issues_;
};

Range read_range(Reader& rd, const json& obj, const std::string& key, const std::string& path, Range fallback,
                 bool required) {
  const json* v = rd.child(obj, key, path, required);
  if (v == nullptr) return fallback;
  const std::string p = path + "." + key;
  return {rd.number(*v, "lo", p, fallback.lo), rd.number(*v, "hi", p, fallback.hi)};
}

std::vector<BoxSeries> read_series(Reader& rd, const json& obj, const std::string& key, const std::string& path,
                                   const char* owner_key) {
  std::vector<BoxSeries> out;
  const json* arr = rd.array(obj, key, path, false);
  if (arr == nullptr) return out;
  for (std::size_t i = 0; i < arr->size(); ++i) {
    const std::string p = path + "." + key + "[" + std::to_string(i) + "]";
    BoxSeries s;
    s.owner = rd.integer((*arr)[i], owner_key, p, 0);
    s.lo = rd.numbers((*arr)[i], "lo", p);
    s.hi = rd.numbers((*arr)[i], "hi", p);
    out.push_back(std::move(s));
  }
  return out;
}

json range_json(const Range& r) { return json{{"lo", r.lo}, {"hi", r.hi}}; }

json series_json(const std::vector<BoxSeries>& series, const char* owner_key) {
  json arr = json::array();
  for (const auto& s : series) arr.push_back(json{{owner_key, s.owner}, {"lo", s.lo}, {"hi", s.hi}});
  return arr;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

ValidationError::ValidationError(std::vector<std::string> issues)
    : std::runtime_error(join(issues)), issues_(std::move(issues)) {}

InstanceSpec parse_instance(const json& doc) {
  std::vector<std::string> issues;
  Reader rd(issues);
  InstanceSpec in;
  const std::string root = "$";
  if (!doc.is_object()) throw ValidationError({"$: expected an object"});

  const int version = rd.integer(doc, "schema_version", root, kSchemaVersion);
  if (version != kSchemaVersion) rd.add("$.schema_version: unsupported version " + std::to_string(version));
  in.name = rd.text(doc, "name", root, "", false);
  in.horizon = rd.integer(doc, "horizon", root, 24, false);
  if (const json* b = rd.child(doc, "bases", root, false)) {
    in.bases.power_kva = rd.number(*b, "power_kva", "$.bases", 1000.0);
    in.bases.voltage_kv = rd.number(*b, "voltage_kv", "$.bases", 10.0);
  }

  if (const json* arr = rd.array(doc, "nodes", root)) {
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const std::string p = "$.nodes[" + std::to_string(i) + "]";
      NodeSpec n;
      n.id = rd.integer((*arr)[i], "id", p, 0);
      const std::string kind = rd.text((*arr)[i], "kind", p, "load");
      if (kind == "root") n.kind = NodeKind::Root;
      else if (kind == "load") n.kind = NodeKind::Load;
      else rd.add(p + ".kind: must be 'root' or 'load'");
      n.fictitious_demand = rd.number((*arr)[i], "fictitious_demand", p, n.kind == NodeKind::Root ? 0.0 : 1.0, false);
      in.nodes.push_back(n);
    }
  }
  if (const json* arr = rd.array(doc, "candidate_lines", root)) {
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const std::string p = "$.candidate_lines[" + std::to_string(i) + "]";
      const json& o = (*arr)[i];
      LineSpec l;
      l.from = rd.integer(o, "i", p, 0);
      l.to = rd.integer(o, "j", p, 0);
      l.length_km = rd.number(o, "length_km", p, 0.0);
      l.r = rd.number(o, "r", p, 0.0);
      l.x = rd.number(o, "x", p, 0.0);
      l.capacity = rd.number(o, "capacity", p, 0.0);
      l.unit_cost = rd.number(o, "unit_cost", p, 0.0);
      in.lines.push_back(l);
    }
  }
  if (const json* arr = rd.array(doc, "hubs", root)) {
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const std::string p = "$.hubs[" + std::to_string(i) + "]";
      const json& o = (*arr)[i];
      HubSpec h;
      h.id = rd.integer(o, "id", p, 0);
      h.dn_node = rd.integer(o, "dn_node", p, 0);
      h.unit_cost = rd.number(o, "unit_cost", p, 0.0);
      h.pop_weight = rd.number(o, "pop_weight", p, 1.0);
      h.n_min = rd.number(o, "n_min", p, 0.0, false);
      if (const json* v = rd.child(o, "n_max", p, false); v != nullptr && !v->is_null()) {
        h.n_max = rd.number(o, "n_max", p, h.n_max);
      }
      in.hubs.push_back(h);
    }
  }
  if (const json* arr = rd.array(doc, "hub_edges", root)) {
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const std::string p = "$.hub_edges[" + std::to_string(i) + "]";
      const json& o = (*arr)[i];
      in.hub_edges.push_back({rd.integer(o, "a", p, 0), rd.integer(o, "b", p, 0), rd.number(o, "distance_km", p, 0.0)});
    }
  }
  in.rcs_min_count = rd.integer(doc, "rcs_min_count", root, 1);
  const std::string type = rd.text(doc, "rcs_type", root, "PV-EV");
  if (type == "EV-only") in.rcs_type = RcsType::EvOnly;
  else if (type == "PV-EV") in.rcs_type = RcsType::PvEv;
  else if (type == "PV-ESS-EV") in.rcs_type = RcsType::PvEssEv;
  else rd.add("$.rcs_type: must be one of EV-only, PV-EV, PV-ESS-EV");

  if (const json* e = rd.child(doc, "ev_params", root, true)) {
    const std::string p = "$.ev_params";
    in.ev.consumption_wh_per_km = rd.number(*e, "consumption_wh_per_km", p, 115.0);
    in.ev.travel_energy_price = rd.number(*e, "travel_energy_price", p, 0.0);
    in.ev.p_min_kw = rd.number(*e, "p_min_kw", p, 0.0);
    in.ev.p_max_kw = rd.number(*e, "p_max_kw", p, 7.0);
    in.ev.e_min_kwh = rd.number(*e, "e_min_kwh", p, 0.0);
    in.ev.e_max_kwh = rd.number(*e, "e_max_kwh", p, 60.0);
    for (double t : rd.numbers(*e, "charge_window", p)) in.ev.charge_window.push_back(static_cast<int>(t));
    in.ev.soc_init_kwh = read_range(rd, *e, "soc_init_kwh", p, {}, true);
    in.ev.soc_target_kwh = read_range(rd, *e, "soc_target_kwh", p, {}, true);
  }
  if (const json* f = rd.child(doc, "fleet", root, true)) {
    in.fleet.lo = rd.integer(*f, "lo", "$.fleet", 0);
    in.fleet.hi = rd.integer(*f, "hi", "$.fleet", 0);
    in.fleet.mu = rd.number(*f, "mu", "$.fleet", 0.5 * (in.fleet.lo + in.fleet.hi), false);
    in.fleet.sigma = rd.number(*f, "sigma", "$.fleet", 1.0, false);
  }
  if (rd.child(doc, "tou_prices", root, true) != nullptr) in.tou_prices = rd.numbers(doc, "tou_prices", root);
  if (const json* d = rd.child(doc, "diu_box", root, true)) {
    in.diu.p_load = read_series(rd, *d, "p_load", "$.diu_box", "node");
    in.diu.q_load = read_series(rd, *d, "q_load", "$.diu_box", "node");
    in.diu.p_pv = read_series(rd, *d, "p_pv", "$.diu_box", "hub");
  }
  if (const json* e = rd.child(doc, "ess_params", root, false)) {
    const std::string p = "$.ess_params";
    in.ess.eta_ch = rd.number(*e, "eta_ch", p, 0.9);
    in.ess.eta_dis = rd.number(*e, "eta_dis", p, 1.1);
    in.ess.p_ch_max = rd.number(*e, "p_ch_max", p, 0.0);
    in.ess.p_dis_max = rd.number(*e, "p_dis_max", p, 0.0);
    in.ess.e_min = rd.number(*e, "e_min", p, 0.0);
    in.ess.e_max = rd.number(*e, "e_max", p, 0.0);
  } else if (in.rcs_type == RcsType::PvEssEv) {
    rd.add("$.ess_params: required for PV-ESS-EV stations");
  }
  if (const json* s = rd.child(doc, "substation", root, true)) {
    const std::string p = "$.substation";
    in.substation = {rd.number(*s, "p_min", p, 0.0), rd.number(*s, "p_max", p, 0.0), rd.number(*s, "q_min", p, 0.0),
                     rd.number(*s, "q_max", p, 0.0)};
  }
  in.voltage = read_range(rd, doc, "voltage", root, {0.9, 1.1}, true);
  if (const json* f = rd.child(doc, "finance", root, true)) {
    const std::string p = "$.finance";
    in.finance.rate = rd.number(*f, "rate", p, 0.05);
    in.finance.line_lifespan = rd.number(*f, "line_lifespan", p, 20.0);
    if (const json* arr = rd.array(*f, "rcs_lifespan_split", p, true)) {
      in.finance.rcs_lifespan_split.clear();
      for (std::size_t i = 0; i < arr->size(); ++i) {
        const std::string q = p + ".rcs_lifespan_split[" + std::to_string(i) + "]";
        in.finance.rcs_lifespan_split.push_back({rd.number((*arr)[i], "share", q, 1.0), rd.number((*arr)[i], "lifespan", q, 20.0)});
      }
    }
  }

  auto more = validate_instance(in);
  issues.insert(issues.end(), more.begin(), more.end());
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return in;
}

std::vector<std::string> validate_instance(const InstanceSpec& in) {
  std::vector<std::string> issues;
  auto add = [&](std::string s) { issues.push_back(std::move(s)); };
  const int T = in.horizon;
  if (T < 1) add("$.horizon: must be at least 1");

  int roots = 0;
  std::set<int> node_ids;
  for (std::size_t i = 0; i < in.nodes.size(); ++i) {
    const auto& n = in.nodes[i];
    const std::string p = "$.nodes[" + std::to_string(i) + "]";
    if (n.kind == NodeKind::Root) ++roots;
    if (!node_ids.insert(n.id).second) add(p + ".id: duplicate node id " + std::to_string(n.id));
    if (n.fictitious_demand < 0) add(p + ".fictitious_demand: must be nonnegative");
  }
  if (roots != 1) add("$.nodes: exactly one root node required, found " + std::to_string(roots));
  if (in.nodes.size() < 1) add("$.nodes: at least one node required");

  // Candidate-line connectivity via union-find over node indices.
  std::map<int, int> parent;
  for (int id : node_ids) parent[id] = id;
  std::function<int(int)> find = [&](int a) { return parent[a] == a ? a : parent[a] = find(parent[a]); };
  std::set<std::pair<int, int>> seen_lines;
  for (std::size_t i = 0; i < in.lines.size(); ++i) {
    const auto& l = in.lines[i];
    const std::string p = "$.candidate_lines[" + std::to_string(i) + "]";
    const bool ok_from = node_ids.count(l.from) > 0;
    const bool ok_to = node_ids.count(l.to) > 0;
    if (!ok_from) add(p + ".i: unknown node " + std::to_string(l.from));
    if (!ok_to) add(p + ".j: unknown node " + std::to_string(l.to));
    if (l.from == l.to) add(p + ": self loop");
    if (!seen_lines.insert({std::min(l.from, l.to), std::max(l.from, l.to)}).second) add(p + ": duplicate corridor");
    if (l.length_km < 0) add(p + ".length_km: must be nonnegative");
    if (l.r < 0) add(p + ".r: negative resistance");
    if (l.x < 0) add(p + ".x: negative reactance");
    if (l.capacity <= 0) add(p + ".capacity: must be positive");
    if (l.unit_cost < 0) add(p + ".unit_cost: negative cost");
    if (ok_from && ok_to) parent[find(l.from)] = find(l.to);
  }
  std::set<int> comps;
  for (int id : node_ids) comps.insert(find(id));
  if (comps.size() > 1) add("$.candidate_lines: candidate graph is not connected");

  std::set<int> hub_ids;
  for (std::size_t i = 0; i < in.hubs.size(); ++i) {
    const auto& h = in.hubs[i];
    const std::string p = "$.hubs[" + std::to_string(i) + "]";
    if (!hub_ids.insert(h.id).second) add(p + ".id: duplicate hub id " + std::to_string(h.id));
    if (node_ids.count(h.dn_node) == 0) add(p + ".dn_node: unknown node " + std::to_string(h.dn_node));
    if (h.unit_cost < 0) add(p + ".unit_cost: negative cost");
    if (h.pop_weight < 0) add(p + ".pop_weight: must be nonnegative");
    if (h.n_min < 0 || h.n_min > h.n_max) add(p + ": n_min must lie in [0, n_max]");
  }
  for (std::size_t i = 0; i < in.hub_edges.size(); ++i) {
    const auto& e = in.hub_edges[i];
    const std::string p = "$.hub_edges[" + std::to_string(i) + "]";
    if (hub_ids.count(e.a) == 0) add(p + ".a: unknown hub " + std::to_string(e.a));
    if (hub_ids.count(e.b) == 0) add(p + ".b: unknown hub " + std::to_string(e.b));
    if (e.distance_km < 0) add(p + ".distance_km: must be nonnegative");
  }
  if (in.rcs_min_count < 0) add("$.rcs_min_count: must be nonnegative");
  if (in.rcs_min_count > in.num_hubs()) {
    add("$.rcs_min_count: at least " + std::to_string(in.rcs_min_count) + " stations required but only " +
        std::to_string(in.num_hubs()) + " hubs exist");
  }
  double pop = 0.0;
  for (const auto& h : in.hubs) pop += h.pop_weight;
  if (!in.hubs.empty() && pop <= 0) add("$.hubs: pop_weight must not all be zero");

  const auto& ev = in.ev;
  if (ev.p_min_kw < 0 || ev.p_min_kw > ev.p_max_kw) add("$.ev_params: need 0 <= p_min_kw <= p_max_kw");
  if (ev.e_min_kwh > ev.e_max_kwh) add("$.ev_params: e_min_kwh exceeds e_max_kwh");
  if (ev.consumption_wh_per_km < 0) add("$.ev_params.consumption_wh_per_km: must be nonnegative");
  if (ev.travel_energy_price < 0) add("$.ev_params.travel_energy_price: negative price");
  std::set<int> window;
  for (int t : ev.charge_window) {
    if (t < 0 || t >= T) add("$.ev_params.charge_window: period " + std::to_string(t) + " outside the horizon");
    if (!window.insert(t).second) add("$.ev_params.charge_window: duplicate period " + std::to_string(t));
  }
  if (!window.empty() && *window.rbegin() - *window.begin() + 1 != static_cast<int>(window.size())) {
    add("$.ev_params.charge_window: must be a contiguous block of periods");
  }
  if (ev.soc_init_kwh.lo > ev.soc_init_kwh.hi) add("$.ev_params.soc_init_kwh: lo exceeds hi");
  if (ev.soc_target_kwh.lo > ev.soc_target_kwh.hi) add("$.ev_params.soc_target_kwh: lo exceeds hi");
  if (ev.soc_init_kwh.lo < ev.e_min_kwh) add("$.ev_params.soc_init_kwh: below e_min_kwh");
  if (ev.soc_target_kwh.hi > ev.e_max_kwh) add("$.ev_params.soc_target_kwh: above e_max_kwh");
  if (ev.soc_init_kwh.hi > ev.soc_target_kwh.lo) add("$.ev_params: soc_init_kwh.hi must not exceed soc_target_kwh.lo");
  const double window_len = static_cast<double>(window.size());
  if (ev.soc_target_kwh.hi - ev.soc_init_kwh.lo > window_len * ev.p_max_kw + 1e-9) {
    add("$.ev_params: charging window too short to reach soc_target_kwh.hi at p_max_kw");
  }
  if (ev.e_max_kwh - ev.soc_init_kwh.hi < window_len * ev.p_min_kw - 1e-9) {
    add("$.ev_params: p_min_kw over the window overfills the battery");
  }

  if (in.fleet.lo < 0 || in.fleet.lo > in.fleet.hi) add("$.fleet: need 0 <= lo <= hi");
  if (in.fleet.sigma < 0) add("$.fleet.sigma: must be nonnegative");
  if (in.fleet.mu < in.fleet.lo || in.fleet.mu > in.fleet.hi) add("$.fleet.mu: must lie in [lo, hi]");
  if (in.fleet.hi > 0 && in.hubs.empty()) add("$.hubs: a nonzero fleet needs at least one hub");

  if (static_cast<int>(in.tou_prices.size()) != T) add("$.tou_prices: expected " + std::to_string(T) + " entries");
  for (std::size_t t = 0; t < in.tou_prices.size(); ++t) {
    if (in.tou_prices[t] < 0) add("$.tou_prices[" + std::to_string(t) + "]: negative price");
  }

  auto check_series = [&](const std::vector<BoxSeries>& series, const std::string& name, bool hub) {
    std::set<int> owners;
    for (std::size_t i = 0; i < series.size(); ++i) {
      const auto& s = series[i];
      const std::string p = "$.diu_box." + name + "[" + std::to_string(i) + "]";
      const bool known = hub ? hub_ids.count(s.owner) > 0 : node_ids.count(s.owner) > 0;
      if (!known) add(p + ": unknown " + std::string(hub ? "hub " : "node ") + std::to_string(s.owner));
      if (!owners.insert(s.owner).second) add(p + ": duplicate owner");
      if (static_cast<int>(s.lo.size()) != T || static_cast<int>(s.hi.size()) != T) {
        add(p + ": lo and hi need " + std::to_string(T) + " entries");
        continue;
      }
      for (int t = 0; t < T; ++t) {
        const auto k = static_cast<std::size_t>(t);
        if (!(s.lo[k] <= s.hi[k])) add(p + ": lo exceeds hi at period " + std::to_string(t));
        if (hub && s.lo[k] < 0) add(p + ": PV output must be nonnegative");
      }
    }
  };
  check_series(in.diu.p_load, "p_load", false);
  check_series(in.diu.q_load, "q_load", false);
  check_series(in.diu.p_pv, "p_pv", true);
  if (!in.has_pv()) {
    const bool any_pv = std::any_of(in.diu.p_pv.begin(), in.diu.p_pv.end(), [](const BoxSeries& s) {
      return std::any_of(s.hi.begin(), s.hi.end(), [](double v) { return v > 0; });
    });
    if (any_pv) add("$.diu_box.p_pv: EV-only stations carry no PV");
  }

  if (in.has_ess()) {
    const auto& e = in.ess;
    if (e.eta_ch <= 0 || e.eta_dis <= 0) add("$.ess_params: efficiencies must be positive");
    if (e.p_ch_max < 0 || e.p_dis_max < 0) add("$.ess_params: power limits must be nonnegative");
    if (e.e_min < 0 || e.e_min > e.e_max) add("$.ess_params: need 0 <= e_min <= e_max");
  }
  if (in.substation.p_min > in.substation.p_max) add("$.substation: p_min exceeds p_max");
  if (in.substation.q_min > in.substation.q_max) add("$.substation: q_min exceeds q_max");
  if (!(in.voltage.lo < in.voltage.hi)) add("$.voltage: lo must be below hi");
  if (in.voltage.lo <= 0) add("$.voltage.lo: must be positive");
  if (!(in.voltage.lo <= 1.0 && 1.0 <= in.voltage.hi)) add("$.voltage: the root is held at 1.0 pu, which must lie in range");
  if (in.finance.rate < 0) add("$.finance.rate: must be nonnegative");
  if (in.finance.line_lifespan < 1) add("$.finance.line_lifespan: must be at least 1");
  double share = 0.0;
  for (const auto& s : in.finance.rcs_lifespan_split) {
    share += s.share;
    if (s.share < 0) add("$.finance.rcs_lifespan_split: negative share");
    if (s.lifespan < 1) add("$.finance.rcs_lifespan_split: lifespan must be at least 1");
  }
  if (std::abs(share - 1.0) > 1e-9) add("$.finance.rcs_lifespan_split: shares must sum to 1");
  if (in.bases.power_kva <= 0) add("$.bases.power_kva: must be positive");
  return issues;
}

std::vector<std::string> validate_params(const AlgoParams& p) {
  std::vector<std::string> issues;
  if (!(p.epsilon >= 0.0 && p.epsilon <= 1.0)) issues.push_back("epsilon: must lie in [0, 1]");
  const double et = p.resolved_epsilon_tilde();
  if (!(et > 0.0 && et < p.epsilon / (p.epsilon + 1.0))) issues.push_back("epsilon_tilde: must lie in (0, epsilon/(epsilon+1))");
  if (!(p.alpha > 0.0 && p.alpha < 1.0)) issues.push_back("alpha: must lie in (0, 1)");
  if (!(p.eps_up_init >= 0.0 && p.eps_up_init < 1.0)) issues.push_back("eps_up_init: must lie in [0, 1)");
  if (p.max_iterations < 1) issues.push_back("max_iterations: must be positive");
  if (!std::isnan(p.fleet_sigma) && p.fleet_sigma < 0) issues.push_back("fleet_sigma: must be nonnegative");
  return issues;
}

json instance_to_json(const InstanceSpec& in) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["name"] = in.name;
  doc["horizon"] = in.horizon;
  doc["bases"] = {{"power_kva", in.bases.power_kva}, {"voltage_kv", in.bases.voltage_kv}};
  json nodes = json::array();
  for (const auto& n : in.nodes) {
    nodes.push_back({{"id", n.id}, {"kind", n.kind == NodeKind::Root ? "root" : "load"}, {"fictitious_demand", n.fictitious_demand}});
  }
  doc["nodes"] = nodes;
  json lines = json::array();
  for (const auto& l : in.lines) {
    lines.push_back({{"i", l.from}, {"j", l.to}, {"length_km", l.length_km}, {"r", l.r}, {"x", l.x},
                     {"capacity", l.capacity}, {"unit_cost", l.unit_cost}});
  }
  doc["candidate_lines"] = lines;
  json hubs = json::array();
  for (const auto& h : in.hubs) {
    hubs.push_back({{"id", h.id}, {"dn_node", h.dn_node}, {"unit_cost", h.unit_cost}, {"pop_weight", h.pop_weight},
                    {"n_min", h.n_min}, {"n_max", number_or_null(h.n_max)}});
  }
  doc["hubs"] = hubs;
  json edges = json::array();
  for (const auto& e : in.hub_edges) edges.push_back({{"a", e.a}, {"b", e.b}, {"distance_km", e.distance_km}});
  doc["hub_edges"] = edges;
  doc["rcs_min_count"] = in.rcs_min_count;
  doc["rcs_type"] = to_string(in.rcs_type);
  doc["ev_params"] = {{"consumption_wh_per_km", in.ev.consumption_wh_per_km},
                      {"travel_energy_price", in.ev.travel_energy_price},
                      {"p_min_kw", in.ev.p_min_kw},
                      {"p_max_kw", in.ev.p_max_kw},
                      {"e_min_kwh", in.ev.e_min_kwh},
                      {"e_max_kwh", in.ev.e_max_kwh},
                      {"charge_window", in.ev.charge_window},
                      {"soc_init_kwh", range_json(in.ev.soc_init_kwh)},
                      {"soc_target_kwh", range_json(in.ev.soc_target_kwh)}};
  doc["fleet"] = {{"lo", in.fleet.lo}, {"hi", in.fleet.hi}, {"mu", in.fleet.mu}, {"sigma", in.fleet.sigma}};
  doc["tou_prices"] = in.tou_prices;
  doc["diu_box"] = {{"p_load", series_json(in.diu.p_load, "node")},
                    {"q_load", series_json(in.diu.q_load, "node")},
                    {"p_pv", series_json(in.diu.p_pv, "hub")}};
  doc["ess_params"] = {{"eta_ch", in.ess.eta_ch}, {"eta_dis", in.ess.eta_dis}, {"p_ch_max", in.ess.p_ch_max},
                       {"p_dis_max", in.ess.p_dis_max}, {"e_min", in.ess.e_min}, {"e_max", in.ess.e_max}};
  doc["substation"] = {{"p_min", in.substation.p_min}, {"p_max", in.substation.p_max},
                       {"q_min", in.substation.q_min}, {"q_max", in.substation.q_max}};
  doc["voltage"] = range_json(in.voltage);
  json split = json::array();
  for (const auto& s : in.finance.rcs_lifespan_split) split.push_back({{"share", s.share}, {"lifespan", s.lifespan}});
  doc["finance"] = {{"rate", in.finance.rate}, {"line_lifespan", in.finance.line_lifespan}, {"rcs_lifespan_split", split}};
  return doc;
}

json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open '" + path + "' for reading");
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw IoError("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& contents) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << contents;
  if (!f) throw IoError("write to '" + path + "' failed");
}

InstanceSpec load_instance(const std::string& path) {
  try {
    return parse_instance(read_json_file(path));
  } catch (const ValidationError& e) {
    std::vector<std::string> issues;
    for (const auto& s : e.issues()) issues.push_back(path + ": " + s);
    throw ValidationError(std::move(issues));
  }
}

void save_instance(const InstanceSpec& instance, const std::string& path) {
  write_text_file(path, instance_to_json(instance).dump(2) + "\n");
}

double capital_recovery_factor(double rate, double years) {
  if (rate < 0 || years < 1) throw std::invalid_argument("capital_recovery_factor needs rate >= 0 and years >= 1");
  if (rate < 1e-9) {
    // Series expansion about d = 0: 1/T + d (T+1)/(2T) + O(d^2).
    return 1.0 / years + rate * (years + 1.0) / (2.0 * years);
  }
  const double growth = std::expm1(years * std::log1p(rate));  // (1+d)^T - 1
  return rate * (growth + 1.0) / growth;
}

double rcs_recovery_factor(const FinanceSpec& finance) {
  double f = 0.0;
  for (const auto& s : finance.rcs_lifespan_split) f += s.share * capital_recovery_factor(finance.rate, s.lifespan);
  return f;
}

InstanceSpec with_diu_width(const InstanceSpec& instance, double multiplier) {
  if (multiplier < 0) throw std::invalid_argument("DIU width multiplier must be nonnegative");
  InstanceSpec out = instance;
  auto scale = [&](std::vector<BoxSeries>& series, bool nonneg) {
    for (auto& s : series) {
      for (std::size_t t = 0; t < s.lo.size(); ++t) {
        const double mid = 0.5 * (s.lo[t] + s.hi[t]);
        const double half = 0.5 * (s.hi[t] - s.lo[t]) * multiplier;
        s.lo[t] = mid - half;
        s.hi[t] = mid + half;
        if (nonneg) s.lo[t] = std::max(0.0, s.lo[t]);
      }
    }
  };
  scale(out.diu.p_load, false);
  scale(out.diu.q_load, false);
  scale(out.diu.p_pv, true);
  return out;
}

}  // namespace coplan::io
