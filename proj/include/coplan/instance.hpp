#pragma once

// Problem instances, algorithm parameters and their JSON schema.
//
// Units: electrical quantities of the distribution network are per-unit on
// the declared bases (flows, loads, PV, ESS power and energy, substation
// limits, r and x). EV quantities are kW / kWh. Costs are 10^4 CNY; TOU
// prices are 10^4 CNY per kWh, and the network loss of one period is
// converted to kWh through bases.power_kva.

#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace coplan::io {

inline constexpr int kSchemaVersion = 1;

enum class NodeKind { Root, Load };
enum class RcsType { EvOnly, PvEv, PvEssEv };

std::string to_string(RcsType type);

struct NodeSpec {
  int id = 0;
  NodeKind kind = NodeKind::Load;
  double fictitious_demand = 1.0;
};

struct LineSpec {
  int from = 0;
  int to = 0;
  double length_km = 0.0;
  double r = 0.0;         // pu
  double x = 0.0;         // pu
  double capacity = 0.0;  // pu apparent power
  double unit_cost = 0.0;  // 10^4 CNY per km
};

struct HubSpec {
  int id = 0;
  int dn_node = 0;
  double unit_cost = 0.0;  // 10^4 CNY
  double pop_weight = 1.0;
  double n_min = 0.0;
  double n_max = std::numeric_limits<double>::infinity();
};

struct HubEdgeSpec {
  int a = 0;
  int b = 0;
  double distance_km = 0.0;
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct EvParams {
  double consumption_wh_per_km = 115.0;
  double travel_energy_price = 0.0;  // 10^4 CNY per kWh spent driving
  double p_min_kw = 0.0;
  double p_max_kw = 7.0;
  double e_min_kwh = 0.0;
  double e_max_kwh = 60.0;
  std::vector<int> charge_window;  // period indices, 0-based
  Range soc_init_kwh;              // Monte Carlo range of e_{u,0}
  Range soc_target_kwh;            // Monte Carlo range of e_u

  // c^ev: cost per km travelled.
  double travel_cost_per_km() const { return consumption_wh_per_km / 1000.0 * travel_energy_price; }
};

struct FleetSpec {
  int lo = 0;
  int hi = 0;
  double mu = 0.0;
  double sigma = 1.0;
};

struct BoxSeries {
  int owner = 0;  // node id or hub id
  std::vector<double> lo;
  std::vector<double> hi;
};

struct DiuBox {
  std::vector<BoxSeries> p_load;  // per node
  std::vector<BoxSeries> q_load;  // per node
  std::vector<BoxSeries> p_pv;    // per hub
};

struct EssParams {
  double eta_ch = 0.9;
  double eta_dis = 1.1;
  double p_ch_max = 0.0;
  double p_dis_max = 0.0;
  double e_min = 0.0;
  double e_max = 0.0;
};

struct SubstationSpec {
  double p_min = 0.0;
  double p_max = 0.0;
  double q_min = 0.0;
  double q_max = 0.0;
};

struct LifespanShare {
  double share = 1.0;
  double lifespan = 20.0;
};

struct FinanceSpec {
  double rate = 0.05;
  double line_lifespan = 20.0;
  std::vector<LifespanShare> rcs_lifespan_split{{1.0, 20.0}};
};

struct Bases {
  double power_kva = 1000.0;
  double voltage_kv = 10.0;
};

struct InstanceSpec {
  std::string name;
  int horizon = 24;
  Bases bases;
  std::vector<NodeSpec> nodes;
  std::vector<LineSpec> lines;
  std::vector<HubSpec> hubs;
  std::vector<HubEdgeSpec> hub_edges;
  int rcs_min_count = 1;
  RcsType rcs_type = RcsType::PvEv;
  EvParams ev;
  FleetSpec fleet;
  std::vector<double> tou_prices;
  DiuBox diu;
  EssParams ess;
  SubstationSpec substation;
  Range voltage{0.9, 1.1};
  FinanceSpec finance;

  int num_nodes() const { return static_cast<int>(nodes.size()); }
  int num_lines() const { return static_cast<int>(lines.size()); }
  int num_hubs() const { return static_cast<int>(hubs.size()); }
  int root_index() const;
  int node_index(int id) const;  // -1 when absent
  int hub_index(int id) const;   // -1 when absent
  bool has_ess() const { return rcs_type == RcsType::PvEssEv; }
  bool has_pv() const { return rcs_type != RcsType::EvOnly; }
};

struct AlgoParams {
  double epsilon = 1e-4;
  double epsilon_tilde = -1.0;  // negative: derived as epsilon / (2 (1 + epsilon))
  double eps_up_init = 0.1;
  double alpha = 0.5;
  unsigned long long seed = 1;
  int max_iterations = 200;
  double fleet_mu = std::numeric_limits<double>::quiet_NaN();     // NaN: instance value
  double fleet_sigma = std::numeric_limits<double>::quiet_NaN();  // NaN: instance value
  double sandwich_slack = -1.0;  // negative: algorithm default

  double resolved_epsilon_tilde() const;
};

// Every violation, each prefixed with the offending field path.
std::vector<std::string> validate_params(const AlgoParams& params);
std::vector<std::string> validate_instance(const InstanceSpec& instance);

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> issues);
  const std::vector<std::string>& issues() const { return issues_; }

 private:
  std::vector<std::string> issues_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Throws ValidationError listing schema and invariant failures.
InstanceSpec parse_instance(const nlohmann::json& doc);
InstanceSpec load_instance(const std::string& path);
nlohmann::json instance_to_json(const InstanceSpec& instance);
void save_instance(const InstanceSpec& instance, const std::string& path);

// Annuity factor d(1+d)^T / ((1+d)^T - 1); 1/T in the d -> 0 limit.
double capital_recovery_factor(double rate, double years);

// Weighted annuity for an RCS made of assets with different lifespans.
double rcs_recovery_factor(const FinanceSpec& finance);

// DIU box scaled about its midpoint by the given width multiplier.
InstanceSpec with_diu_width(const InstanceSpec& instance, double multiplier);

nlohmann::json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& contents);

}  // namespace coplan::io
