#pragma once

// Middle level: hub distances, fleet scenarios drawn from a truncated
// normal, and the EV routing / charging assignment.

#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "coplan/instance.hpp"
#include "json.hpp"

namespace coplan::transport {

using Matrix = std::vector<std::vector<double>>;

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// All-pairs shortest distances between hubs, indexed like instance.hubs.
// Throws TransportError naming the components when the graph is disconnected.
Matrix shortest_distance_matrix(const std::vector<io::HubSpec>& hubs, const std::vector<io::HubEdgeSpec>& edges);
Matrix shortest_distance_matrix(const io::InstanceSpec& instance);

double normal_cdf(double z);
double normal_pdf(double z);
// Inverse standard normal CDF, about 1e-15 relative after refinement.
double normal_quantile(double p);

struct TruncatedNormal {
  double mu = 0.0;
  double sigma = 1.0;
  double lo = 0.0;
  double hi = 0.0;

  double mean() const;
  double quantile(double p) const;
  double sample(std::mt19937_64& rng) const;
};

enum class IntervalMode { Full, Lower, Upper, AtUpperBound };

struct DrawInterval {
  double lo = 0.0;
  double hi = 0.0;
};

struct TransportScenario {
  int fleet_size = 0;
  std::vector<int> arrival_hub;  // hub index per EV
  std::vector<double> soc_init;  // kWh
  std::vector<double> soc_target;
  DrawInterval interval;
  double mu = 0.0;
  double sigma = 0.0;
  double draw = 0.0;  // continuous TN draw before rounding
  unsigned long long seed = 0;
  long draw_index = 0;
  std::string note;  // set when the sub-interval collapsed

  std::vector<std::vector<int>> m_in(int num_hubs) const;
};

// Fleet size from a truncated normal restricted to the interval selected by
// mode ([lo, mu_prev], [mu_prev, hi], the full range, or the point hi). The
// sub-interval modes center the distribution on mu_prev; Full uses the
// configured mean.
// EV attributes depend only on (seed, EV index), so scenarios are nested in
// the fleet size.
TransportScenario sample_scenario(const io::InstanceSpec& instance, const io::AlgoParams& params, IntervalMode mode,
                                  double mu_prev, long draw_index);
TransportScenario fixed_fleet_scenario(const io::InstanceSpec& instance, unsigned long long seed, int fleet_size);

// Cheapest feasible in-window schedule: p_min everywhere in the window, then
// the remaining energy in ascending (price, period) order up to p_max.
std::vector<double> canonical_schedule(const io::InstanceSpec& instance, double soc_init, double soc_target);

struct EvAssignment {
  std::vector<std::vector<int>> m_se;    // hub x EV
  std::vector<std::vector<double>> p_ut;  // EV x period, kW
  std::vector<int> n_k;
  double travel_cost = 0.0;
  double charging_cost = 0.0;
  double objective = 0.0;

  double p_ev(int hub, int ev, int period) const;
};

class AssignmentInfeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

EvAssignment solve_assignment(const std::vector<int>& y_rcs, const TransportScenario& scenario,
                              const io::InstanceSpec& instance, double gap = 0.0);
// Every EV at its closest open hub (ties by lowest hub id) with canonical
// schedules; optimal whenever the per-hub count bounds are inactive.
EvAssignment closest_assignment(const std::vector<int>& y_rcs, const TransportScenario& scenario,
                                const io::InstanceSpec& instance);
bool count_bounds_active(const io::InstanceSpec& instance);

// Hub order of EV arrivals at hub a: ascending (distance, hub index).
std::vector<int> hub_preference(const Matrix& distance, int arrival);

std::vector<std::vector<double>> charging_load(const EvAssignment& assignment, int horizon);

// Independent arithmetic re-check of the middle-level constraints.
std::vector<std::string> check_assignment(const EvAssignment& assignment, const std::vector<int>& y_rcs,
                                          const TransportScenario& scenario, const io::InstanceSpec& instance,
                                          double tol = 1e-6);

nlohmann::json scenario_to_json(const TransportScenario& scenario);
TransportScenario scenario_from_json(const nlohmann::json& doc);

}  // namespace coplan::transport
