#pragma once

// Lower level: minimum-loss LinDistFlow dispatch, the worst-case DIU oracle
// (vertex enumeration and a KKT / big-M single-level MILP), KKT residual
// checks and the ESS complementarity audit.

#include <optional>
#include <string>
#include <vector>

#include "coplan/instance.hpp"
#include "coplan/mathprog.hpp"
#include "coplan/network.hpp"

namespace coplan::dispatch {

using Table = std::vector<std::vector<double>>;  // row-major [owner][period]

Table zeros(int rows, int periods);

struct DiuRealization {
  Table p_load;  // node x period, pu
  Table q_load;  // node x period, pu
  Table p_pv;    // hub x period, pu

  bool approx_equal(const DiuRealization& other, double tol) const;
};

enum class DiuKind { PLoad, QLoad, PPv };

// One coordinate of the DIU box with nonzero width.
struct DiuCoordinate {
  DiuKind kind = DiuKind::PLoad;
  int owner = 0;  // node index or hub index
  int period = 0;
  double lo = 0.0;
  double hi = 0.0;
};

DiuRealization diu_lower_corner(const io::InstanceSpec& instance);
std::vector<DiuCoordinate> diu_coordinates(const io::InstanceSpec& instance);
// Lower corner with coordinate c set to its upper end whenever bit c of mask is on.
DiuRealization diu_vertex(const io::InstanceSpec& instance, const std::vector<DiuCoordinate>& coords,
                          const std::vector<char>& upper);
bool diu_within_box(const io::InstanceSpec& instance, const DiuRealization& u, double tol = 1e-9);

struct DistFlowState {
  bool feasible = false;
  std::string binding_family;  // set when infeasible
  Table p_flow, q_flow;        // line x period
  Table v_sq;                  // node x period
  std::vector<double> p_sub, q_sub;
  Table e_ess;                 // hub x (period + 1)
  Table p_ch, p_dis;           // hub x period
  double loss_cost = 0.0;      // annualized 10^4 CNY
};

// An on/off switch that is either a constant or a binary program variable.
struct Switch {
  mp::VarRef var;
  double value = 0.0;
  bool is_var() const { return var.valid(); }
  bool surely_off() const { return !is_var() && value == 0.0; }
  mp::LinearExpr expr(double scale = 1.0) const;
};

struct OperationInputs {
  std::vector<Switch> lines;  // per candidate line
  std::vector<Switch> hubs;   // per hub
  // Aggregated EV charging per hub and period in pu (expressions so the
  // master can tie them to assignment variables).
  std::vector<std::vector<mp::LinearExpr>> hub_load;
  std::vector<int> periods;   // subset of the horizon (all periods when ESS is present)
};

struct OperationVars {
  std::vector<std::vector<mp::VarRef>> p, q;  // [line][period slot], invalid when the line is off
  std::vector<std::vector<mp::VarRef>> v;     // [node][slot]
  std::vector<mp::VarRef> p_sub, q_sub;       // [slot]
  std::vector<std::vector<mp::VarRef>> e, ch, dis;  // [hub][slot] (e has slots + 1)
  mp::LinearExpr loss;                        // epigraph sum when requested
};

enum class LossMode { ObjectiveSquares, Epigraph };

// LinDistFlow constraints for one DIU realization.
OperationVars add_operation_block(mp::ProgramBuilder& builder, const io::InstanceSpec& instance,
                                  const OperationInputs& inputs, const DiuRealization& u, LossMode mode,
                                  bool relax_substation = false, bool relax_capacity = false,
                                  bool relax_voltage = false);

// Weight of r (p^2 + q^2) in the annualized loss of one period.
double loss_weight(const io::InstanceSpec& instance, int line, int period);

// hub_load_kw: hub x period charging power in kW.
DistFlowState dispatch_min_loss(const network::PlanDecision& plan, const Table& hub_load_kw,
                                const DiuRealization& u, const io::InstanceSpec& instance);
// Restricted to a subset of periods (valid when no ESS is built).
DistFlowState dispatch_min_loss_periods(const network::PlanDecision& plan, const Table& hub_load_kw,
                                        const DiuRealization& u, const io::InstanceSpec& instance,
                                        const std::vector<int>& periods);

// Standard-form inner problem: min 1/2 x'Qx  s.t.  G x <= h0 + H u,  E x = f0 + F u,
// x_j >= 0 for j in sign_constrained; u ranges over the DIU coordinates.
struct InnerModel {
  int n = 0;
  std::vector<double> q_diag;
  std::vector<std::vector<std::pair<int, double>>> g_rows;
  std::vector<double> h0;
  std::vector<std::vector<std::pair<int, double>>> h_u;  // per G row: (coord, coef)
  std::vector<std::vector<std::pair<int, double>>> e_rows;
  std::vector<double> f0;
  std::vector<std::vector<std::pair<int, double>>> f_u;
  std::vector<char> sign_constrained;
  std::vector<std::string> names;
  std::vector<DiuCoordinate> coords;
  std::vector<double> lower, upper;  // finite bounds are written into G

  std::vector<double> h_at(const std::vector<double>& u) const;
  std::vector<double> f_at(const std::vector<double>& u) const;
};

InnerModel build_inner_model(const network::PlanDecision& plan, const Table& hub_load_kw,
                             const io::InstanceSpec& instance, const std::vector<int>& periods);

struct KktResiduals {
  double stationarity = 0.0;
  double primal = 0.0;
  double dual = 0.0;
  double complementarity = 0.0;
  bool pass(double tol = 1e-5) const {
    return stationarity <= tol && primal <= tol && dual <= tol && complementarity <= tol;
  }
};

struct KktCertificate {
  std::vector<double> x, pi, lambda, nu;
  std::vector<int> o, w;
  std::vector<double> u;  // DIU coordinate values
  KktResiduals residuals;
};

KktResiduals check_kkt(const KktCertificate& cert, const InnerModel& model);

enum class WorstCaseMethod { VertexEnum, KktMilp };

struct WorstCaseOptions {
  WorstCaseMethod method = WorstCaseMethod::VertexEnum;
  bool parallel = true;
  long vertex_budget = 1L << 16;
  int exhaustive_dim_limit = 12;
  double dual_bound = 0.0;  // 0: derived per model
};

struct WorstCase {
  DiuRealization u;
  double D = 0.0;  // +inf when some realization makes the dispatch infeasible
  bool exhaustive = true;
  long evaluations = 0;
  std::optional<KktCertificate> cert;
  std::optional<InnerModel> model;
};

class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

WorstCase worst_case_diu(const network::PlanDecision& plan, const Table& hub_load_kw,
                         const io::InstanceSpec& instance, const WorstCaseOptions& options = {});

struct EssFlag {
  int hub = 0;
  int period = 0;
  double product = 0.0;
};

std::vector<EssFlag> ess_relaxation_audit(const DistFlowState& state);

}  // namespace coplan::dispatch
