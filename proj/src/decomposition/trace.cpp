#include <cmath>
#include <cstdio>
#include <sstream>

#include "coplan/decomposition.hpp"

namespace coplan::decomp {

const std::vector<std::string>& AlgoTrace::columns() {
  static const std::vector<std::string> cols{"iteration", "phase", "k",          "UB_i",       "LB_i",   "UB_bar",
                                             "LB_k",      "eps_up", "scen_count", "fleet_draw", "wall_ms"};
  return cols;
}

namespace {

std::string num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_num(const std::string& s) {
  if (s == "inf") return mp::kInf;
  if (s == "-inf") return -mp::kInf;
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("trailing characters in '" + s + "'");
  return v;
}

Phase parse_phase(const std::string& s) {
  for (Phase p : {Phase::Exploit, Phase::Explore, Phase::Terminate, Phase::Halt}) {
    if (to_string(p) == s) return p;
  }
  throw std::invalid_argument("unknown phase '" + s + "'");
}

}  // namespace

std::string AlgoTrace::to_csv() const {
  std::ostringstream out;
  const auto& cols = columns();
  for (std::size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << cols[c];
  out << '\n';
  for (const auto& r : rows) {
    out << r.iteration << ',' << to_string(r.phase) << ',' << r.k << ',' << num(r.ub_i) << ',' << num(r.lb_i) << ','
        << num(r.ub_bar) << ',' << num(r.lb_k) << ',' << num(r.eps_up) << ',' << r.scen_count << ',' << r.fleet_draw
        << ',' << num(r.wall_ms) << '\n';
  }
  return out.str();
}

AlgoTrace AlgoTrace::from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  AlgoTrace t;
  if (!std::getline(in, line)) throw std::invalid_argument("empty trace");
  std::vector<std::string> header;
  {
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) header.push_back(cell);
  }
  if (header != columns()) throw std::invalid_argument("trace header does not match the expected columns");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != header.size()) throw std::invalid_argument("trace row has " + std::to_string(cells.size()) + " cells");
    TraceRow r;
    r.iteration = std::stoi(cells[0]);
    r.phase = parse_phase(cells[1]);
    r.k = std::stoi(cells[2]);
    r.ub_i = parse_num(cells[3]);
    r.lb_i = parse_num(cells[4]);
    r.ub_bar = parse_num(cells[5]);
    r.lb_k = parse_num(cells[6]);
    r.eps_up = parse_num(cells[7]);
    r.scen_count = std::stoi(cells[8]);
    r.fleet_draw = std::stoi(cells[9]);
    r.wall_ms = parse_num(cells[10]);
    t.rows.push_back(r);
  }
  return t;
}

TraceCheck check_trace(const AlgoTrace& trace, double epsilon, double eps_tilde, double sandwich_slack) {
  TraceCheck chk;
  auto fail = [&](std::size_t row, const std::string& msg) {
    chk.ok = false;
    chk.issues.push_back("row " + std::to_string(row) + ": " + msg);
  };
  auto gap = [](double ub, double other) {
    return std::isfinite(ub) ? (ub - other) / std::max(std::abs(ub), 1e-12) : mp::kInf;
  };
  double lb_bar = 0.0;
  int k = 1;
  double lb_k = 0.0;
  for (std::size_t n = 0; n < trace.rows.size(); ++n) {
    const TraceRow& r = trace.rows[n];
    if (n == 0 && (r.iteration != 1 || r.scen_count != 0)) fail(n, "run must start at i = 1 with an empty scenario set");
    if (r.lb_i >= lb_bar - 1e-9 * std::max(1.0, std::abs(lb_bar))) {
      k = r.iteration;
      lb_k = r.lb_i;
      lb_bar = r.ub_i;
    }
    if (r.k != k) fail(n, "effective index " + std::to_string(r.k) + " but bookkeeping gives " + std::to_string(k));
    if (r.lb_k != lb_k) fail(n, "LB_k differs from the recorded effective lower bound");
    if (r.lb_i > r.ub_i * (1.0 + 1e-9) + 1e-9) fail(n, "master lower bound above its incumbent");
    if (n > 0) {
      const TraceRow& p = trace.rows[n - 1];
      if (r.ub_bar > p.ub_bar) fail(n, "UB_bar increased");
      if (r.eps_up > p.eps_up * (1.0 + 1e-12)) fail(n, "eps_up increased");
      if (p.phase == Phase::Explore) {
        if (r.scen_count != p.scen_count + 1) fail(n, "exploration must add exactly one scenario");
        if (r.iteration != p.iteration + 1) fail(n, "exploration must advance i");
      } else if (p.phase == Phase::Exploit) {
        if (r.scen_count != p.scen_count) fail(n, "exploitation must keep the scenario set");
        if (r.iteration != p.k) fail(n, "exploitation must rewind i to k");
      } else {
        fail(n, "row follows a final phase");
      }
    }
    if (std::isfinite(r.ub_bar) && r.lb_k > r.ub_bar + sandwich_slack * std::max(1.0, std::abs(r.ub_bar))) {
      fail(n, "LB_k exceeds UB_bar beyond the allowed slack");
    }
    const double g = gap(r.ub_bar, r.lb_k);
    const bool should_stop = g < epsilon;
    const bool should_exploit = !should_stop && gap(r.ub_bar, r.ub_i) < eps_tilde;
    switch (r.phase) {
      case Phase::Terminate:
        if (!should_stop) fail(n, "terminated with gap " + std::to_string(g));
        break;
      case Phase::Exploit:
        if (!should_exploit) fail(n, "exploitation taken outside its condition");
        break;
      case Phase::Explore:
        if (should_stop || should_exploit) fail(n, "exploration taken outside its condition");
        break;
      case Phase::Halt:
        break;
    }
    if (r.phase == Phase::Exploit) lb_bar = lb_k;
  }
  return chk;
}

}  // namespace coplan::decomp
