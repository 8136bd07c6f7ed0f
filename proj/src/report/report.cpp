#include "coplan/report.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace coplan::report {

namespace {

bool needs_quotes(const std::string& s) {
  return s.find_first_of(",\"\n\r") != std::string::npos;
}

std::string quote(const std::string& s) {
  if (!needs_quotes(s)) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

double parse_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("not a number: '" + s + "'");
  }
  if (used != s.size()) throw std::invalid_argument("not a number: '" + s + "'");
  return v;
}

nlohmann::json table_json(const dispatch::Table& t) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& row : t) a.push_back(row);
  return a;
}

nlohmann::json finite_or_null(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }

constexpr double kW = 640.0, kH = 400.0, kLeft = 70.0, kRight = 20.0, kTop = 40.0, kBottom = 60.0;
const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

struct Axis {
  double lo = 0.0, hi = 1.0;
  void fit(double v) {
    if (!std::isfinite(v)) return;
    if (!used) lo = hi = v;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    used = true;
  }
  void pad() {
    if (!used) lo = 0.0, hi = 1.0;
    if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi))) {
      lo -= 0.5 * std::max(1.0, std::abs(lo)) * 1e-3 + 0.5;
      hi += 0.5 * std::max(1.0, std::abs(hi)) * 1e-3 + 0.5;
    }
    const double m = 0.05 * (hi - lo);
    lo -= m;
    hi += m;
  }
  bool used = false;
};

std::string svg_open(const std::string& title) {
  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\" viewBox=\"0 0 " << kW
    << ' ' << kH << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << kW / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
    << xml_escape(title) << "</text>\n";
  return o.str();
}

void y_axis(std::ostringstream& o, const Axis& ay, const std::string& label) {
  const double x0 = kLeft, y0 = kH - kBottom, y1 = kTop;
  o << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y1 << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = ay.lo + (ay.hi - ay.lo) * t / 4.0;
    const double y = y0 - (y0 - y1) * t / 4.0;
    o << "<line x1=\"" << x0 - 4 << "\" y1=\"" << y << "\" x2=\"" << x0 << "\" y2=\"" << y << "\" stroke=\"black\"/>\n"
      << "<text x=\"" << x0 - 6 << "\" y=\"" << y + 4
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << xml_escape(format_number(v))
      << "</text>\n";
  }
  o << "<text transform=\"translate(14," << (y0 + y1) / 2
    << ") rotate(-90)\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << xml_escape(label)
    << "</text>\n";
}

}  // namespace

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string CsvTable::to_text() const {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) out += ',';
      out += quote(cells[c]);
    }
    out += '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  return out;
}

CsvTable CsvTable::parse(const std::string& text) {
  std::vector<std::vector<std::string>> lines;
  std::vector<std::string> cur;
  std::string cell;
  bool quoted = false, any = false;
  for (std::size_t n = 0; n < text.size(); ++n) {
    const char c = text[n];
    if (quoted) {
      if (c == '"') {
        if (n + 1 < text.size() && text[n + 1] == '"') {
          cell += '"';
          ++n;
        } else {
          quoted = false;
        }
      } else {
        cell += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      cur.push_back(cell);
      cell.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && n + 1 < text.size() && text[n + 1] == '\n') ++n;
      if (any || !cell.empty()) {
        cur.push_back(cell);
        lines.push_back(cur);
      }
      cur.clear();
      cell.clear();
      any = false;
    } else {
      cell += c;
      any = true;
    }
  }
  if (quoted) throw std::runtime_error("csv: unterminated quoted field");
  if (any || !cell.empty()) {
    cur.push_back(cell);
    lines.push_back(cur);
  }
  if (lines.empty()) throw std::runtime_error("csv: missing header");
  CsvTable t;
  t.header = lines.front();
  for (std::size_t r = 1; r < lines.size(); ++r) {
    if (lines[r].size() != t.header.size()) {
      throw std::runtime_error("csv: row " + std::to_string(r) + " has " + std::to_string(lines[r].size()) +
                               " cells, header has " + std::to_string(t.header.size()));
    }
    t.rows.push_back(lines[r]);
  }
  return t;
}

int CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

nlohmann::json diu_to_json(const dispatch::DiuRealization& u) {
  return {{"p_load", table_json(u.p_load)}, {"q_load", table_json(u.q_load)}, {"p_pv", table_json(u.p_pv)}};
}

nlohmann::json result_to_json(const decomp::RunResult& r, const io::InstanceSpec& in) {
  nlohmann::json lines = nlohmann::json::array();
  for (int e : r.plan.built_lines()) {
    const auto& l = in.lines[static_cast<std::size_t>(e)];
    lines.push_back({{"index", e}, {"from", l.from}, {"to", l.to}});
  }
  nlohmann::json hubs = nlohmann::json::array();
  for (int k : r.plan.built_hubs()) hubs.push_back(in.hubs[static_cast<std::size_t>(k)].id);
  nlohmann::json draws = nlohmann::json::array();
  for (const auto& d : r.draws) {
    draws.push_back({{"mode", d.mode == transport::IntervalMode::Lower   ? "lower"
                              : d.mode == transport::IntervalMode::Upper ? "upper"
                                                                         : "full"},
                     {"mu_prev", d.mu_prev},
                     {"lo", d.lo},
                     {"hi", d.hi},
                     {"draw", d.draw},
                     {"fleet_size", d.fleet_size}});
  }
  return {
      {"schema_version", io::kSchemaVersion},
      {"instance", in.name},
      {"algorithm", decomp::to_string(r.algorithm)},
      {"terminated", r.terminated},
      {"objective", finite_or_null(r.objective)},
      {"lower_bound", r.lower_bound},
      {"gap_certified", finite_or_null(r.gap_certified)},
      {"costs", {{"investment", r.investment}, {"middle", r.middle}, {"loss", r.loss}}},
      {"plan",
       {{"lines", lines},
        {"rcs", hubs},
        {"fingerprint", network::plan_fingerprint(r.plan, in)},
        {"summary", network::plan_summary(r.plan, in)}}},
      {"counts",
       {{"iterations", r.iterations},
        {"explorations", r.explorations},
        {"exploitations", r.exploitations},
        {"distinct_u", r.distinct_u},
        {"max_consecutive_exploitations", r.max_consecutive_exploitations},
        {"scenarios", r.scenarios.size()}}},
      {"params",
       {{"epsilon", r.epsilon}, {"epsilon_tilde", r.epsilon_tilde}, {"eps_up_init", r.eps_up_init}, {"alpha", r.alpha}}},
      {"exploitation_gaps", r.exploitation_gaps},
      {"exploitation_bounds", r.exploitation_bounds},
      {"fleet", transport::scenario_to_json(r.fleet)},
      {"fleet_draws", draws},
      {"worst_case", diu_to_json(r.worst)},
      {"notes", r.notes},
      {"wall_ms", r.wall_ms},
  };
}

void write_run(const std::string& dir, const decomp::RunResult& r, const io::InstanceSpec& in) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  io::write_text_file((base / "result.json").string(), result_to_json(r, in).dump(2) + "\n");
  io::write_text_file((base / "trace.csv").string(), r.trace.to_csv());
  std::vector<double> x;
  Series ub{"UB_bar", {}}, lb{"LB_k", {}};
  for (std::size_t n = 0; n < r.trace.rows.size(); ++n) {
    x.push_back(static_cast<double>(n + 1));
    ub.y.push_back(r.trace.rows[n].ub_bar);
    lb.y.push_back(r.trace.rows[n].lb_k);
  }
  io::write_text_file((base / "convergence.svg").string(),
                      line_chart_svg(decomp::to_string(r.algorithm) + " bounds", x, {ub, lb}, "master solve",
                                     "annualized cost (10^4 CNY)"));
}

std::string bar_chart_svg(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<double>& values, const std::string& y_label) {
  Axis ay;
  ay.fit(0.0);
  for (double v : values) ay.fit(v);
  ay.pad();
  std::ostringstream o;
  o << svg_open(title);
  y_axis(o, ay, y_label);
  const double y0 = kH - kBottom, y1 = kTop, span = kW - kLeft - kRight;
  const double slot = labels.empty() ? span : span / static_cast<double>(labels.size());
  auto ypix = [&](double v) { return y0 - (y0 - y1) * (v - ay.lo) / (ay.hi - ay.lo); };
  o << "<line x1=\"" << kLeft << "\" y1=\"" << ypix(0.0) << "\" x2=\"" << kW - kRight << "\" y2=\"" << ypix(0.0)
    << "\" stroke=\"black\"/>\n";
  for (std::size_t n = 0; n < labels.size(); ++n) {
    const double v = n < values.size() ? values[n] : std::nan("");
    const double cx = kLeft + slot * (static_cast<double>(n) + 0.5);
    if (std::isfinite(v)) {
      const double top = std::min(ypix(v), ypix(0.0)), h = std::abs(ypix(v) - ypix(0.0));
      o << "<rect x=\"" << cx - 0.3 * slot << "\" y=\"" << top << "\" width=\"" << 0.6 * slot << "\" height=\"" << h
        << "\" fill=\"" << kPalette[n % 6] << "\"/>\n"
        << "<text x=\"" << cx << "\" y=\"" << top - 4
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << xml_escape(format_number(v))
        << "</text>\n";
    }
    o << "<text x=\"" << cx << "\" y=\"" << y0 + 18
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << xml_escape(labels[n])
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string line_chart_svg(const std::string& title, const std::vector<double>& x, const std::vector<Series>& series,
                           const std::string& x_label, const std::string& y_label) {
  Axis ax, ay;
  for (double v : x) ax.fit(v);
  for (const auto& s : series)
    for (double v : s.y) ay.fit(v);
  ax.pad();
  ay.pad();
  std::ostringstream o;
  o << svg_open(title);
  y_axis(o, ay, y_label);
  const double y0 = kH - kBottom, y1 = kTop, x0 = kLeft, x1 = kW - kRight;
  auto xpix = [&](double v) { return x0 + (x1 - x0) * (v - ax.lo) / (ax.hi - ax.lo); };
  auto ypix = [&](double v) { return y0 - (y0 - y1) * (v - ay.lo) / (ay.hi - ay.lo); };
  o << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1 << "\" y2=\"" << y0 << "\" stroke=\"black\"/>\n";
  for (double v : x) {
    o << "<text x=\"" << xpix(v) << "\" y=\"" << y0 + 16
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << xml_escape(format_number(v))
      << "</text>\n";
  }
  o << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << kH - 14
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << xml_escape(x_label) << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % 6];
    std::string pts;
    auto flush = [&]() {
      if (!pts.empty()) o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"" << pts << "\"/>\n";
      pts.clear();
    };
    for (std::size_t n = 0; n < x.size() && n < series[s].y.size(); ++n) {
      const double v = series[s].y[n];
      if (!std::isfinite(v)) {
        flush();
        continue;
      }
      pts += (pts.empty() ? "" : " ") + format_number(xpix(x[n])) + "," + format_number(ypix(v));
      o << "<circle cx=\"" << xpix(x[n]) << "\" cy=\"" << ypix(v) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    flush();
    const double ly = kTop + 14.0 * static_cast<double>(s);
    o << "<rect x=\"" << x1 - 120 << "\" y=\"" << ly - 8 << "\" width=\"10\" height=\"10\" fill=\"" << color << "\"/>\n"
      << "<text x=\"" << x1 - 105 << "\" y=\"" << ly + 1 << "\" font-family=\"sans-serif\" font-size=\"11\">"
      << xml_escape(series[s].name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

nlohmann::json Failure::to_json() const {
  return {{"error", kind}, {"message", message}, {"issues", issues}, {"exit_code", static_cast<int>(code)}};
}

Failure classify(const std::exception& e) {
  Failure f;
  f.message = e.what();
  if (const auto* v = dynamic_cast<const io::ValidationError*>(&e)) {
    f.code = kInfeasible;
    f.kind = "validation";
    f.issues = v->issues();
  } else if (dynamic_cast<const io::IoError*>(&e)) {
    f.code = kUsage;
    f.kind = "io";
  } else if (dynamic_cast<const std::invalid_argument*>(&e)) {
    f.code = kUsage;
    f.kind = "usage";
  } else if (dynamic_cast<const decomp::InfeasibleInstance*>(&e) ||
             dynamic_cast<const transport::AssignmentInfeasible*>(&e)) {
    f.code = kInfeasible;
    f.kind = "infeasible";
  } else if (dynamic_cast<const decomp::BoundViolation*>(&e)) {
    f.code = kBoundViolation;
    f.kind = "bound_violation";
  } else {
    f.code = kInternal;
    f.kind = "internal";
  }
  return f;
}

std::vector<CompareRow> compare(const io::InstanceSpec& instance, const io::AlgoParams& params,
                                const std::vector<decomp::Algorithm>& algorithms, const decomp::RunOptions& options) {
  if (algorithms.empty()) throw std::invalid_argument("compare: no algorithms given");
  std::vector<CompareRow> rows;
  for (auto a : algorithms) {
    CompareRow row;
    row.algorithm = a;
    try {
      const auto r = decomp::run(a, instance, params, options);
      row.ok = r.terminated;
      row.objective = r.objective;
      row.gap = r.gap_certified;
      row.iterations = r.iterations;
      row.explorations = r.explorations;
      row.exploitations = r.exploitations;
      row.wall_ms = r.wall_ms;
      if (!r.terminated) row.error = "iteration cap reached";
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(row);
  }
  return rows;
}

CsvTable compare_table(const std::vector<CompareRow>& rows) {
  CsvTable t;
  t.header = {"algorithm", "objective", "gap", "iterations", "explorations", "exploitations", "wall_ms", "status"};
  for (const auto& r : rows) {
    t.rows.push_back({decomp::to_string(r.algorithm), format_number(r.objective), format_number(r.gap),
                      std::to_string(r.iterations), std::to_string(r.explorations), std::to_string(r.exploitations),
                      format_number(r.wall_ms), r.ok ? "ok" : r.error});
  }
  return t;
}

std::optional<SweepParameter> parse_sweep_parameter(const std::string& name) {
  const auto n = lower(name);
  if (n == "fleet_mu" || n == "fleet-mu") return SweepParameter::FleetMu;
  if (n == "fleet_hi" || n == "fleet-hi") return SweepParameter::FleetHi;
  if (n == "diu_width" || n == "diu-width") return SweepParameter::DiuWidth;
  if (n == "rcs_type" || n == "rcs-type") return SweepParameter::RcsType;
  return std::nullopt;
}

std::string to_string(SweepParameter p) {
  switch (p) {
    case SweepParameter::FleetMu: return "fleet_mu";
    case SweepParameter::FleetHi: return "fleet_hi";
    case SweepParameter::DiuWidth: return "diu_width";
    case SweepParameter::RcsType: return "rcs_type";
  }
  return "?";
}

std::pair<io::InstanceSpec, io::AlgoParams> sweep_case(const io::InstanceSpec& instance, const io::AlgoParams& params,
                                                       SweepParameter p, const std::string& value) {
  io::InstanceSpec in = instance;
  io::AlgoParams pr = params;
  switch (p) {
    case SweepParameter::FleetMu: pr.fleet_mu = parse_double(value); break;
    case SweepParameter::FleetHi: {
      const double v = parse_double(value);
      if (v != std::floor(v)) throw std::invalid_argument("fleet_hi must be an integer: '" + value + "'");
      in.fleet.hi = static_cast<int>(v);
      in.fleet.lo = std::min(in.fleet.lo, in.fleet.hi);
      in.fleet.mu = std::min(in.fleet.mu, static_cast<double>(in.fleet.hi));
      break;
    }
    case SweepParameter::DiuWidth: {
      const double w = parse_double(value);
      if (w < 0.0) throw std::invalid_argument("diu_width must be nonnegative: '" + value + "'");
      in = io::with_diu_width(instance, w);
      break;
    }
    case SweepParameter::RcsType: {
      const auto v = lower(value);
      if (v == "ev-only") in.rcs_type = io::RcsType::EvOnly;
      else if (v == "pv-ev") in.rcs_type = io::RcsType::PvEv;
      else if (v == "pv-ess-ev") in.rcs_type = io::RcsType::PvEssEv;
      else throw std::invalid_argument("unknown rcs_type '" + value + "'");
      if (!in.has_pv()) in.diu.p_pv.clear();
      break;
    }
  }
  return {in, pr};
}

std::vector<SweepPoint> sweep(const io::InstanceSpec& instance, const io::AlgoParams& params, decomp::Algorithm algorithm,
                              SweepParameter p, const std::vector<std::string>& grid, int jobs,
                              const decomp::RunOptions& options) {
  if (grid.empty()) throw std::invalid_argument("sweep: empty grid");
  std::vector<SweepPoint> pts(grid.size());
  for (std::size_t n = 0; n < grid.size(); ++n) {
    pts[n].value = grid[n];
    sweep_case(instance, params, p, grid[n]);
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t n = next++; n < grid.size(); n = next++) {
      SweepPoint& pt = pts[n];
      try {
        const auto [in, pr] = sweep_case(instance, params, p, grid[n]);
        auto opt = options;
        opt.on_row = nullptr;
        const auto r = decomp::run(algorithm, in, pr, opt);
        pt.ok = r.terminated;
        pt.objective = r.objective;
        pt.investment = r.investment;
        pt.middle = r.middle;
        pt.loss = r.loss;
        pt.gap = r.gap_certified;
        pt.iterations = r.iterations;
        pt.fingerprint = network::plan_fingerprint(r.plan, in);
        if (!r.terminated) pt.error = "iteration cap reached";
      } catch (const std::exception& e) {
        pt.error = e.what();
      }
    }
  };
  const int n_threads = std::clamp(jobs, 1, static_cast<int>(grid.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  const auto first = std::find_if(pts.begin(), pts.end(), [](const SweepPoint& s) { return s.ok; });
  for (auto& s : pts) s.same_plan = s.ok && first != pts.end() && s.fingerprint == first->fingerprint;
  return pts;
}

CsvTable sweep_table(const std::vector<SweepPoint>& points, SweepParameter p) {
  CsvTable t;
  t.header = {to_string(p), "objective", "investment", "middle", "worst_case_loss", "gap",
              "iterations", "fingerprint", "plan_unchanged", "status"};
  for (const auto& s : points) {
    t.rows.push_back({s.value, format_number(s.objective), format_number(s.investment), format_number(s.middle),
                      format_number(s.loss), format_number(s.gap), std::to_string(s.iterations), s.fingerprint,
                      s.same_plan ? "yes" : "no", s.ok ? "ok" : s.error});
  }
  return t;
}

}  // namespace coplan::report
