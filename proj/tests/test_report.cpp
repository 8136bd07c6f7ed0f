#include <filesystem>
#include <fstream>
#include <sstream>

#include "coplan/report.hpp"
#include "doctest.h"
#include "gen.hpp"

using namespace coplan;

namespace {

const std::string kToy = std::string(COPLAN_DATA_DIR) + "/toy6.json";

// Tag balance, attribute quoting and entity check; enough to catch broken markup.
bool well_formed_xml(const std::string& s, std::string* why) {
  std::vector<std::string> stack;
  std::size_t n = 0;
  if (s.rfind("<?xml", 0) == 0) n = s.find("?>") + 2;
  bool root_seen = false;
  while (n < s.size()) {
    if (s[n] == '&') {
      const auto semi = s.find(';', n);
      const auto ent = s.substr(n, semi == std::string::npos ? 0 : semi - n + 1);
      if (ent != "&amp;" && ent != "&lt;" && ent != "&gt;" && ent != "&quot;" && ent != "&apos;") {
        *why = "bad entity at " + std::to_string(n);
        return false;
      }
      n = semi + 1;
      continue;
    }
    if (s[n] == '>') {
      *why = "stray > at " + std::to_string(n);
      return false;
    }
    if (s[n] != '<') {
      if (stack.empty() && !std::isspace(static_cast<unsigned char>(s[n]))) {
        *why = "text outside the root";
        return false;
      }
      ++n;
      continue;
    }
    std::size_t e = n + 1;
    char q = 0;
    for (; e < s.size(); ++e) {
      if (q) {
        if (s[e] == q) q = 0;
        else if (s[e] == '<') {
          *why = "< inside attribute";
          return false;
        }
      } else if (s[e] == '"' || s[e] == '\'') {
        q = s[e];
      } else if (s[e] == '>') {
        break;
      }
    }
    if (e >= s.size()) {
      *why = "unterminated tag";
      return false;
    }
    const std::string tag = s.substr(n + 1, e - n - 1);
    if (tag.empty()) {
      *why = "empty tag";
      return false;
    }
    if (tag[0] == '/') {
      if (stack.empty() || stack.back() != tag.substr(1)) {
        *why = "mismatched </" + tag.substr(1) + ">";
        return false;
      }
      stack.pop_back();
    } else {
      const bool self = tag.back() == '/';
      const std::string name = tag.substr(0, tag.find_first_of(" \t\n/"));
      if (stack.empty()) {
        if (root_seen) {
          *why = "second root";
          return false;
        }
        root_seen = true;
      }
      if (!self) stack.push_back(name);
    }
    n = e + 1;
  }
  if (!stack.empty()) {
    *why = "unclosed <" + stack.back() + ">";
    return false;
  }
  return root_seen;
}

std::string random_cell(gen::Rng& rng) {
  static const std::string alphabet = "ab,\"\n x1.-";
  std::string s;
  for (int n = rng.integer(0, 6); n > 0; --n) s += alphabet[static_cast<std::size_t>(rng.integer(0, 9))];
  return s;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("CSV tables survive quoting") {
  gen::Rng rng(8);
  for (int c = 0; c < 250; ++c) {
    report::CsvTable t;
    const int cols = rng.integer(1, 5);
    for (int j = 0; j < cols; ++j) t.header.push_back("c" + std::to_string(j) + (rng.coin() ? ",x" : ""));
    for (int r = rng.integer(0, 6); r > 0; --r) {
      std::vector<std::string> row;
      for (int j = 0; j < cols; ++j) row.push_back(random_cell(rng));
      // An all-empty single-cell row is indistinguishable from a blank line.
      if (cols == 1 && row[0].empty()) row[0] = "0";
      t.rows.push_back(row);
    }
    const auto back = report::CsvTable::parse(t.to_text());
    CHECK(back.header == t.header);
    CHECK(back.rows == t.rows);
  }
  CHECK_THROWS(report::CsvTable::parse("a,b\n1\n"));
  CHECK_THROWS(report::CsvTable::parse("a,b\n\"1,2\n"));
  CHECK_THROWS(report::CsvTable::parse(""));
  CHECK(report::CsvTable::parse("a,b\r\n1,2\r\n").rows.at(0) == std::vector<std::string>{"1", "2"});
}

TEST_CASE("numbers print round-trip exact") {
  gen::Rng rng(9);
  for (int c = 0; c < 300; ++c) {
    const double x = rng.uniform(-1e6, 1e6) * std::pow(10.0, rng.integer(-12, 6));
    CHECK(std::stod(report::format_number(x)) == x);
  }
  CHECK(report::format_number(mp::kInf) == "inf");
  CHECK(report::format_number(std::nan("")) == "nan");
}

TEST_CASE("SVG charts are well-formed") {
  gen::Rng rng(10);
  for (int c = 0; c < 200; ++c) {
    std::vector<std::string> labels;
    std::vector<double> values;
    std::vector<double> x;
    report::Series a{"a<&>\"", {}}, b{"b", {}};
    const int n = rng.integer(0, 7);
    for (int k = 0; k < n; ++k) {
      labels.push_back(rng.coin() ? "x&y<" + std::to_string(k) : std::to_string(k));
      values.push_back(rng.coin(0.1) ? std::nan("") : rng.uniform(-50.0, 50.0));
      x.push_back(static_cast<double>(k) * rng.uniform(0.5, 2.0));
      a.y.push_back(rng.coin(0.1) ? mp::kInf : rng.uniform(0.0, 10.0));
      b.y.push_back(rng.uniform(-1.0, 1.0));
    }
    std::string why;
    CHECK_MESSAGE(well_formed_xml(report::bar_chart_svg("t<" + std::to_string(c), labels, values, "y&"), &why), why);
    CHECK_MESSAGE(well_formed_xml(report::line_chart_svg("t", x, {a, b}, "x", "y"), &why), why);
  }
  std::string why;
  CHECK_FALSE(well_formed_xml("<svg><g></svg>", &why));
  CHECK_FALSE(well_formed_xml("<svg>a & b</svg>", &why));
}

TEST_CASE("failures map to exit codes") {
  CHECK(report::classify(io::ValidationError({"$.x: bad"})).code == report::kInfeasible);
  CHECK(report::classify(io::ValidationError({"$.x: bad"})).issues.size() == 1);
  CHECK(report::classify(io::IoError("gone")).code == report::kUsage);
  CHECK(report::classify(std::invalid_argument("bad")).code == report::kUsage);
  CHECK(report::classify(decomp::InfeasibleInstance("none")).code == report::kInfeasible);
  CHECK(report::classify(transport::AssignmentInfeasible("none")).code == report::kInfeasible);
  CHECK(report::classify(decomp::BoundViolation("lb")).code == report::kBoundViolation);
  CHECK(report::classify(std::runtime_error("?")).code == report::kInternal);
  const auto j = report::classify(decomp::BoundViolation("lb")).to_json();
  CHECK(j.at("error") == "bound_violation");
  CHECK(j.at("exit_code") == 4);
}

TEST_CASE("run files parse back") {
  const auto in = io::load_instance(kToy);
  io::AlgoParams p;
  p.epsilon = 1e-3;
  const auto r = decomp::run_ccg(in, p);
  const auto dir = std::filesystem::temp_directory_path() / "coplan_report_test";
  std::filesystem::remove_all(dir);
  report::write_run(dir.string(), r, in);
  const auto doc = nlohmann::json::parse(slurp(dir / "result.json"));
  CHECK(doc.at("schema_version") == io::kSchemaVersion);
  CHECK(doc.at("algorithm") == "ccg");
  CHECK(doc.at("objective").get<double>() == r.objective);
  CHECK(doc.at("plan").at("fingerprint") == network::plan_fingerprint(r.plan, in));
  CHECK(doc.at("plan").at("lines").size() == r.plan.built_lines().size());
  CHECK(doc.at("costs").at("loss").get<double>() == r.loss);
  CHECK(doc.at("worst_case").at("p_load").size() == in.nodes.size());
  CHECK(transport::scenario_from_json(doc.at("fleet")).fleet_size == r.fleet.fleet_size);
  const auto csv = report::CsvTable::parse(slurp(dir / "trace.csv"));
  CHECK(csv.header == decomp::AlgoTrace::columns());
  CHECK(csv.rows.size() == r.trace.rows.size());
  const auto back = decomp::AlgoTrace::from_csv(slurp(dir / "trace.csv"));
  CHECK(decomp::check_trace(back, r.epsilon, r.epsilon_tilde, 1e-6).ok);
  std::string why;
  CHECK_MESSAGE(well_formed_xml(slurp(dir / "convergence.svg"), &why), why);
  std::filesystem::remove_all(dir);
}

TEST_CASE("compare and sweep arguments") {
  const auto in = io::load_instance(kToy);
  io::AlgoParams p;
  CHECK_THROWS_AS(report::compare(in, p, {}), std::invalid_argument);
  CHECK_THROWS_AS(report::sweep(in, p, decomp::Algorithm::Ccg, report::SweepParameter::DiuWidth, {}, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(report::sweep_case(in, p, report::SweepParameter::DiuWidth, "-1"), std::invalid_argument);
  CHECK_THROWS_AS(report::sweep_case(in, p, report::SweepParameter::FleetHi, "4.5"), std::invalid_argument);
  CHECK_THROWS_AS(report::sweep_case(in, p, report::SweepParameter::FleetMu, "five"), std::invalid_argument);
  CHECK_THROWS_AS(report::sweep_case(in, p, report::SweepParameter::RcsType, "wind"), std::invalid_argument);
  CHECK(report::sweep_case(in, p, report::SweepParameter::RcsType, "pv-ess-ev").first.rcs_type == io::RcsType::PvEssEv);
  for (const char* t : {"EV-only", "PV-EV", "PV-ESS-EV"}) {
    CHECK(io::validate_instance(report::sweep_case(in, p, report::SweepParameter::RcsType, t).first).empty());
  }
  CHECK(report::sweep_case(in, p, report::SweepParameter::FleetMu, "5.5").second.fleet_mu == 5.5);
  const auto hi = report::sweep_case(in, p, report::SweepParameter::FleetHi, "3").first;
  CHECK(hi.fleet.hi == 3);
  CHECK(hi.fleet.lo <= 3);
  CHECK(hi.fleet.mu <= 3.0);
  CHECK(report::parse_sweep_parameter("diu-width") == report::SweepParameter::DiuWidth);
  CHECK_FALSE(report::parse_sweep_parameter("price").has_value());
}

TEST_CASE("comparison rows record failures and keep going") {
  auto in = io::load_instance(kToy);
  io::AlgoParams p;
  p.max_iterations = 1;
  const auto rows = report::compare(in, p, {decomp::Algorithm::Ccg, decomp::Algorithm::Iccg});
  REQUIRE(rows.size() == 2);
  for (const auto& r : rows) {
    CHECK_FALSE(r.ok);
    CHECK(r.iterations == 1);
    CHECK(r.error == "iteration cap reached");
  }
  const auto t = report::CsvTable::parse(report::compare_table(rows).to_text());
  CHECK(t.column("wall_ms") >= 0);
  CHECK(t.rows.size() == 2);
}

TEST_CASE("width sweep on toy6") {
  const auto in = io::load_instance(kToy);
  io::AlgoParams p;
  const auto pts = report::sweep(in, p, decomp::Algorithm::Ccg, report::SweepParameter::DiuWidth, {"0", "0.5", "1"}, 3);
  REQUIRE(pts.size() == 3);
  for (const auto& s : pts) REQUIRE_MESSAGE(s.ok, s.error);

  const auto flat = io::with_diu_width(in, 0.0);
  const auto mm = network::build_master(flat, {dispatch::diu_lower_corner(flat)},
                                        transport::fixed_fleet_scenario(flat, p.seed, flat.fleet.hi), 0.0);
  const auto direct = mp::solve_with_gap(mm.program, 0.0);
  REQUIRE(direct.has_solution());
  CHECK(std::abs(pts[0].objective - direct.incumbent_value) / direct.incumbent_value <= p.epsilon);

  for (std::size_t n = 1; n < pts.size(); ++n) {
    CHECK(pts[n].loss >= pts[n - 1].loss);
    CHECK(pts[n].objective >= pts[n - 1].objective * (1.0 - p.epsilon));
  }
  const auto t = report::CsvTable::parse(report::sweep_table(pts, report::SweepParameter::DiuWidth).to_text());
  CHECK(t.header.front() == "diu_width");
  CHECK(t.column("worst_case_loss") >= 0);
  CHECK(t.column("plan_unchanged") >= 0);
}
