// coplan: solve, compare, sweep and validate co-planning instances.

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "coplan/report.hpp"

using namespace coplan;

namespace {

struct Cli {
  std::string instance;
  std::string algorithm = "aiccg";
  std::vector<std::string> algorithms{"ccg", "iccg", "aiccg"};
  std::string output = "coplan-out";
  std::string parameter;
  std::vector<std::string> grid;
  std::string oracle = "vertex";
  int jobs = 0;
  bool quiet = false;
  io::AlgoParams params;
};

int fail(const report::Failure& f, const std::string& output_dir) {
  std::cerr << f.to_json().dump() << "\n";
  if (!output_dir.empty()) {
    try {
      std::filesystem::create_directories(output_dir);
      io::write_text_file((std::filesystem::path(output_dir) / "error.json").string(), f.to_json().dump(2) + "\n");
    } catch (const std::exception&) {
    }
  }
  return f.code;
}

int usage(const std::string& message, const CLI::App& app, const std::string& output_dir = {}) {
  std::cerr << app.help() << "\n";
  return fail({report::kUsage, "usage", message, {}}, output_dir);
}

void add_params(CLI::App* cmd, Cli& c) {
  cmd->add_option("--instance", c.instance, "instance JSON file")->required();
  cmd->add_option("--epsilon", c.params.epsilon, "termination gap");
  cmd->add_option("--epsilon-tilde", c.params.epsilon_tilde, "exploitation threshold (default eps/(2(1+eps)))");
  cmd->add_option("--eps-up-init", c.params.eps_up_init, "initial master gap");
  cmd->add_option("--alpha", c.params.alpha, "master gap reduction factor");
  cmd->add_option("--seed", c.params.seed, "fleet sampling seed");
  cmd->add_option("--max-iterations", c.params.max_iterations, "master solve cap");
  cmd->add_option("--fleet-mu", c.params.fleet_mu, "override the fleet mean");
  cmd->add_option("--fleet-sigma", c.params.fleet_sigma, "override the fleet standard deviation");
  cmd->add_option("--slack", c.params.sandwich_slack, "allowed LB over UB slack (relative)");
  cmd->add_option("--oracle", c.oracle, "worst-case method: vertex or kkt");
  cmd->add_option("--jobs", c.jobs, "worker threads (0: all cores)");
  cmd->add_option("--output", c.output, "output directory");
  cmd->add_flag("--quiet", c.quiet, "no per-iteration progress");
}

void print_row(const decomp::TraceRow& r) {
  std::cerr << "  i=" << r.iteration << " k=" << r.k << " " << decomp::to_string(r.phase)
            << " UB=" << report::format_number(r.ub_bar) << " LB=" << report::format_number(r.lb_k)
            << " |U|=" << r.scen_count << " v=" << r.fleet_draw << "\n";
}

void write_csv_and_svg(const std::string& dir, const std::string& stem, const report::CsvTable& t,
                       const std::string& svg) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  io::write_text_file((base / (stem + ".csv")).string(), t.to_text());
  io::write_text_file((base / (stem + ".svg")).string(), svg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic-robust co-planning of distribution networks and renewable charging stations"};
  app.require_subcommand(1);
  Cli c;
  auto* solve = app.add_subcommand("solve", "run one algorithm and write result.json and trace.csv");
  add_params(solve, c);
  solve->add_option("--algorithm", c.algorithm, "ccg, iccg or aiccg");
  auto* cmp = app.add_subcommand("compare", "run several algorithms on the same instance and seed");
  add_params(cmp, c);
  cmp->add_option("--algorithms", c.algorithms, "algorithms to compare")->delimiter(',');
  auto* swp = app.add_subcommand("sweep", "sensitivity sweep over fleet_mu, fleet_hi, diu_width or rcs_type");
  add_params(swp, c);
  swp->add_option("--algorithm", c.algorithm, "ccg, iccg or aiccg");
  swp->add_option("--parameter", c.parameter, "swept quantity")->required();
  swp->add_option("--grid", c.grid, "comma-separated grid values")->delimiter(',')->required();
  auto* val = app.add_subcommand("validate", "check an instance file against the schema and invariants");
  val->add_option("--instance", c.instance, "instance JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return usage(e.what(), app);
  }

  const std::string out = val->parsed() ? std::string() : c.output;
  try {
    mp::default_backend();
  } catch (const std::exception& e) {
    return fail({report::kUsage, "usage", e.what(), {}}, out);
  }
  if (c.jobs > 0) omp_set_num_threads(c.jobs);

  io::InstanceSpec in;
  try {
    in = io::load_instance(c.instance);
  } catch (const std::exception& e) {
    return fail(report::classify(e), out);
  }
  if (val->parsed()) {
    std::cout << nlohmann::json{{"ok", true}, {"instance", in.name}, {"nodes", in.nodes.size()},
                                {"lines", in.lines.size()}, {"hubs", in.hubs.size()}}
                     .dump()
              << "\n";
    return report::kOk;
  }

  if (auto issues = io::validate_params(c.params); !issues.empty()) {
    return fail({report::kUsage, "usage", "invalid parameters", issues}, out);
  }
  decomp::RunOptions options;
  if (c.oracle == "kkt") options.oracle.method = dispatch::WorstCaseMethod::KktMilp;
  else if (c.oracle != "vertex") return usage("unknown --oracle '" + c.oracle + "'", app, out);
  if (!c.quiet) options.on_row = print_row;

  try {
    if (solve->parsed()) {
      const auto algo = decomp::parse_algorithm(c.algorithm);
      if (!algo) return usage("unknown algorithm '" + c.algorithm + "' (expected ccg, iccg or aiccg)", *solve, out);
      const auto r = decomp::run(*algo, in, c.params, options);
      report::write_run(out, r, in);
      std::cout << decomp::to_string(r.algorithm) << " on " << in.name << "\n"
                << "  plan        " << network::plan_summary(r.plan, in) << "\n"
                << "  fingerprint " << network::plan_fingerprint(r.plan, in) << "\n"
                << "  objective   " << r.objective << "  (investment " << r.investment << ", middle " << r.middle
                << ", loss " << r.loss << ")\n"
                << "  gap         " << r.gap_certified << (r.terminated ? "" : "  (iteration cap reached)") << "\n"
                << "  iterations  " << r.iterations << "  explorations " << r.explorations << "  exploitations "
                << r.exploitations << "\n"
                << "  wall        " << r.wall_ms / 1000.0 << " s\n"
                << "  wrote       " << out << "/result.json, trace.csv, convergence.svg\n";
      return report::kOk;
    }
    if (cmp->parsed()) {
      if (c.algorithms.empty()) return usage("empty comparison list", *cmp, out);
      std::vector<decomp::Algorithm> algos;
      for (const auto& a : c.algorithms) {
        const auto p = decomp::parse_algorithm(a);
        if (!p) return usage("unknown algorithm '" + a + "'", *cmp, out);
        algos.push_back(*p);
      }
      const auto rows = report::compare(in, c.params, algos, options);
      const auto table = report::compare_table(rows);
      std::vector<std::string> labels;
      std::vector<double> obj, ms;
      for (const auto& r : rows) {
        labels.push_back(decomp::to_string(r.algorithm));
        obj.push_back(r.ok ? r.objective : std::nan(""));
        ms.push_back(r.ok ? r.wall_ms : std::nan(""));
      }
      write_csv_and_svg(out, "compare", table,
                        report::bar_chart_svg("annualized cost: " + in.name, labels, obj, "10^4 CNY"));
      io::write_text_file((std::filesystem::path(out) / "compare_time.svg").string(),
                          report::bar_chart_svg("solution time: " + in.name, labels, ms, "ms"));
      std::cout << table.to_text();
      return report::kOk;
    }
    const auto algo = decomp::parse_algorithm(c.algorithm);
    if (!algo) return usage("unknown algorithm '" + c.algorithm + "'", *swp, out);
    const auto param = report::parse_sweep_parameter(c.parameter);
    if (!param) return usage("unknown sweep parameter '" + c.parameter + "'", *swp, out);
    if (c.grid.empty()) return usage("empty sweep grid", *swp, out);
    options.on_row = nullptr;
    const int jobs = c.jobs > 0 ? c.jobs : static_cast<int>(std::thread::hardware_concurrency());
    if (jobs > 1) omp_set_num_threads(1);
    const auto pts = report::sweep(in, c.params, *algo, *param, c.grid, jobs, options);
    const auto table = report::sweep_table(pts, *param);
    std::string svg;
    if (*param == report::SweepParameter::RcsType) {
      std::vector<double> obj;
      for (const auto& p : pts) obj.push_back(p.ok ? p.objective : std::nan(""));
      svg = report::bar_chart_svg("objective by RCS type", c.grid, obj, "10^4 CNY");
    } else {
      std::vector<double> x;
      report::Series obj{"objective", {}}, loss{"worst-case loss", {}};
      for (const auto& p : pts) {
        x.push_back(std::stod(p.value));
        obj.y.push_back(p.ok ? p.objective : std::nan(""));
        loss.y.push_back(p.ok ? p.loss : std::nan(""));
      }
      svg = report::line_chart_svg("sensitivity: " + report::to_string(*param), x, {obj, loss},
                                   report::to_string(*param), "10^4 CNY");
    }
    write_csv_and_svg(out, "sweep", table, svg);
    std::cout << table.to_text();
    return report::kOk;
  } catch (const std::exception& e) {
    return fail(report::classify(e), out);
  }
}
