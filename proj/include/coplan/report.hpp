#pragma once

// Result files, CSV tables, SVG charts, algorithm comparison and
// sensitivity sweeps behind the coplan command line.

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "coplan/decomposition.hpp"

namespace coplan::report {

enum ExitCode { kOk = 0, kInternal = 1, kUsage = 2, kInfeasible = 3, kBoundViolation = 4 };

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string to_text() const;
  // Throws std::runtime_error on ragged rows or unbalanced quotes.
  static CsvTable parse(const std::string& text);
  int column(const std::string& name) const;  // -1 when absent
};

std::string format_number(double x);

nlohmann::json diu_to_json(const dispatch::DiuRealization& u);
nlohmann::json result_to_json(const decomp::RunResult& result, const io::InstanceSpec& instance);

// Writes result.json, trace.csv and convergence.svg under dir (created if missing).
void write_run(const std::string& dir, const decomp::RunResult& result, const io::InstanceSpec& instance);

struct Series {
  std::string name;
  std::vector<double> y;
};
std::string bar_chart_svg(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<double>& values, const std::string& y_label);
std::string line_chart_svg(const std::string& title, const std::vector<double>& x, const std::vector<Series>& series,
                           const std::string& x_label, const std::string& y_label);

// Maps an exception thrown by a run to its exit code and a JSON error record.
struct Failure {
  ExitCode code = kInternal;
  std::string kind;
  std::string message;
  std::vector<std::string> issues;
  nlohmann::json to_json() const;
};
Failure classify(const std::exception& e);

struct CompareRow {
  decomp::Algorithm algorithm = decomp::Algorithm::Aiccg;
  bool ok = false;
  double objective = 0.0;
  double gap = 0.0;
  int iterations = 0;
  int explorations = 0;
  int exploitations = 0;
  double wall_ms = 0.0;
  std::string error;
};
std::vector<CompareRow> compare(const io::InstanceSpec& instance, const io::AlgoParams& params,
                                const std::vector<decomp::Algorithm>& algorithms,
                                const decomp::RunOptions& options = {});
CsvTable compare_table(const std::vector<CompareRow>& rows);

enum class SweepParameter { FleetMu, FleetHi, DiuWidth, RcsType };
std::optional<SweepParameter> parse_sweep_parameter(const std::string& name);
std::string to_string(SweepParameter p);

struct SweepPoint {
  std::string value;
  bool ok = false;
  double objective = 0.0;
  double investment = 0.0;
  double middle = 0.0;
  double loss = 0.0;
  double gap = 0.0;
  int iterations = 0;
  std::string fingerprint;
  bool same_plan = false;  // fingerprint equals that of the first successful point
  std::string error;
};

// Instance and parameters for one grid value; throws std::invalid_argument
// for values that do not parse.
std::pair<io::InstanceSpec, io::AlgoParams> sweep_case(const io::InstanceSpec& instance, const io::AlgoParams& params,
                                                       SweepParameter p, const std::string& value);

// Grid points run concurrently on up to jobs threads, each fully isolated.
std::vector<SweepPoint> sweep(const io::InstanceSpec& instance, const io::AlgoParams& params, decomp::Algorithm algorithm,
                              SweepParameter p, const std::vector<std::string>& grid, int jobs,
                              const decomp::RunOptions& options = {});
CsvTable sweep_table(const std::vector<SweepPoint>& points, SweepParameter p);

}  // namespace coplan::report
