// Vertex sweep of the worst-case DIU oracle: OpenMP kernel vs serial loop.

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <numeric>
#include <vector>

#include "CLI11.hpp"
#include "coplan/dispatch.hpp"
#include "gen.hpp"

using namespace coplan;

namespace {

double time_ms(const network::PlanDecision& plan, const dispatch::Table& load, const io::InstanceSpec& in,
               const dispatch::WorstCaseOptions& opt, int reps, double* value) {
  std::vector<double> ms;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    *value = dispatch::worst_case_diu(plan, load, in, opt).D;
    ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  std::sort(ms.begin(), ms.end());
  return ms[ms.size() / 2];
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vertex sweep benchmark"};
  int nodes = 8, horizon = 3, reps = 3, threads = 0;
  std::vector<int> dims{6, 8, 10};
  unsigned long long seed = 3;
  app.add_option("--nodes", nodes);
  app.add_option("--horizon", horizon);
  app.add_option("--dims", dims)->delimiter(',');
  app.add_option("--reps", reps);
  app.add_option("--threads", threads);
  app.add_option("--seed", seed);
  CLI11_PARSE(app, argc, argv);
  if (threads > 0) omp_set_num_threads(threads);

  std::printf("threads %d\n%6s %10s %12s %12s %8s %s\n", omp_get_max_threads(), "dim", "vertices", "serial_ms",
              "parallel_ms", "speedup", "agree");
  bool all_agree = true;
  for (int dim : dims) {
    gen::Rng rng(seed + static_cast<unsigned long long>(dim));
    gen::Shape s;
    s.nodes = nodes;
    s.extra_lines = 0;
    s.hubs = 3;
    s.horizon = horizon;
    s.uncertain = dim;
    s.width = 0.4;
    s.type = io::RcsType::PvEssEv;
    const auto in = gen::random_instance(rng, s);
    std::vector<int> lines(in.lines.size());
    std::iota(lines.begin(), lines.end(), 0);
    std::vector<int> hubs(static_cast<std::size_t>(in.num_hubs()));
    std::iota(hubs.begin(), hubs.end(), 0);
    const auto plan = network::make_plan(in, lines, hubs);
    const auto load = dispatch::zeros(in.num_hubs(), in.horizon);

    dispatch::WorstCaseOptions serial, parallel;
    serial.parallel = false;
    serial.exhaustive_dim_limit = parallel.exhaustive_dim_limit = std::max(dim, 12);
    double ds = 0.0, dp = 0.0;
    const double ts = time_ms(plan, load, in, serial, reps, &ds);
    const double tp = time_ms(plan, load, in, parallel, reps, &dp);
    const bool agree = ds == dp;
    all_agree = all_agree && agree;
    std::printf("%6d %10ld %12.2f %12.2f %8.2f %s\n", dim, 1L << dim, ts, tp, ts / tp, agree ? "yes" : "NO");
  }
  return all_agree ? 0 : 1;
}
