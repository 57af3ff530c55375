#include "saarti/scenario.hpp"
#include "saarti/simulation.hpp"
#include "saarti/trace.hpp"
#include "svg_plot.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace saarti;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitAccident = 10;

std::string default_out_dir()
{
  if (const char * env = std::getenv("SAARTI_OUT_DIR")) {
    return env;
  }
  return "out";
}

std::string stem_of(const std::string & path)
{
  return fs::path(path).stem().string();
}

void ensure_dir(const std::string & dir)
{
  fs::create_directories(dir);
}

struct RunOptions {
  std::string scenario_path;
  std::string strategy = "saa-rti";
  std::string out_dir = default_out_dir();
  std::int64_t seed = -1;
  bool plot = false;
  bool dump_candidates = false;
  bool dump_qp = false;
  bool timing = false;
};

int cmd_run(const RunOptions & opt)
{
  const Scenario base = load_scenario(opt.scenario_path);
  Scenario scn = base;
  if (opt.seed >= 0) {
    scn.seed = static_cast<std::uint64_t>(opt.seed);
  }
  const Strategy strategy = parse_strategy(opt.strategy);
  ensure_dir(opt.out_dir);
  const std::string stem = stem_of(opt.scenario_path) + "_" + strategy_name(strategy);

  RunHooks hooks;
  std::ofstream cand_csv;
  if (opt.dump_candidates) {
    cand_csv.open(fs::path(opt.out_dir) / (stem + "_candidates.csv"));
    cand_csv << "cycle,index,source,feasible,collision_free,cost,terminal_d,terminal_vx\n";
    hooks.on_candidates = [&cand_csv](int cycle, const std::vector<Trajectory> & cands) {
      for (const Trajectory & t : cands) {
        cand_csv << cycle << ',' << t.grid_index << ','
                 << (t.source == Trajectory::Source::kSampled ? "sampled" : "shifted") << ','
                 << t.feasible << ',' << t.collision_free << ',' << t.cost << ','
                 << t.states.back().d << ',' << t.states.back().vx << '\n';
      }
    };
  }
  std::string qp_dir;
  if (opt.dump_qp) {
    qp_dir = (fs::path(opt.out_dir) / (stem + "_qp")).string();
    ensure_dir(qp_dir);
    hooks.on_qp = [&qp_dir](int cycle, const QpProblem & prob) {
      char name[64];
      std::snprintf(name, sizeof(name), "/qp_cycle_%05d.txt", cycle);
      dump_problem(prob, qp_dir + name);
    };
  }

  const RunResult res = run_closed_loop(scn, strategy, opt.timing, &hooks);
  const std::string trace_path = (fs::path(opt.out_dir) / (stem + "_trace.csv")).string();
  write_trace_csv(res, trace_path);

  if (opt.plot) {
    const Centerline road = scn.road.build();
    plot::write_trajectory_svg(
      (fs::path(opt.out_dir) / (stem + "_traj.svg")).string(), road, res.trace, scn.obstacles,
      scn.controller.r_veh, scn.name + " / " + strategy_name(strategy));
    plot::write_forces_svg(
      (fs::path(opt.out_dir) / (stem + "_forces.svg")).string(), res.trace, scn.vehicle,
      scn.name + " / " + strategy_name(strategy));
  }

  std::printf(
    "run %s strategy=%s outcome=%s J_cl=%.4f cycles=%d emergency=%s trace=%s\n", scn.name.c_str(),
    strategy_name(strategy).c_str(), outcome_name(res.outcome).c_str(), res.J_cl, res.cycles,
    res.emergency_used ? "yes" : "no", trace_path.c_str());
  if (opt.timing && !res.trace.empty()) {
    std::vector<double> times;
    for (const StepRecord & r : res.trace) times.push_back(r.cycle_time_ms);
    std::sort(times.begin(), times.end());
    std::printf(
      "timing: median=%.2f ms p90=%.2f ms max=%.2f ms\n", times[times.size() / 2],
      times[times.size() * 9 / 10], times.back());
  }
  return is_accident(res.outcome) ? kExitAccident : kExitOk;
}

struct BatchOptions {
  std::string scenario_path;
  std::vector<std::string> strategies = {"saa-rti"};
  std::string out_dir = default_out_dir();
  std::int64_t seed = -1;
  int runs = 100;
  int jobs = 1;
};

int cmd_batch(const BatchOptions & opt)
{
  if (opt.runs < 1) {
    throw ConfigError("--runs must be at least 1");
  }
  const Scenario base = load_scenario(opt.scenario_path);
  const std::uint64_t seed = opt.seed >= 0 ? static_cast<std::uint64_t>(opt.seed) : base.seed;
  ensure_dir(opt.out_dir);

  std::vector<BatchResult> batches;
  std::printf("%-22s %-12s %6s %10s %10s %8s %8s\n", "strategy", "condition", "n", "J_mean",
              "J_ci", "P_acc", "P_ci");
  for (const std::string & name : opt.strategies) {
    const Strategy strategy = parse_strategy(name);
    const BatchResult b = run_monte_carlo(base, opt.runs, seed, strategy, opt.jobs);
    std::printf(
      "%-22s %-12s %6d %10.4f %10.4f %8.4f %8.4f\n", strategy_name(b.strategy).c_str(),
      b.condition.c_str(), b.n, b.J_mean, b.J_ci_half, b.P_acc, b.P_ci_half);
    batches.push_back(b);
  }
  const std::string agg_path =
    (fs::path(opt.out_dir) / (stem_of(opt.scenario_path) + "_batch.csv")).string();
  write_aggregate_csv(batches, agg_path);
  std::printf("aggregate written to %s\n", agg_path.c_str());
  return kExitOk;
}

int cmd_compare(const std::string & path_a, const std::string & path_b, const std::string & out_dir)
{
  const auto a = read_trace_csv(path_a);
  const auto b = read_trace_csv(path_b);
  const size_t n = std::min(a.size(), b.size());
  if (n == 0) {
    throw ConfigError("compare: empty trace");
  }
  if (a.size() != b.size()) {
    std::printf(
      "note: traces differ in length (%zu vs %zu rows); comparing the common %zu rows\n",
      a.size(), b.size(), n);
  }
  double ja = 0.0, jb = 0.0;
  for (size_t i = 0; i < n; ++i) {
    ja += a[i].j_step;
    jb += b[i].j_step;
  }
  const double delta = jb - ja;
  const double pct = ja != 0.0 ? 100.0 * delta / ja : 0.0;
  std::printf("J(common support): A=%.4f B=%.4f delta=%.4f (%+.1f%% vs A)\n", ja, jb, delta, pct);

  ensure_dir(out_dir);
  const std::string svg =
    (fs::path(out_dir) / (stem_of(path_a) + "_vs_" + stem_of(path_b) + ".svg")).string();
  plot::write_compare_svg(svg, a, b, stem_of(path_a), stem_of(path_b));
  std::printf("overlay written to %s\n", svg.c_str());
  return kExitOk;
}

int cmd_validate(const std::string & scenario_path)
{
  const Scenario scn = load_scenario(scenario_path);
  std::printf(
    "scenario '%s' valid: road length %.1f m, %zu obstacle(s), duration %.1f s, N=%d Ts=%g\n",
    scn.name.c_str(), scn.road.build().length(), scn.obstacles.size(), scn.duration,
    scn.controller.N, scn.controller.Ts);
  return kExitOk;
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"traction-adaptive sampling-augmented RTI planner/controller harness"};
  app.require_subcommand(1);

  RunOptions run_opt;
  CLI::App * run = app.add_subcommand("run", "simulate one closed-loop run and write its trace");
  run->add_option("--scenario", run_opt.scenario_path, "scenario file")->required();
  run->add_option("--strategy", run_opt.strategy,
                  "saa-rti | saa-rti-nonadaptive | sss-mpc | sqp-oracle-left | sqp-oracle-right");
  run->add_option("--seed", run_opt.seed, "seed override");
  run->add_option("--out", run_opt.out_dir, "output directory (default $SAARTI_OUT_DIR or ./out)");
  run->add_flag("--plot", run_opt.plot, "emit trajectory and force SVG plots");
  run->add_flag("--dump-candidates", run_opt.dump_candidates, "per-cycle candidate CSV");
  run->add_flag("--dump-qp", run_opt.dump_qp, "per-cycle QP problem dumps");
  run->add_flag("--timing", run_opt.timing, "measure per-cycle wall time (trace is then not reproducible)");

  BatchOptions batch_opt;
  CLI::App * batch = app.add_subcommand("batch", "Monte Carlo batch with aggregate statistics");
  batch->add_option("--scenario", batch_opt.scenario_path, "scenario file")->required();
  batch->add_option("--strategy", batch_opt.strategies, "one or more strategies")->delimiter(',');
  batch->add_option("--runs", batch_opt.runs, "runs per strategy");
  batch->add_option("--seed", batch_opt.seed, "seed override");
  batch->add_option("--jobs", batch_opt.jobs, "parallel runs");
  batch->add_option("--out", batch_opt.out_dir, "output directory");

  std::string cmp_a, cmp_b, cmp_out = default_out_dir();
  CLI::App * compare = app.add_subcommand("compare", "cost delta and overlay of two traces");
  compare->add_option("trace_a", cmp_a, "first trace CSV")->required();
  compare->add_option("trace_b", cmp_b, "second trace CSV")->required();
  compare->add_option("--out", cmp_out, "output directory");

  std::string val_path;
  CLI::App * validate = app.add_subcommand("validate", "check a scenario file");
  validate->add_option("--scenario", val_path, "scenario file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_opt);
    if (batch->parsed()) return cmd_batch(batch_opt);
    if (compare->parsed()) return cmd_compare(cmp_a, cmp_b, cmp_out);
    if (validate->parsed()) return cmd_validate(val_path);
  } catch (const ConfigError & e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception & e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
  return kExitOk;
}
