#include "saarti/trace.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace saarti {

const char * const kTraceHeader =
  "t,s,d,dpsi,psidot,vx,vy,Fyf_cmd,Fx_cmd,Fyf_real,Fxf_real,Fyr_real,"
  "mu_est,mu_act,sigma_s,sigma_d,sigma_vx,qp_iters,cycle_time_ms,J_step";

std::string trace_to_csv(const RunResult & result)
{
  std::string out(kTraceHeader);
  out += '\n';
  char buf[640];
  for (const StepRecord & r : result.trace) {
    std::snprintf(
      buf, sizeof(buf),
      "%.6f,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,"
      "%.9g,%.9g,%.9g,%.9g,%.9g,%d,%.3f,%.9g\n",
      r.t, r.x.s, r.x.d, r.x.dpsi, r.x.psidot, r.x.vx, r.x.vy, r.u_cmd.Fyf, r.u_cmd.Fx,
      r.realized.Fyf, r.realized.Fxf, r.realized.Fyr, r.mu_est, r.mu_act, r.slacks[0],
      r.slacks[1], r.slacks[2], r.qp_iters, r.cycle_time_ms, r.j_step);
    out += buf;
  }
  return out;
}

void write_trace_csv(const RunResult & result, const std::string & path)
{
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw std::runtime_error("cannot open trace file for writing: " + path);
  }
  os << trace_to_csv(result);
}

std::string aggregate_to_csv(const std::vector<BatchResult> & batches)
{
  std::string out = "strategy,condition,n,n_safe,J_mean,J_ci_half,P_acc,P_ci_half\n";
  char buf[512];
  for (const BatchResult & b : batches) {
    std::snprintf(
      buf, sizeof(buf), "%s,%s,%d,%d,%.9g,%.9g,%.9g,%.9g\n", strategy_name(b.strategy).c_str(),
      b.condition.c_str(), b.n, b.n_safe, b.J_mean, b.J_ci_half, b.P_acc, b.P_ci_half);
    out += buf;
  }
  return out;
}

void write_aggregate_csv(const std::vector<BatchResult> & batches, const std::string & path)
{
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw std::runtime_error("cannot open aggregate file for writing: " + path);
  }
  os << aggregate_to_csv(batches);
}

std::vector<StepRecord> read_trace_csv(const std::string & path)
{
  std::ifstream is(path);
  if (!is) {
    throw std::runtime_error("cannot open trace file: " + path);
  }
  std::string header;
  if (!std::getline(is, header) || header != kTraceHeader) {
    throw std::runtime_error("trace schema mismatch in " + path);
  }
  std::vector<StepRecord> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    StepRecord r;
    const int got = std::sscanf(
      line.c_str(),
      "%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%d,%lf,%lf",
      &r.t, &r.x.s, &r.x.d, &r.x.dpsi, &r.x.psidot, &r.x.vx, &r.x.vy, &r.u_cmd.Fyf, &r.u_cmd.Fx,
      &r.realized.Fyf, &r.realized.Fxf, &r.realized.Fyr, &r.mu_est, &r.mu_act, &r.slacks[0],
      &r.slacks[1], &r.slacks[2], &r.qp_iters, &r.cycle_time_ms, &r.j_step);
    if (got != 20) {
      throw std::runtime_error("malformed trace row in " + path);
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace saarti
