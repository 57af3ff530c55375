#pragma once

#include "saarti/simulation.hpp"

#include <string>

namespace saarti {

/// Column header of the per-run trace CSV.
extern const char * const kTraceHeader;

/// Serialize a run trace (one row per control cycle, fixed formatting so that
/// identical runs produce identical bytes).
std::string trace_to_csv(const RunResult & result);

void write_trace_csv(const RunResult & result, const std::string & path);

/// Serialize Monte Carlo aggregates (one row per batch).
std::string aggregate_to_csv(const std::vector<BatchResult> & batches);

void write_aggregate_csv(const std::vector<BatchResult> & batches, const std::string & path);

/// Parse a trace CSV back into records (for the compare command).
std::vector<StepRecord> read_trace_csv(const std::string & path);

}  // namespace saarti
