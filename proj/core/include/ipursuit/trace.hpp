#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "ipursuit/common.hpp"

namespace ipursuit {

struct TraceStep {
  std::size_t step = 0;  // 1-based
  std::uint32_t query_id = 0;
  std::string query_text;
  Answer answer = kAnswerUnknown;
  double posterior = 0.5;  // P(Y = 1 | history up to and including this step)

  bool operator==(const TraceStep&) const = default;
};

enum class StopReason { kConfidence, kBudget, kExhausted };

const char* stop_reason_name(StopReason reason);
StopReason stop_reason_from_name(const std::string& name);

/// Ordered explanation chain for one report: every asked query with its answer
/// and the evolving posterior, ending in a stop reason and a prediction.
struct PursuitTrace {
  std::string task_name;
  std::string report_id;
  std::vector<TraceStep> steps;
  StopReason stop_reason = StopReason::kExhausted;
  int prediction = 0;             // 1 iff final_posterior >= 0.5
  double final_posterior = 0.5;   // prior posterior when no steps were taken
  bool incomplete = false;        // answer provider failed mid-pursuit
  std::string error;

  bool operator==(const PursuitTrace&) const = default;
};

/// JSON lines: one object per step, then a terminating summary line per report.
void append_trace_jsonl(std::ostream& out, const PursuitTrace& trace);
void write_traces_jsonl(const std::vector<PursuitTrace>& traces, const std::string& path);
std::vector<PursuitTrace> load_traces_jsonl(const std::string& path);

}  // namespace ipursuit
