#include "ipursuit/trace.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "ipursuit/io_util.hpp"

namespace ipursuit {

const char* stop_reason_name(StopReason reason) {
  switch (reason) {
    case StopReason::kConfidence:
      return "confidence";
    case StopReason::kBudget:
      return "budget";
    case StopReason::kExhausted:
      return "exhausted";
  }
  return "?";
}

StopReason stop_reason_from_name(const std::string& name) {
  if (name == "confidence") return StopReason::kConfidence;
  if (name == "budget") return StopReason::kBudget;
  if (name == "exhausted") return StopReason::kExhausted;
  throw ValidationError("unknown stop reason '" + name + "'");
}

void append_trace_jsonl(std::ostream& out, const PursuitTrace& trace) {
  for (const TraceStep& step : trace.steps) {
    nlohmann::json line = {{"task", trace.task_name},     {"report_id", trace.report_id},
                           {"step", step.step},           {"query_id", step.query_id},
                           {"query_text", step.query_text}, {"answer", static_cast<int>(step.answer)},
                           {"posterior", step.posterior}};
    out << line.dump() << '\n';
  }
  nlohmann::json final_line = {{"report_id", trace.report_id},
                               {"stop_reason", stop_reason_name(trace.stop_reason)},
                               {"prediction", trace.prediction},
                               {"n_steps", trace.steps.size()}};
  final_line["task"] = trace.task_name;
  final_line["final_posterior"] = trace.final_posterior;
  if (trace.incomplete) {
    final_line["incomplete"] = true;
    final_line["error"] = trace.error;
  }
  out << final_line.dump() << '\n';
}

void write_traces_jsonl(const std::vector<PursuitTrace>& traces, const std::string& path) {
  atomic_write(path, [&](std::ostream& out) {
    for (const PursuitTrace& trace : traces) append_trace_jsonl(out, trace);
  });
}

std::vector<PursuitTrace> load_traces_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  std::vector<PursuitTrace> traces;
  PursuitTrace current;
  bool in_progress = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (obj.contains("stop_reason")) {
      current.report_id = obj.at("report_id").get<std::string>();
      current.task_name = obj.value("task", current.task_name);
      current.stop_reason = stop_reason_from_name(obj.at("stop_reason").get<std::string>());
      current.prediction = obj.at("prediction").get<int>();
      current.final_posterior = obj.value("final_posterior", 0.5);
      current.incomplete = obj.value("incomplete", false);
      current.error = obj.value("error", std::string{});
      if (obj.at("n_steps").get<std::size_t>() != current.steps.size()) {
        throw ValidationError(path + ":" + std::to_string(line_no) +
                              ": n_steps does not match recorded steps");
      }
      traces.push_back(std::move(current));
      current = PursuitTrace{};
      in_progress = false;
      continue;
    }
    TraceStep step;
    step.step = obj.at("step").get<std::size_t>();
    step.query_id = obj.at("query_id").get<std::uint32_t>();
    step.query_text = obj.at("query_text").get<std::string>();
    const int answer = obj.at("answer").get<int>();
    if (!is_valid_answer(answer)) {
      throw ValidationError(path + ":" + std::to_string(line_no) + ": answer outside alphabet");
    }
    step.answer = static_cast<Answer>(answer);
    step.posterior = obj.at("posterior").get<double>();
    current.task_name = obj.at("task").get<std::string>();
    current.report_id = obj.at("report_id").get<std::string>();
    current.steps.push_back(std::move(step));
    in_progress = true;
  }
  if (in_progress) throw ValidationError(path + ": trace without terminating summary line");
  return traces;
}

}  // namespace ipursuit
