#include "ipursuit/pursuit.hpp"

#include <algorithm>
#include <cmath>

namespace ipursuit {

void StopRule::validate() const {
  if (!(confidence_threshold > 0.5 && confidence_threshold <= 1.0)) {
    throw ValidationError("confidence threshold must lie in (0.5, 1], got " +
                          std::to_string(confidence_threshold));
  }
  if (max_queries < 1) throw ValidationError("max_queries must be >= 1");
}

StopDecision stop_check(double posterior, std::size_t k, const StopRule& rule,
                        std::size_t unasked_remaining) {
  const double confidence = std::max(posterior, 1.0 - posterior);
  if (confidence >= rule.confidence_threshold) return StopDecision::kConfidence;
  if (k >= rule.max_queries) return StopDecision::kBudget;
  if (unasked_remaining == 0) return StopDecision::kExhausted;
  return StopDecision::kContinue;
}

namespace {

/// Shared pursuit loop. `stop` is consulted after each incorporated answer and
/// returns kContinue to keep going.
template <typename StopFn>
PursuitTrace pursue_loop(const PursuitModel& model, AnswerProvider& provider,
                         std::size_t report_index, const std::string& report_id,
                         const QueryBank* bank, StopFn stop) {
  if (provider.n_queries() != model.n_queries) {
    throw ValidationError("answer provider has " + std::to_string(provider.n_queries()) +
                          " queries, model expects " + std::to_string(model.n_queries));
  }
  const std::size_t n_queries = model.n_queries;

  PursuitTrace trace;
  trace.task_name = model.task_name;
  trace.report_id = report_id;

  History history;
  HistoryEncoding enc = encode_history(history, n_queries);
  trace.final_posterior = model.posterior(enc);

  for (;;) {
    const std::size_t unasked = n_queries - history.size();
    const StopDecision decision = stop(trace.final_posterior, history.size(), unasked);
    if (decision != StopDecision::kContinue) {
      switch (decision) {
        case StopDecision::kConfidence:
          trace.stop_reason = StopReason::kConfidence;
          break;
        case StopDecision::kBudget:
          trace.stop_reason = StopReason::kBudget;
          break;
        default:
          trace.stop_reason = StopReason::kExhausted;
          break;
      }
      break;
    }

    const std::vector<float> logits = mlp_forward<float>(model.querier, enc.concat());
    const Selection<float> sel =
        straight_through_select<float>(logits, enc.mask, 1.0f, SelectMode::kEval);

    Answer answer = kAnswerUnknown;
    try {
      answer = provider.answer(report_index, sel.index);
    } catch (const std::exception& e) {
      trace.incomplete = true;
      trace.error = e.what();
      trace.stop_reason = StopReason::kExhausted;
      break;
    }

    history.push(static_cast<std::uint32_t>(sel.index), answer);
    enc.mask[sel.index] = 1.0f;
    enc.answers[sel.index] = static_cast<float>(answer);
    trace.final_posterior = model.posterior(enc);

    TraceStep step;
    step.step = trace.steps.size() + 1;
    step.query_id = static_cast<std::uint32_t>(sel.index);
    if (bank && sel.index < bank->size()) step.query_text = bank->queries[sel.index].text;
    step.answer = answer;
    step.posterior = trace.final_posterior;
    trace.steps.push_back(std::move(step));
  }

  trace.prediction = trace.final_posterior >= 0.5 ? 1 : 0;
  return trace;
}

}  // namespace

PursuitTrace pursue(const PursuitModel& model, AnswerProvider& provider, std::size_t report_index,
                    const std::string& report_id, const StopRule& rule, const QueryBank* bank) {
  rule.validate();
  return pursue_loop(model, provider, report_index, report_id, bank,
                     [&](double posterior, std::size_t k, std::size_t unasked) {
                       if (k == 0 && unasked > 0) return StopDecision::kContinue;  // ask first
                       return stop_check(posterior, k, rule, unasked);
                     });
}

double posterior_after_budget(const PursuitModel& model, AnswerProvider& provider,
                              std::size_t report_index, std::size_t budget) {
  const std::size_t capped = std::min(budget, model.n_queries);
  const PursuitTrace trace =
      pursue_loop(model, provider, report_index, "", nullptr,
                  [&](double, std::size_t k, std::size_t) {
                    return k >= capped ? StopDecision::kBudget : StopDecision::kContinue;
                  });
  if (trace.incomplete) throw RuntimeFailure("answer provider failed: " + trace.error);
  return trace.final_posterior;
}

std::vector<QueriesNeededPoint> queries_needed_curve(const PursuitModel& model,
                                                     AnswerProvider& provider,
                                                     const std::vector<std::size_t>& reports,
                                                     const std::vector<double>& thresholds) {
  if (reports.empty()) throw ValidationError("queries_needed_curve: no reports");
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (thresholds[i] < 0.5 || thresholds[i] > 1.0) {
      throw ValidationError("thresholds must lie in [0.5, 1]");
    }
    if (i > 0 && thresholds[i] < thresholds[i - 1]) {
      throw ValidationError("thresholds must be ascending");
    }
  }

  std::vector<QueriesNeededPoint> curve;
  curve.reserve(thresholds.size());
  for (double threshold : thresholds) {
    StopRule rule;
    // Unlimited budget, capped by exhaustion at |Q|.
    rule.confidence_threshold = std::max(threshold, std::nextafter(0.5, 1.0));
    rule.max_queries = std::max<std::size_t>(model.n_queries, 1);
    double mean = 0.0, m2 = 0.0;
    std::size_t count = 0;
    for (std::size_t report : reports) {
      const PursuitTrace trace = pursue(model, provider, report, "", rule);
      if (trace.incomplete) throw RuntimeFailure("answer provider failed: " + trace.error);
      const double steps = static_cast<double>(trace.steps.size());
      ++count;
      const double delta = steps - mean;
      mean += delta / static_cast<double>(count);
      m2 += delta * (steps - mean);
    }
    QueriesNeededPoint point;
    point.threshold = threshold;
    point.mean_steps = mean;
    point.var_steps = count > 0 ? m2 / static_cast<double>(count) : 0.0;
    curve.push_back(point);
  }
  return curve;
}

}  // namespace ipursuit
