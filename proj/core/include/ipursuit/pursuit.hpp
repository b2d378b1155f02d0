#pragma once

#include <string>
#include <vector>

#include "ipursuit/answers.hpp"
#include "ipursuit/querybank.hpp"
#include "ipursuit/trace.hpp"
#include "ipursuit/vip.hpp"

namespace ipursuit {

struct StopRule {
  double confidence_threshold = 0.85;
  std::size_t max_queries = 200;

  void validate() const;
};

enum class StopDecision { kContinue, kConfidence, kBudget, kExhausted };

/// Confidence for a binary task is max(p, 1-p). Checked after each answer is
/// incorporated: confidence first, then budget, then exhaustion.
StopDecision stop_check(double posterior, std::size_t k, const StopRule& rule,
                        std::size_t unasked_remaining);

/// Sequential inference with the trained pair: encode history, let the querier
/// pick the best unasked query, fetch its answer, re-score with the classifier,
/// and stop per the rule. A provider failure yields a partial trace marked
/// incomplete. `bank` (optional) supplies query texts for the trace.
PursuitTrace pursue(const PursuitModel& model, AnswerProvider& provider, std::size_t report_index,
                    const std::string& report_id, const StopRule& rule,
                    const QueryBank* bank = nullptr);

/// Classifier posterior after exactly min(budget, |Q|) querier-chosen answers,
/// ignoring confidence. budget = 0 gives the empty-history posterior.
double posterior_after_budget(const PursuitModel& model, AnswerProvider& provider,
                              std::size_t report_index, std::size_t budget);

struct QueriesNeededPoint {
  double threshold = 0.0;
  double mean_steps = 0.0;
  double var_steps = 0.0;
};

/// For each confidence threshold, pursue every report with unlimited budget
/// (capped at |Q|) and report the mean and variance of steps taken.
std::vector<QueriesNeededPoint> queries_needed_curve(const PursuitModel& model,
                                                     AnswerProvider& provider,
                                                     const std::vector<std::size_t>& reports,
                                                     const std::vector<double>& thresholds);

}  // namespace ipursuit
