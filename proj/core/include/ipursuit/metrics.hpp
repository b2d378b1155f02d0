#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ipursuit/pursuit.hpp"

namespace ipursuit {

/// Average precision: scores sorted descending (stable on the original index),
/// precision/recall evaluated at distinct-score boundaries, and the step sum
/// taken where recall increases. Constant scores therefore yield the positive
/// prevalence. Requires at least one positive label.
double average_precision(std::span<const double> scores, std::span<const int> labels);

struct F1Result {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Confusion-matrix precision/recall/F1; F1 defined as 0 when P + R = 0.
F1Result f1_score(std::span<const int> predictions, std::span<const int> labels);

struct EvalReport {
  std::string task_name;
  double ap = 0.0;
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  std::vector<std::pair<std::size_t, double>> ap_curve;  // (budget, ap)
};

/// For each budget, scores are posteriors after exactly that many queries
/// (confidence ignored); headline AP/F1 come from the full stop rule.
EvalReport evaluate_model(const PursuitModel& model, AnswerProvider& provider,
                          const std::vector<std::size_t>& report_indices,
                          const std::vector<int>& labels, const std::vector<std::size_t>& budgets,
                          const StopRule& rule);

std::string eval_report_to_json(const EvalReport& report);
void write_eval_report(const EvalReport& report, const std::string& path);
void write_ap_curve_csv(const EvalReport& report, const std::string& path);

}  // namespace ipursuit
