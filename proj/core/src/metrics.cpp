#include "ipursuit/metrics.hpp"

#include <algorithm>
#include <numeric>

#include <nlohmann/json.hpp>

#include "ipursuit/io_util.hpp"

namespace ipursuit {

double average_precision(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw ValidationError("average_precision: scores and labels differ in length");
  }
  std::size_t n_pos = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw ValidationError("average_precision: labels must be binary");
    n_pos += static_cast<std::size_t>(y);
  }
  if (n_pos == 0) throw ValidationError("average_precision: no positive labels");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  // Walk ranks, closing a precision/recall point at each distinct-score
  // boundary; tied scores share one cut, so tie order never matters.
  double ap = 0.0;
  double prev_recall = 0.0;
  std::size_t tp = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    tp += static_cast<std::size_t>(labels[order[rank]]);
    const bool boundary =
        rank + 1 == order.size() || scores[order[rank + 1]] != scores[order[rank]];
    if (!boundary) continue;
    const double recall = static_cast<double>(tp) / static_cast<double>(n_pos);
    if (recall > prev_recall) {
      const double precision = static_cast<double>(tp) / static_cast<double>(rank + 1);
      ap += (recall - prev_recall) * precision;
      prev_recall = recall;
    }
  }
  return ap;
}

F1Result f1_score(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    throw ValidationError("f1_score: predictions and labels differ in length");
  }
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predictions[i] != 0 && predictions[i] != 1) {
      throw ValidationError("f1_score: predictions must be binary");
    }
    if (labels[i] != 0 && labels[i] != 1) {
      throw ValidationError("f1_score: labels must be binary");
    }
    if (predictions[i] == 1 && labels[i] == 1) ++tp;
    if (predictions[i] == 1 && labels[i] == 0) ++fp;
    if (predictions[i] == 0 && labels[i] == 1) ++fn;
  }
  F1Result result;
  result.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  result.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  const double denom = result.precision + result.recall;
  result.f1 = denom > 0.0 ? 2.0 * result.precision * result.recall / denom : 0.0;
  return result;
}

EvalReport evaluate_model(const PursuitModel& model, AnswerProvider& provider,
                          const std::vector<std::size_t>& report_indices,
                          const std::vector<int>& labels, const std::vector<std::size_t>& budgets,
                          const StopRule& rule) {
  if (report_indices.empty()) throw ValidationError("evaluate_model: empty split");
  if (report_indices.size() != labels.size()) {
    throw ValidationError("evaluate_model: labels do not align with report indices");
  }
  rule.validate();

  EvalReport report;
  report.task_name = model.task_name;
  for (int y : labels) (y ? report.n_pos : report.n_neg)++;
  if (report.n_pos == 0) throw ValidationError("evaluate_model: split has no positives");

  for (std::size_t budget : budgets) {
    std::vector<double> scores;
    scores.reserve(report_indices.size());
    for (std::size_t idx : report_indices) {
      scores.push_back(posterior_after_budget(model, provider, idx, budget));
    }
    report.ap_curve.emplace_back(budget, average_precision(scores, labels));
  }

  std::vector<double> stop_scores;
  std::vector<int> stop_predictions;
  stop_scores.reserve(report_indices.size());
  for (std::size_t idx : report_indices) {
    const PursuitTrace trace = pursue(model, provider, idx, "", rule);
    if (trace.incomplete) throw RuntimeFailure("answer provider failed: " + trace.error);
    stop_scores.push_back(trace.final_posterior);
    stop_predictions.push_back(trace.prediction);
  }
  report.ap = average_precision(stop_scores, labels);
  const F1Result f1 = f1_score(stop_predictions, labels);
  report.precision = f1.precision;
  report.recall = f1.recall;
  report.f1 = f1.f1;
  return report;
}

std::string eval_report_to_json(const EvalReport& report) {
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& [budget, ap] : report.ap_curve) {
    curve.push_back({{"budget", budget}, {"ap", ap}});
  }
  const nlohmann::json obj = {{"task", report.task_name},
                              {"ap", report.ap},
                              {"f1", report.f1},
                              {"precision", report.precision},
                              {"recall", report.recall},
                              {"n_pos", report.n_pos},
                              {"n_neg", report.n_neg},
                              {"ap_curve", curve}};
  return obj.dump(2);
}

void write_eval_report(const EvalReport& report, const std::string& path) {
  atomic_write(path, [&](std::ostream& out) { out << eval_report_to_json(report) << '\n'; });
}

void write_ap_curve_csv(const EvalReport& report, const std::string& path) {
  atomic_write(path, [&](std::ostream& out) {
    out << "budget,ap\n";
    for (const auto& [budget, ap] : report.ap_curve) out << budget << ',' << ap << '\n';
  });
}

}  // namespace ipursuit
