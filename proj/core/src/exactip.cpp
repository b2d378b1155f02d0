#include "ipursuit/exactip.hpp"

#include <cmath>
#include <limits>

namespace ipursuit {

namespace {

/// Indices of reports whose answers match every history entry.
std::vector<std::size_t> consistent_rows(const TaskData& data, const History& history) {
  std::vector<std::size_t> rows;
  const AnswerMatrix& m = *data.answers;
  for (std::size_t r = 0; r < m.n_reports(); ++r) {
    bool match = true;
    for (const auto& [q, a] : history.entries()) {
      if (m.at(r, q) != a) {
        match = false;
        break;
      }
    }
    if (match) rows.push_back(r);
  }
  return rows;
}

double mi_from_counts(const std::array<std::array<double, 2>, 3>& counts) {
  double total = 0.0;
  std::array<double, 3> row_sum{};
  std::array<double, 2> col_sum{};
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t y = 0; y < 2; ++y) {
      total += counts[a][y];
      row_sum[a] += counts[a][y];
      col_sum[y] += counts[a][y];
    }
  }
  if (total <= 0.0) return 0.0;
  double mi = 0.0;
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t y = 0; y < 2; ++y) {
      const double p = counts[a][y] / total;
      if (p <= 0.0) continue;  // 0 * log 0 = 0
      const double pa = row_sum[a] / total;
      const double py = col_sum[y] / total;
      mi += p * std::log(p / (pa * py));
    }
  }
  return mi;
}

}  // namespace

TaskData::TaskData(const AnswerMatrix& matrix, std::vector<std::uint8_t> task_labels)
    : answers(&matrix), labels(std::move(task_labels)) {
  if (labels.size() != matrix.n_reports()) {
    throw ValidationError("task labels (" + std::to_string(labels.size()) +
                          ") do not match answer matrix rows (" +
                          std::to_string(matrix.n_reports()) + ")");
  }
  for (std::uint8_t y : labels) {
    if (y > 1) throw ValidationError("task labels must be binary");
  }
}

NaiveBayesModel NaiveBayesModel::from_spec(const SyntheticSpec& spec) {
  spec.validate();
  return NaiveBayesModel{spec.prior, spec.cond_tables};
}

double conditional_mutual_information(const TaskData& data, std::size_t query,
                                      const History& history, double alpha) {
  if (query >= data.answers->n_queries()) {
    throw ValidationError("unknown query_id " + std::to_string(query));
  }
  if (alpha < 0.0) throw ValidationError("smoothing alpha must be >= 0");

  std::array<std::array<double, 2>, 3> counts{};
  for (auto& row : counts) row.fill(alpha);
  for (std::size_t r : consistent_rows(data, history)) {
    const std::size_t a = static_cast<std::size_t>(data.answers->at(r, query) + 1);
    counts[a][data.labels[r]] += 1.0;
  }
  return mi_from_counts(counts);
}

std::pair<std::size_t, double> ip_select_next(const TaskData& data, const History& history,
                                              const std::vector<bool>& asked, double alpha) {
  const std::size_t n_queries = data.answers->n_queries();
  if (!asked.empty() && asked.size() != n_queries) {
    throw ValidationError("asked mask size does not match query count");
  }
  std::size_t best_query = n_queries;
  double best_mi = -std::numeric_limits<double>::infinity();
  for (std::size_t q = 0; q < n_queries; ++q) {
    if (!asked.empty() && asked[q]) continue;
    const double mi = conditional_mutual_information(data, q, history, alpha);
    if (mi > best_mi) {  // strict: ties keep the lowest query id
      best_mi = mi;
      best_query = q;
    }
  }
  if (best_query == n_queries) throw ValidationError("ip_select_next: all queries asked");
  return {best_query, best_mi};
}

double smoothed_posterior(const TaskData& data, const History& history, double alpha) {
  double n0 = alpha, n1 = alpha;
  for (std::size_t r : consistent_rows(data, history)) {
    (data.labels[r] ? n1 : n0) += 1.0;
  }
  if (n0 + n1 <= 0.0) return 0.5;  // alpha = 0 and no consistent samples
  return n1 / (n0 + n1);
}

PursuitTrace ip_run(const TaskData& data, std::span<const Answer> x_obs,
                    const ExactIpOptions& options) {
  const std::size_t n_queries = data.answers->n_queries();
  if (x_obs.size() != n_queries) {
    throw ValidationError("observed answer row has " + std::to_string(x_obs.size()) +
                          " entries, expected " + std::to_string(n_queries));
  }

  PursuitTrace trace;
  trace.task_name = options.task_name;
  trace.report_id = options.report_id;

  History history;
  std::vector<bool> asked(n_queries, false);
  std::size_t n_asked = 0;
  trace.final_posterior = smoothed_posterior(data, history, options.alpha);
  trace.stop_reason = StopReason::kBudget;

  while (trace.steps.size() < options.max_steps) {
    if (n_asked == n_queries) {
      trace.stop_reason = StopReason::kExhausted;
      break;
    }
    const auto [query, mi] = ip_select_next(data, history, asked, options.alpha);
    if (mi <= options.epsilon_stop) {
      trace.stop_reason = StopReason::kExhausted;  // no more informative queries
      break;
    }
    const Answer answer = x_obs[query];
    history.push(static_cast<std::uint32_t>(query), answer);
    asked[query] = true;
    ++n_asked;

    TraceStep step;
    step.step = trace.steps.size() + 1;
    step.query_id = static_cast<std::uint32_t>(query);
    step.answer = answer;
    step.posterior = smoothed_posterior(data, history, options.alpha);
    trace.final_posterior = step.posterior;
    trace.steps.push_back(std::move(step));
  }
  trace.prediction = trace.final_posterior >= 0.5 ? 1 : 0;
  return trace;
}

double bayes_posterior_naive(const NaiveBayesModel& model, const History& history) {
  // Log-space Bayes rule under per-query conditional independence.
  double log1 = std::log(model.prior);
  double log0 = std::log1p(-model.prior);
  if (model.prior <= 0.0) return 0.0;
  if (model.prior >= 1.0) return 1.0;
  for (const auto& [q, a] : history.entries()) {
    if (q >= model.cond_tables.size()) {
      throw ValidationError("unknown query_id " + std::to_string(q));
    }
    const std::size_t idx = static_cast<std::size_t>(a + 1);
    const double p1 = model.cond_tables[q][1][idx];
    const double p0 = model.cond_tables[q][0][idx];
    if (p1 <= 0.0 && p0 <= 0.0) continue;  // impossible evidence under both classes
    log1 += std::log(std::max(p1, 0.0));
    log0 += std::log(std::max(p0, 0.0));
  }
  if (!std::isfinite(log1) && !std::isfinite(log0)) return 0.5;
  const double m = std::max(log1, log0);
  const double w1 = std::exp(log1 - m);
  const double w0 = std::exp(log0 - m);
  return w1 / (w0 + w1);
}

}  // namespace ipursuit
