#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ipursuit/answers.hpp"
#include "ipursuit/corpus.hpp"
#include "ipursuit/history.hpp"
#include "ipursuit/trace.hpp"

namespace ipursuit {

/// One binary task over an answer matrix: the explicit tabular joint that the
/// brute-force pursuit conditions on. Deliberately a small-|Q| oracle; the
/// conditioning filter is exponential in history length.
struct TaskData {
  const AnswerMatrix* answers = nullptr;
  std::vector<std::uint8_t> labels;  // one per report

  TaskData(const AnswerMatrix& matrix, std::vector<std::uint8_t> task_labels);
};

/// Closed-form class-conditional model matching SyntheticSpec; the exact
/// posterior oracle for generated corpora.
struct NaiveBayesModel {
  double prior = 0.5;
  std::vector<std::array<std::array<double, 3>, 2>> cond_tables;

  static NaiveBayesModel from_spec(const SyntheticSpec& spec);
};

/// I(q(X); Y | history) in nats, estimated from the samples consistent with
/// the history with additive smoothing `alpha` per (answer x label) cell.
double conditional_mutual_information(const TaskData& data, std::size_t query,
                                      const History& history, double alpha);

/// The unasked query maximizing conditional mutual information, ties broken by
/// the lowest query id. `asked` flags queries to skip (usually the history).
std::pair<std::size_t, double> ip_select_next(const TaskData& data, const History& history,
                                              const std::vector<bool>& asked, double alpha);

/// Smoothed posterior P(Y=1 | history) from the conditioned sample counts.
double smoothed_posterior(const TaskData& data, const History& history, double alpha);

struct ExactIpOptions {
  double alpha = 0.5;
  double epsilon_stop = 1e-3;  // best MI at or below this ends the pursuit
  std::size_t max_steps = 200;
  std::string task_name = "task";
  std::string report_id;
};

/// Greedy pursuit on the tabular joint: repeatedly select the most informative
/// query, read its answer from x_obs, and record the smoothed posterior.
PursuitTrace ip_run(const TaskData& data, std::span<const Answer> x_obs,
                    const ExactIpOptions& options);

/// Exact Bayes posterior P(Y=1 | history) under conditional independence.
double bayes_posterior_naive(const NaiveBayesModel& model, const History& history);

}  // namespace ipursuit
