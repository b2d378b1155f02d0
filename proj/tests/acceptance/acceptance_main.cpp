// Acceptance suite: one pass/fail line per criterion, non-zero exit on any
// failure. Each criterion carries its own independent oracle.

#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "httplib.h"
#include <nlohmann/json.hpp>

#include "ipursuit/answers.hpp"
#include "ipursuit/corpus.hpp"
#include "ipursuit/exactip.hpp"
#include "ipursuit/metrics.hpp"
#include "ipursuit/pursuit.hpp"
#include "ipursuit/querybank.hpp"
#include "ipursuit/rng.hpp"
#include "ipursuit/trace.hpp"
#include "ipursuit/vip.hpp"
#include "support/test_util.hpp"

using namespace ipursuit;

namespace {

struct CriterionFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool condition, const std::string& message) {
  if (!condition) throw CriterionFailure(message);
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss << std::setprecision(6) << v;
  return ss.str();
}

// ---------------------------------------------------------------------------
// 1. Exact-pursuit selections match an independent exhaustive scan.
// ---------------------------------------------------------------------------

/// Independent exhaustive-scan oracle: the same smoothed-MI definition, coded
/// from scratch (its own row filtering, integer counting, and marginals).
double oracle_mi(const AnswerMatrix& answers, const std::vector<std::uint8_t>& labels,
                 std::size_t query, const History& history, double alpha) {
  // Filter consistent rows first, then count integer occurrences.
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < answers.n_reports(); ++r) {
    bool match = true;
    for (const auto& [q, a] : history.entries()) {
      if (answers.at(r, q) != a) {
        match = false;
        break;
      }
    }
    if (match) rows.push_back(r);
  }
  std::map<std::pair<int, int>, long> raw;
  for (std::size_t r : rows) raw[{answers.at(r, query), labels[r]}] += 1;

  double joint[3][2];
  for (int a = -1; a <= 1; ++a) {
    for (int y = 0; y <= 1; ++y) {
      const auto it = raw.find({a, y});
      joint[a + 1][y] = alpha + (it == raw.end() ? 0.0 : static_cast<double>(it->second));
    }
  }
  double total = 0.0;
  double marg_a[3] = {0.0, 0.0, 0.0};
  double marg_y[2] = {0.0, 0.0};
  for (int a = 0; a < 3; ++a) {
    for (int y = 0; y < 2; ++y) {
      total += joint[a][y];
      marg_a[a] += joint[a][y];
      marg_y[y] += joint[a][y];
    }
  }
  if (total <= 0.0) return 0.0;
  double mi = 0.0;
  for (int a = 0; a < 3; ++a) {
    for (int y = 0; y < 2; ++y) {
      const double p = joint[a][y] / total;
      if (p <= 0.0) continue;
      mi += p * std::log(p / ((marg_a[a] / total) * (marg_y[y] / total)));
    }
  }
  return mi;
}

void criterion_exact_ip() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 seed_rng(20250401);
  for (int instance = 0; instance < 25; ++instance) {
    const SyntheticSpec spec = make_random_spec(8, 0.5, seed_rng(), 3.0);
    const auto [answers, labels] = synth_generate(spec, 5000);
    const std::vector<std::uint8_t> task = labels.task_column(0);
    const TaskData data(answers, task);
    const double alpha = 0.5;
    const auto x_obs = answers.row(static_cast<std::size_t>(instance) * 7 % 5000);

    History history;
    std::vector<bool> asked(8, false);
    for (std::size_t step = 0; step < 8; ++step) {
      const auto [impl_q, impl_mi] = ip_select_next(data, history, asked, alpha);
      std::size_t best_q = 8;
      double best_mi = -1e300;
      for (std::size_t q = 0; q < 8; ++q) {
        if (asked[q]) continue;
        const double mi = oracle_mi(answers, task, q, history, alpha);
        if (mi > best_mi) {
          best_mi = mi;
          best_q = q;
        }
      }
      require(impl_q == best_q, "instance " + std::to_string(instance) + " step " +
                                    std::to_string(step) + ": selected query " +
                                    std::to_string(impl_q) + ", exhaustive scan says " +
                                    std::to_string(best_q));
      require(std::abs(impl_mi - best_mi) <= 1e-10 * std::max(1.0, std::abs(best_mi)),
              "MI mismatch at step " + std::to_string(step));
      history.push(static_cast<std::uint32_t>(impl_q), x_obs[impl_q]);
      asked[impl_q] = true;
    }
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  require(seconds < 30.0, "runtime " + fmt(seconds) + "s exceeds the 30s budget");
}

// ---------------------------------------------------------------------------
// 2. Gradient fidelity against central finite differences at 64 bits.
// ---------------------------------------------------------------------------

double fd_objective(const MlpParams<double>& params, const std::vector<double>& input,
                    const std::vector<double>& out_grad) {
  const std::vector<double> out = mlp_forward<double>(params, input);
  double acc = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) acc += out_grad[i] * out[i];
  return acc;
}

void criterion_gradients() {
  std::mt19937_64 rng(777);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u64_to_unit(rng()); };

  for (int config = 0; config < 10; ++config) {
    // A 5-weight-layer network with random small widths.
    std::vector<std::size_t> dims{2 + rng() % 4};
    for (int l = 0; l < 4; ++l) dims.push_back(2 + rng() % 5);
    dims.push_back(1 + rng() % 3);
    MlpParams<double> params = MlpParams<double>::he_uniform(dims, rng());
    for (auto& b : params.biases) {
      for (double& v : b) v = uniform(-0.1, 0.1);
    }
    std::vector<double> input(dims.front());
    for (double& v : input) v = uniform(-1.0, 1.0);
    std::vector<double> out_grad(dims.back());
    for (double& v : out_grad) v = uniform(-1.0, 1.0);

    ForwardCache<double> cache;
    mlp_forward<double>(params, input, &cache);
    const MlpGrads<double> grads = mlp_backward<double>(params, cache, out_grad);

    const double h = 1e-4;
    auto check_coord = [&](double* coord, double analytic, const char* what) {
      const double saved = *coord;
      *coord = saved + h;
      const double up = fd_objective(params, input, out_grad);
      *coord = saved - h;
      const double down = fd_objective(params, input, out_grad);
      *coord = saved;
      const double fd = (up - down) / (2.0 * h);
      const double scale = std::max({std::abs(fd), std::abs(analytic), 1e-6});
      require(std::abs(fd - analytic) <= 1e-4 * scale,
              std::string(what) + " gradient off: fd=" + fmt(fd) + " analytic=" + fmt(analytic));
    };
    for (std::size_t l = 0; l < params.n_layers(); ++l) {
      for (std::size_t i = 0; i < params.weights[l].data.size(); ++i) {
        check_coord(&params.weights[l].data[i], grads.weights[l].data[i], "weight");
      }
      for (std::size_t i = 0; i < params.biases[l].size(); ++i) {
        check_coord(&params.biases[l][i], grads.biases[l][i], "bias");
      }
    }

    // Weighted BCE gradient.
    for (int rep = 0; rep < 3; ++rep) {
      const double logit = uniform(-8.0, 8.0);
      const int label = static_cast<int>(rng() % 2);
      const double w = uniform(0.5, 8.0);
      const auto [loss, grad] = weighted_bce<double>(logit, label, w);
      const double hb = 1e-5;
      const double fd = (weighted_bce<double>(logit + hb, label, w).first -
                         weighted_bce<double>(logit - hb, label, w).first) /
                        (2.0 * hb);
      const double scale = std::max({std::abs(fd), std::abs(grad), 1e-6});
      require(std::abs(fd - grad) <= 1e-4 * scale, "bce gradient fd mismatch");
    }

    // Straight-through soft path.
    const std::size_t n = 3 + rng() % 5;
    std::vector<double> logits(n), downstream(n), mask(n, 0.0);
    for (double& v : logits) v = uniform(-2.0, 2.0);
    for (double& v : downstream) v = uniform(-1.0, 1.0);
    if (config % 2 == 0) mask[rng() % n] = 1.0;
    const double temperature = uniform(0.25, 1.5);
    const auto sel = straight_through_select<double>(logits, mask, temperature, SelectMode::kTrain);
    const std::vector<double> analytic =
        straight_through_backward<double>(sel, downstream, temperature);
    auto soft_value = [&](const std::vector<double>& l) {
      const auto s = straight_through_select<double>(l, mask, temperature, SelectMode::kTrain);
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += downstream[i] * s.soft[i];
      return acc;
    };
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> up = logits, down = logits;
      const double hs = 1e-6;
      up[i] += hs;
      down[i] -= hs;
      const double fd = (soft_value(up) - soft_value(down)) / (2.0 * hs);
      const double scale = std::max({std::abs(fd), std::abs(analytic[i]), 1e-6});
      require(std::abs(fd - analytic[i]) <= 1e-4 * scale, "straight-through fd mismatch");
    }
  }
}

// ---------------------------------------------------------------------------
// 3. Trained V-IP approaches the closed-form Bayes ceiling.
// ---------------------------------------------------------------------------

void criterion_bayes_convergence() {
  const auto start = std::chrono::steady_clock::now();
  const SyntheticSpec spec = make_random_spec(20, 0.5, 31, 1.5);
  const auto [answers, labels] = synth_generate(spec, 2800);
  const std::vector<std::uint8_t> task = labels.task_column(0);
  const NaiveBayesModel nb = NaiveBayesModel::from_spec(spec);

  auto full_history = [&](std::size_t r) {
    History h;
    for (std::uint32_t q = 0; q < 20; ++q) h.push(q, answers.at(r, q));
    return h;
  };

  std::vector<double> bayes_scores;
  std::vector<int> test_labels;
  std::size_t bayes_correct = 0;
  for (std::size_t r = 2300; r < 2800; ++r) {
    const double p = bayes_posterior_naive(nb, full_history(r));
    bayes_scores.push_back(p);
    test_labels.push_back(task[r]);
    bayes_correct += (p >= 0.5 ? 1 : 0) == task[r] ? 1 : 0;
  }
  const double bayes_acc = static_cast<double>(bayes_correct) / 500.0;
  const double bayes_ap = average_precision(bayes_scores, test_labels);

  TrainData data;
  data.answers = &answers;
  data.labels = task;
  data.train_indices.resize(2000);
  std::iota(data.train_indices.begin(), data.train_indices.end(), std::size_t{0});
  data.val_indices.resize(300);
  std::iota(data.val_indices.begin(), data.val_indices.end(), std::size_t{2000});

  TrainConfig config;
  config.batch_size = 128;
  config.epochs = 250;
  config.lr = 1e-3;
  config.hidden_width = 128;
  config.seed = 99;
  config.task_name = "bayes-convergence";
  const PursuitModel model = train_vip(data, config);

  std::vector<double> model_scores;
  std::size_t model_correct = 0;
  for (std::size_t r = 2300; r < 2800; ++r) {
    const double p = model.posterior(encode_history(full_history(r), 20));
    model_scores.push_back(p);
    model_correct += (p >= 0.5 ? 1 : 0) == task[r] ? 1 : 0;
  }
  const double model_acc = static_cast<double>(model_correct) / 500.0;
  const double model_ap = average_precision(model_scores, test_labels);

  require(bayes_acc - model_acc <= 0.03, "full-history accuracy " + fmt(model_acc) +
                                             " is more than 3 points below Bayes " +
                                             fmt(bayes_acc));
  require(bayes_ap - model_ap <= 0.02,
          "AP " + fmt(model_ap) + " is more than 0.02 below Bayes AP " + fmt(bayes_ap));
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  require(seconds < 600.0, "runtime " + fmt(seconds) + "s exceeds the 10 minute budget");
  std::cerr << "      bayes_acc=" << fmt(bayes_acc) << " model_acc=" << fmt(model_acc)
            << " bayes_ap=" << fmt(bayes_ap) << " model_ap=" << fmt(model_ap) << " ("
            << fmt(seconds) << "s)\n";
}

// ---------------------------------------------------------------------------
// 4. The querier discovers the informative query immediately.
// ---------------------------------------------------------------------------

void criterion_informative_query() {
  SyntheticSpec spec;
  spec.n_queries = 10;
  spec.prior = 0.5;
  spec.seed = 7117;
  spec.cond_tables.resize(10);
  spec.cond_tables[0][0] = {1.0, 0.0, 0.0};  // query 0 = 2y - 1
  spec.cond_tables[0][1] = {0.0, 0.0, 1.0};
  for (std::size_t q = 1; q < 10; ++q) {
    spec.cond_tables[q][0] = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    spec.cond_tables[q][1] = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  }
  const auto [answers, labels] = synth_generate(spec, 2300);
  const std::vector<std::uint8_t> task = labels.task_column(0);

  TrainData data;
  data.answers = &answers;
  data.labels = task;
  data.train_indices.resize(1500);
  std::iota(data.train_indices.begin(), data.train_indices.end(), std::size_t{0});
  data.val_indices.resize(300);
  std::iota(data.val_indices.begin(), data.val_indices.end(), std::size_t{1500});

  TrainConfig config;
  config.batch_size = 128;
  config.epochs = 120;
  config.lr = 2e-3;
  config.hidden_width = 64;
  config.seed = 11;
  config.task_name = "separable";
  const PursuitModel model = train_vip(data, config);

  MatrixAnswerProvider provider(answers);
  std::size_t first_is_zero = 0, correct = 0, natural_one_step = 0;
  StopRule one_query;
  one_query.max_queries = 1;
  one_query.confidence_threshold = 1.0;  // force exactly one query
  for (std::size_t r = 1800; r < 2300; ++r) {
    const PursuitTrace trace = pursue(model, provider, r, "", one_query);
    first_is_zero += trace.steps.front().query_id == 0 ? 1 : 0;
    correct += trace.prediction == task[r] ? 1 : 0;
    // Under the default rule the revealed label answer should already clear
    // the confidence bar at step one.
    const PursuitTrace natural = pursue(model, provider, r, "", StopRule{});
    natural_one_step += natural.steps.size() == 1 &&
                                natural.stop_reason == StopReason::kConfidence
                            ? 1
                            : 0;
  }
  const double frac_first = static_cast<double>(first_is_zero) / 500.0;
  const double one_query_acc = static_cast<double>(correct) / 500.0;
  const double frac_natural = static_cast<double>(natural_one_step) / 500.0;
  require(frac_first >= 0.99,
          "query 0 selected first on only " + fmt(frac_first) + " of test samples");
  require(one_query_acc >= 0.99, "one-query accuracy " + fmt(one_query_acc) + " below 0.99");
  require(frac_natural >= 0.99,
          "default-rule pursuit stopped confidently at step one on only " + fmt(frac_natural));
  std::cerr << "      first_selection_rate=" << fmt(frac_first)
            << " one_query_acc=" << fmt(one_query_acc)
            << " one_step_confidence_rate=" << fmt(frac_natural) << "\n";
}

// ---------------------------------------------------------------------------
// 5. Stopping-rule semantics across models and thresholds.
// ---------------------------------------------------------------------------

PursuitModel constant_model(std::size_t n_queries, double posterior) {
  PursuitModel model;
  model.n_queries = n_queries;
  model.task_name = "constant";
  model.querier = MlpParams<float>::zeros({2 * n_queries, 4, n_queries});
  model.classifier = MlpParams<float>::zeros({2 * n_queries, 4, 1});
  model.classifier.biases[1][0] = static_cast<float>(std::log(posterior / (1.0 - posterior)));
  return model;
}

PursuitModel noisy_model(std::size_t n_queries, std::uint64_t seed) {
  PursuitModel model;
  model.n_queries = n_queries;
  model.task_name = "noisy";
  model.querier = MlpParams<float>::he_uniform({2 * n_queries, 32, n_queries}, seed);
  model.classifier = MlpParams<float>::he_uniform({2 * n_queries, 32, 1}, seed ^ 0xf00d);
  return model;
}

void criterion_stopping_rules() {
  std::vector<PursuitModel> models;
  models.push_back(constant_model(20, 0.99));
  models.push_back(constant_model(20, 0.5));
  models.push_back(noisy_model(20, 404));
  models.push_back(noisy_model(250, 405));  // larger than the 200-query budget

  for (const PursuitModel& model : models) {
    const SyntheticSpec spec = make_random_spec(model.n_queries, 0.5, 606 + model.n_queries, 2.0);
    const auto [answers, labels] = synth_generate(spec, 60);
    MatrixAnswerProvider provider(answers);

    for (std::size_t r = 0; r < answers.n_reports(); ++r) {
      const PursuitTrace trace = pursue(model, provider, r, "", StopRule{});
      require(trace.steps.size() <= 200, "trace exceeded 200 steps at default settings");
      if (trace.stop_reason == StopReason::kConfidence) {
        require(std::max(trace.final_posterior, 1.0 - trace.final_posterior) >= 0.85,
                "confidence stop below the 0.85 threshold");
      }
      if (model.n_queries > 200 && trace.stop_reason == StopReason::kBudget) {
        require(trace.steps.size() == 200, "budget stop should use the full 200 queries");
      }
      std::vector<bool> seen(model.n_queries, false);
      for (const TraceStep& step : trace.steps) {
        require(!seen[step.query_id], "query asked twice");
        seen[step.query_id] = true;
      }
    }

    // Per-sample monotonicity of steps-to-stop in the confidence threshold.
    const std::vector<double> thresholds{0.55, 0.7, 0.85, 0.95, 0.999};
    for (std::size_t r = 0; r < 25; ++r) {
      std::size_t prev = 0;
      for (double t : thresholds) {
        StopRule rule;
        rule.confidence_threshold = t;
        rule.max_queries = 200;
        const std::size_t steps = pursue(model, provider, r, "", rule).steps.size();
        require(steps >= prev, "steps-to-stop decreased as the threshold rose");
        prev = steps;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// 6. Metric oracles.
// ---------------------------------------------------------------------------

double ap_threshold_sweep(const std::vector<double>& scores, const std::vector<int>& labels) {
  std::vector<double> thresholds(scores);
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  const double n_pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  double ap = 0.0, prev_recall = 0.0;
  for (double t : thresholds) {
    double tp = 0.0, fp = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= t) (labels[i] == 1 ? tp : fp) += 1.0;
    }
    const double recall = tp / n_pos;
    if (recall > prev_recall) {
      ap += (recall - prev_recall) * (tp / (tp + fp));
      prev_recall = recall;
    }
  }
  return ap;
}

void criterion_metric_oracles() {
  const std::vector<double> worked_scores{0.9, 0.8, 0.7, 0.6};
  const std::vector<int> worked_labels{1, 0, 1, 0};
  const double worked = average_precision(worked_scores, worked_labels);
  require(std::abs(worked - 5.0 / 6.0) < 1e-12,
          "worked AP example gave " + fmt(worked) + ", expected 5/6");

  const F1Result f1 = f1_score(std::vector<int>{1, 1, 0}, std::vector<int>{1, 0, 1});
  require(std::abs(f1.f1 - 0.5) < 1e-12, "worked F1 example gave " + fmt(f1.f1));
  require(std::abs(f1.precision - 0.5) < 1e-12 && std::abs(f1.recall - 0.5) < 1e-12,
          "worked precision/recall mismatch");

  std::mt19937_64 rng(606060);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng() % 49;
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = static_cast<double>(rng() % 10) / 9.0;  // deliberate ties
      labels[i] = static_cast<int>(rng() % 2);
      any |= labels[i] == 1;
    }
    if (!any) labels[rng() % n] = 1;
    const double expected = ap_threshold_sweep(scores, labels);
    const double actual = average_precision(scores, labels);
    require(std::abs(actual - expected) <= 1e-12,
            "AP " + fmt(actual) + " vs brute force " + fmt(expected) + " at trial " +
                std::to_string(trial));
  }
}

// ---------------------------------------------------------------------------
// 7. Query-bank construction with planted duplicates.
// ---------------------------------------------------------------------------

void criterion_query_bank() {
  const std::size_t dim = 128, n_clusters = 120, n_dups = 12, per_cluster = 5;
  std::mt19937_64 rng(99887);
  std::normal_distribution<double> gauss(0.0, 1.0), noise(0.0, 0.002);

  auto random_unit = [&] {
    std::vector<double> v(dim);
    double norm = 0.0;
    for (double& x : v) {
      x = gauss(rng);
      norm += x * x;
    }
    norm = std::sqrt(norm);
    std::vector<float> out(dim);
    for (std::size_t d = 0; d < dim; ++d) out[d] = static_cast<float>(v[d] / norm);
    return out;
  };

  std::vector<std::vector<float>> centers;
  for (std::size_t c = 0; c < n_clusters - n_dups; ++c) centers.push_back(random_unit());
  const double cos_t = 0.99, sin_t = std::sqrt(1.0 - cos_t * cos_t);
  for (std::size_t p = 0; p < n_dups; ++p) {
    const auto& u = centers[p];
    std::vector<float> w = random_unit();
    double dot = 0.0;
    for (std::size_t d = 0; d < dim; ++d) dot += static_cast<double>(u[d]) * w[d];
    double norm = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      w[d] = static_cast<float>(w[d] - dot * u[d]);
      norm += static_cast<double>(w[d]) * w[d];
    }
    norm = std::sqrt(norm);
    std::vector<float> v(dim);
    for (std::size_t d = 0; d < dim; ++d) {
      v[d] = static_cast<float>(cos_t * u[d] + sin_t * w[d] / norm);
    }
    centers.push_back(v);
  }

  std::vector<float> flat;
  for (const auto& center : centers) {
    for (std::size_t i = 0; i < per_cluster; ++i) {
      for (std::size_t d = 0; d < dim; ++d) {
        flat.push_back(center[d] + static_cast<float>(noise(rng)));
      }
    }
  }
  const EmbeddingTable table(n_clusters * per_cluster, dim, std::move(flat));

  const QueryBank bank = build_query_bank(table, {}, n_clusters, 0.97, 31415, 60);
  require(bank.size() == n_clusters - n_dups,
          "bank size " + std::to_string(bank.size()) + ", expected " +
              std::to_string(n_clusters - n_dups));
  for (std::size_t i = 0; i < bank.size(); ++i) {
    for (std::size_t j = i + 1; j < bank.size(); ++j) {
      require(cosine_similarity(table.row(bank.queries[i].source_fact_index),
                                table.row(bank.queries[j].source_fact_index)) <= 0.97,
              "retained pair above the dedup threshold");
    }
  }

  const ClusteringResult clusters = kmeans_cluster(table, n_clusters, 31415, 60);
  for (std::size_t i = 1; i < clusters.inertia_history.size(); ++i) {
    require(clusters.inertia_history[i] <= clusters.inertia_history[i - 1] + 1e-9,
            "inertia increased between Lloyd iterations");
  }

  const QueryBank again = build_query_bank(table, {}, n_clusters, 0.97, 31415, 60);
  require(again == bank, "repeated build with the same seed differs");
}

// ---------------------------------------------------------------------------
// 8. Reproducibility and external formats.
// ---------------------------------------------------------------------------

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion_reproducibility() {
  test_util::TempDir dir;

  auto run_once = [&](const std::string& tag) {
    const SyntheticSpec spec = make_random_spec(8, 0.5, 2222, 2.0);
    const auto [answers, labels] = synth_generate(spec, 400);
    const std::vector<std::uint8_t> task = labels.task_column(0);

    TrainData data;
    data.answers = &answers;
    data.labels = task;
    data.train_indices.resize(300);
    std::iota(data.train_indices.begin(), data.train_indices.end(), std::size_t{0});
    data.val_indices.resize(100);
    std::iota(data.val_indices.begin(), data.val_indices.end(), std::size_t{300});

    TrainConfig config;
    config.batch_size = 64;
    config.epochs = 12;
    config.lr = 1e-3;
    config.hidden_width = 16;
    config.seed = 5150;
    const PursuitModel model = train_vip(data, config);
    const std::string model_path = dir.file("model_" + tag + ".ipck");
    save_model(model, model_path);

    MatrixAnswerProvider provider(answers);
    std::vector<PursuitTrace> traces;
    for (std::size_t r = 0; r < 10; ++r) {
      traces.push_back(pursue(model, provider, r, "row-" + std::to_string(r), StopRule{}));
    }
    const std::string trace_path = dir.file("traces_" + tag + ".jsonl");
    write_traces_jsonl(traces, trace_path);

    const std::string answers_path = dir.file("answers_" + tag + ".ipam");
    write_answer_matrix(answers, answers_path, TableFormat::kBinary);
    return std::tuple{model_path, trace_path, answers_path};
  };

  const auto [m1, t1, a1] = run_once("one");
  const auto [m2, t2, a2] = run_once("two");
  require(file_bytes(m1) == file_bytes(m2), "checkpoints differ between identical seeded runs");
  require(file_bytes(t1) == file_bytes(t2), "traces differ between identical seeded runs");
  require(file_bytes(a1) == file_bytes(a2), "generated data differs between identical runs");

  // Binary format round-trips.
  const SyntheticSpec spec = make_random_spec(5, 0.4, 99, 2.0);
  const auto [answers, labels] = synth_generate(spec, 64);
  for (TableFormat format : {TableFormat::kBinary, TableFormat::kCsv}) {
    const std::string path = dir.file("m");
    write_answer_matrix(answers, path, format);
    require(load_answer_matrix(path, format) == answers, "answer matrix round-trip failed");
    write_labels(labels, path, format);
    require(load_labels(path, format) == labels, "label round-trip failed");
  }
  std::vector<float> vecs;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 6 * 16; ++i) vecs.push_back(static_cast<float>(u64_to_unit(rng()) - 0.5));
  const EmbeddingTable table(6, 16, vecs);
  write_embeddings(table, dir.file("e.ipem"));
  require(load_embeddings(dir.file("e.ipem")) == table, "embedding round-trip failed");

  const PursuitModel reloaded = load_model(m1);
  const PursuitModel original = load_model(m2);
  require(reloaded.querier == original.querier && reloaded.classifier == original.classifier,
          "checkpoint reload mismatch");

  // NLI mapping against a live stub server.
  httplib::Server server;
  std::atomic<int> label{0};
  server.Post("/infer", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(nlohmann::json{{"label", label.load()}}.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread server_thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  NliClientConfig client_config;
  client_config.base_url = "http://127.0.0.1:" + std::to_string(port);
  const NliClient client(client_config);
  const NliPrompt prompt = assemble_nli_prompt("Decide.", ReportDoc{"r", "text"}, "fact");
  const std::array<Answer, 3> expected{kAnswerNegative, kAnswerUnknown, kAnswerPositive};
  for (int raw = 0; raw <= 2; ++raw) {
    label = raw;
    require(client.answer(prompt) == expected[static_cast<std::size_t>(raw)],
            "nli label " + std::to_string(raw) + " mapped incorrectly");
  }
  server.stop();
  server_thread.join();
}

struct Criterion {
  std::string name;
  std::function<void()> body;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"1. exact-pursuit selections match the exhaustive scan", criterion_exact_ip},
      {"2. gradients match central finite differences", criterion_gradients},
      {"3. trained model reaches the Bayes ceiling", criterion_bayes_convergence},
      {"4. querier finds the informative query first", criterion_informative_query},
      {"5. stopping-rule semantics hold", criterion_stopping_rules},
      {"6. metric oracles reproduce exactly", criterion_metric_oracles},
      {"7. query-bank dedup removes planted duplicates", criterion_query_bank},
      {"8. seeded runs and formats are reproducible", criterion_reproducibility},
  };

  int failures = 0;
  for (const Criterion& criterion : criteria) {
    const auto start = std::chrono::steady_clock::now();
    try {
      criterion.body();
      const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::cout << "[PASS] " << criterion.name << " (" << std::fixed << std::setprecision(1) << s
                << "s)" << std::endl;
    } catch (const std::exception& e) {
      ++failures;
      std::cout << "[FAIL] " << criterion.name << ": " << e.what() << std::endl;
    }
  }
  if (failures > 0) {
    std::cout << failures << " criterion(s) failed" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
