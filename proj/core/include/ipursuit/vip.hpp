#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ipursuit/corpus.hpp"
#include "ipursuit/history.hpp"
#include "ipursuit/neuralcore.hpp"

namespace ipursuit {

/// Mask/answer pair fed to the networks. A single vector cannot distinguish
/// "asked, answer unknown (0)" from "never asked", hence the dual encoding;
/// the network input is the concatenation (length 2|Q|).
struct HistoryEncoding {
  std::vector<float> mask;     // 1 where asked
  std::vector<float> answers;  // stored ternary answer where asked, else 0

  std::vector<float> concat() const;
};

HistoryEncoding encode_history(const History& history, std::size_t n_queries);

struct TrainConfig {
  std::size_t batch_size = 128;
  std::size_t epochs = 1000;
  double lr = 1e-4;
  double lr_min = 0.0;
  double temperature_start = 1.0;
  double temperature_end = 0.2;
  double phase1_fraction = 0.7;  // share of epochs on random histories
  double pos_weight = 0.0;       // 0 = derive n_neg/n_pos from the train split
  std::size_t hidden_width = 512;
  std::size_t n_hidden_layers = 4;  // 5 weight layers total
  std::uint64_t seed = 0;
  std::string task_name = "task";
  std::string log_path;  // optional training-log CSV

  void validate() const;
  std::size_t phase1_epochs() const;
  std::size_t phase2_epochs() const { return epochs - phase1_epochs(); }
};

/// Trained querier/classifier pair plus the configuration they were built with.
struct PursuitModel {
  MlpParams<float> querier;     // 2|Q| -> |Q| selection logits
  MlpParams<float> classifier;  // 2|Q| -> 1 posterior logit
  std::size_t n_queries = 0;
  std::string task_name;
  TrainConfig config;
  double pos_weight = 1.0;  // value actually used during training

  double posterior(const HistoryEncoding& encoding) const;
};

void save_model(const PursuitModel& model, const std::string& path);
PursuitModel load_model(const std::string& path);

/// History of uniformly random length in {0..max_len} over a uniformly random
/// query subset, answers read from the observed row.
History sample_random_history(std::span<const Answer> x_answers, std::mt19937_64& rng,
                              std::size_t max_len);

/// Querier-driven rollout: repeatedly pick the best unasked query (hard argmax)
/// and append its true answer. The rollout is cut at a uniformly random length
/// in {1..rollout_len} so training sees every prefix depth; rollout_len = 0
/// yields the empty history.
History biased_history_rollout(const MlpParams<float>& querier, std::span<const Answer> x_answers,
                               std::size_t rollout_len, float temperature, std::mt19937_64& rng);

struct TrainData {
  const AnswerMatrix* answers = nullptr;
  std::vector<std::uint8_t> labels;  // one per report
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> val_indices;
};

/// Minimizes the classifier's weighted cross-entropy on histories extended by
/// the querier's straight-through selection: phase 1 samples random histories,
/// phase 2 rolls histories out with the querier itself. AdamW with cosine
/// annealing; returns the best-validation-loss checkpoint.
PursuitModel train_vip(const TrainData& data, const TrainConfig& config);

}  // namespace ipursuit
