#include "ipursuit/vip.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "ipursuit/io_util.hpp"
#include "ipursuit/rng.hpp"

namespace ipursuit {

namespace {

std::vector<float> concat_encoding(const HistoryEncoding& enc) {
  std::vector<float> input;
  input.reserve(enc.mask.size() * 2);
  input.insert(input.end(), enc.mask.begin(), enc.mask.end());
  input.insert(input.end(), enc.answers.begin(), enc.answers.end());
  return input;
}

std::vector<std::size_t> mlp_dims(std::size_t input, std::size_t width, std::size_t hidden_layers,
                                  std::size_t output) {
  std::vector<std::size_t> dims;
  dims.push_back(input);
  for (std::size_t l = 0; l < hidden_layers; ++l) dims.push_back(width);
  dims.push_back(output);
  return dims;
}

nlohmann::json config_to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"lr", c.lr},
          {"lr_min", c.lr_min},
          {"temperature_start", c.temperature_start},
          {"temperature_end", c.temperature_end},
          {"phase1_fraction", c.phase1_fraction},
          {"pos_weight", c.pos_weight},
          {"hidden_width", c.hidden_width},
          {"n_hidden_layers", c.n_hidden_layers},
          {"seed", c.seed},
          {"task_name", c.task_name}};
}

TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.lr = j.at("lr").get<double>();
  c.lr_min = j.at("lr_min").get<double>();
  c.temperature_start = j.at("temperature_start").get<double>();
  c.temperature_end = j.at("temperature_end").get<double>();
  c.phase1_fraction = j.at("phase1_fraction").get<double>();
  c.pos_weight = j.at("pos_weight").get<double>();
  c.hidden_width = j.at("hidden_width").get<std::size_t>();
  c.n_hidden_layers = j.at("n_hidden_layers").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.task_name = j.at("task_name").get<std::string>();
  return c;
}

void append_params(std::vector<TensorEntry>& tensors, const MlpParams<float>& params,
                   const std::string& prefix) {
  for (std::size_t l = 0; l < params.n_layers(); ++l) {
    tensors.push_back({prefix + ".w" + std::to_string(l),
                       {params.weights[l].rows, params.weights[l].cols},
                       params.weights[l].data});
    tensors.push_back({prefix + ".b" + std::to_string(l),
                       {params.biases[l].size()},
                       params.biases[l]});
  }
}

MlpParams<float> params_from_tensors(const std::vector<TensorEntry>& tensors,
                                     const std::string& prefix) {
  std::vector<const TensorEntry*> ws, bs;
  for (const TensorEntry& t : tensors) {
    if (t.name.rfind(prefix + ".w", 0) == 0) ws.push_back(&t);
    if (t.name.rfind(prefix + ".b", 0) == 0) bs.push_back(&t);
  }
  if (ws.empty() || ws.size() != bs.size()) {
    throw ValidationError("checkpoint is missing tensors for " + prefix);
  }
  MlpParams<float> params;
  params.layer_dims.push_back(ws.front()->shape.at(1));
  for (std::size_t l = 0; l < ws.size(); ++l) {
    const TensorEntry& w = *ws[l];
    const TensorEntry& b = *bs[l];
    if (w.shape.size() != 2 || b.shape.size() != 1 || w.shape[0] != b.shape[0]) {
      throw ValidationError("checkpoint tensor shapes inconsistent for " + prefix);
    }
    if (w.shape[1] != params.layer_dims.back()) {
      throw ValidationError("checkpoint layer dims do not chain for " + prefix);
    }
    params.layer_dims.push_back(w.shape[0]);
    DenseMatrix<float> wm(w.shape[0], w.shape[1]);
    wm.data = w.data;
    params.weights.push_back(std::move(wm));
    params.biases.push_back(b.data);
  }
  return params;
}

/// One training step on one sample: extend the history by the querier's
/// straight-through selection, evaluate the classifier's weighted BCE, and
/// accumulate gradients for both networks. Returns the loss.
double accumulate_sample(const MlpParams<float>& querier, const MlpParams<float>& classifier,
                         const History& history, std::span<const Answer> x_row, int label,
                         float pos_weight, float temperature, MlpGrads<float>& querier_grads,
                         MlpGrads<float>& classifier_grads) {
  const std::size_t n_queries = x_row.size();
  const HistoryEncoding enc = encode_history(history, n_queries);
  const std::vector<float> querier_input = concat_encoding(enc);

  ForwardCache<float> querier_cache;
  const std::vector<float> logits = mlp_forward<float>(querier, querier_input, &querier_cache);
  const Selection<float> sel =
      straight_through_select<float>(logits, enc.mask, temperature, SelectMode::kTrain);

  // Classifier input: history plus the selected query's revealed answer.
  std::vector<float> classifier_input = querier_input;
  classifier_input[sel.index] = 1.0f;
  classifier_input[n_queries + sel.index] = static_cast<float>(x_row[sel.index]);

  ForwardCache<float> classifier_cache;
  const std::vector<float> out =
      mlp_forward<float>(classifier, classifier_input, &classifier_cache);
  const auto [loss, dlogit] = weighted_bce<float>(out[0], label, pos_weight);

  const std::array<float, 1> output_grad{dlogit};
  MlpGrads<float> sample_grads = MlpGrads<float>::zeros_like(classifier);
  mlp_backward_accum<float>(classifier, classifier_cache, output_grad, sample_grads);
  classifier_grads.add(sample_grads);

  // d selection = d mask' + answer * d answers' (mask' = mask + s, a' = a + s*x).
  std::vector<float> d_selection(n_queries);
  for (std::size_t q = 0; q < n_queries; ++q) {
    d_selection[q] = sample_grads.input[q] +
                     static_cast<float>(x_row[q]) * sample_grads.input[n_queries + q];
  }
  const std::vector<float> d_logits =
      straight_through_backward<float>(sel, d_selection, temperature);
  mlp_backward_accum<float>(querier, querier_cache, d_logits, querier_grads);
  return loss;
}

}  // namespace

std::vector<float> HistoryEncoding::concat() const { return concat_encoding(*this); }

HistoryEncoding encode_history(const History& history, std::size_t n_queries) {
  HistoryEncoding enc;
  enc.mask.assign(n_queries, 0.0f);
  enc.answers.assign(n_queries, 0.0f);
  for (const auto& [q, a] : history.entries()) {
    if (q >= n_queries) {
      throw ValidationError("history query_id " + std::to_string(q) + " out of range");
    }
    enc.mask[q] = 1.0f;
    enc.answers[q] = static_cast<float>(a);
  }
  return enc;
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ValidationError("train config: batch_size must be positive");
  if (epochs == 0) throw ValidationError("train config: epochs must be positive");
  if (lr <= 0.0) throw ValidationError("train config: lr must be positive");
  if (lr_min < 0.0 || lr_min > lr) throw ValidationError("train config: lr_min out of range");
  if (temperature_start <= 0.0 || temperature_end <= 0.0) {
    throw ValidationError("train config: temperatures must be positive");
  }
  if (phase1_fraction < 0.0 || phase1_fraction > 1.0) {
    throw ValidationError("train config: phase1_fraction must lie in [0, 1]");
  }
  if (pos_weight < 0.0) throw ValidationError("train config: pos_weight must be >= 0");
  if (hidden_width == 0) throw ValidationError("train config: hidden_width must be positive");
  if (n_hidden_layers == 0) throw ValidationError("train config: need at least one hidden layer");
}

std::size_t TrainConfig::phase1_epochs() const {
  return static_cast<std::size_t>(std::lround(phase1_fraction * static_cast<double>(epochs)));
}

double PursuitModel::posterior(const HistoryEncoding& encoding) const {
  const std::vector<float> out = mlp_forward<float>(classifier, encoding.concat());
  return stable_sigmoid(static_cast<double>(out[0]));
}

void save_model(const PursuitModel& model, const std::string& path) {
  CheckpointContent content;
  append_params(content.tensors, model.querier, "querier");
  append_params(content.tensors, model.classifier, "classifier");
  nlohmann::json meta;
  meta["n_queries"] = model.n_queries;
  meta["task_name"] = model.task_name;
  meta["pos_weight"] = model.pos_weight;
  meta["config"] = config_to_json(model.config);
  meta["schedule"] = {{"eta_max", model.config.lr},
                      {"eta_min", model.config.lr_min},
                      {"total_steps", model.config.epochs}};
  content.meta_json = meta.dump();
  save_checkpoint(path, content);
}

PursuitModel load_model(const std::string& path) {
  const CheckpointContent content = load_checkpoint(path);
  const nlohmann::json meta = nlohmann::json::parse(content.meta_json);
  PursuitModel model;
  model.querier = params_from_tensors(content.tensors, "querier");
  model.classifier = params_from_tensors(content.tensors, "classifier");
  model.n_queries = meta.at("n_queries").get<std::size_t>();
  model.task_name = meta.at("task_name").get<std::string>();
  model.pos_weight = meta.at("pos_weight").get<double>();
  model.config = config_from_json(meta.at("config"));
  if (model.querier.output_dim() != model.n_queries ||
      model.querier.input_dim() != 2 * model.n_queries ||
      model.classifier.output_dim() != 1) {
    throw ValidationError(path + ": checkpoint dims inconsistent with n_queries");
  }
  return model;
}

History sample_random_history(std::span<const Answer> x_answers, std::mt19937_64& rng,
                              std::size_t max_len) {
  const std::size_t n_queries = x_answers.size();
  if (max_len > n_queries) {
    throw ValidationError("sample_random_history: max_len exceeds query count");
  }
  const std::size_t k = static_cast<std::size_t>(bounded_draw(rng, max_len + 1));
  // Partial Fisher-Yates: the first k entries form a uniform k-subset.
  std::vector<std::uint32_t> ids(n_queries);
  std::iota(ids.begin(), ids.end(), 0u);
  History history;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(bounded_draw(rng, n_queries - i));
    std::swap(ids[i], ids[j]);
    history.push(ids[i], x_answers[ids[i]]);
  }
  return history;
}

History biased_history_rollout(const MlpParams<float>& querier, std::span<const Answer> x_answers,
                               std::size_t rollout_len, float temperature, std::mt19937_64& rng) {
  const std::size_t n_queries = x_answers.size();
  if (rollout_len > n_queries) {
    throw ValidationError("biased_history_rollout: rollout_len exceeds query count");
  }
  History history;
  if (rollout_len == 0) return history;
  const std::size_t cut = 1 + static_cast<std::size_t>(bounded_draw(rng, rollout_len));
  for (std::size_t step = 0; step < cut; ++step) {
    const HistoryEncoding enc = encode_history(history, n_queries);
    const std::vector<float> logits = mlp_forward<float>(querier, enc.concat());
    const Selection<float> sel =
        straight_through_select<float>(logits, enc.mask, temperature, SelectMode::kEval);
    history.push(static_cast<std::uint32_t>(sel.index), x_answers[sel.index]);
  }
  return history;
}

PursuitModel train_vip(const TrainData& data, const TrainConfig& config) {
  config.validate();
  if (!data.answers) throw ValidationError("train_vip: missing answer matrix");
  if (data.labels.size() != data.answers->n_reports()) {
    throw ValidationError("train_vip: labels do not match answer matrix");
  }
  if (data.train_indices.empty()) throw ValidationError("train_vip: empty train split");
  if (data.val_indices.empty()) throw ValidationError("train_vip: empty validation split");
  const std::size_t n_queries = data.answers->n_queries();
  if (n_queries == 0) throw ValidationError("train_vip: no queries");

  std::size_t n_pos = 0;
  for (std::size_t idx : data.train_indices) n_pos += data.labels[idx];
  const std::size_t n_neg = data.train_indices.size() - n_pos;
  double pos_weight = config.pos_weight;
  if (pos_weight == 0.0) {
    if (n_pos == 0) throw ValidationError("train_vip: no positive labels in train split");
    pos_weight = static_cast<double>(n_neg) / static_cast<double>(n_pos);
    if (pos_weight <= 0.0) pos_weight = 1.0;  // all-positive split
  }

  PursuitModel model;
  model.n_queries = n_queries;
  model.task_name = config.task_name;
  model.config = config;
  model.pos_weight = pos_weight;
  model.querier = MlpParams<float>::he_uniform(
      mlp_dims(2 * n_queries, config.hidden_width, config.n_hidden_layers, n_queries),
      derive_seed(config.seed, "vip.querier.init"));
  model.classifier = MlpParams<float>::he_uniform(
      mlp_dims(2 * n_queries, config.hidden_width, config.n_hidden_layers, 1),
      derive_seed(config.seed, "vip.classifier.init"));

  OptimizerState<float> querier_opt = OptimizerState<float>::zeros_like(model.querier);
  OptimizerState<float> classifier_opt = OptimizerState<float>::zeros_like(model.classifier);

  const std::size_t batches_per_epoch =
      (data.train_indices.size() + config.batch_size - 1) / config.batch_size;
  LrSchedule schedule{config.lr, config.lr_min, config.epochs * batches_per_epoch};

  std::mt19937_64 order_rng(derive_seed(config.seed, "vip.batch_order"));
  std::mt19937_64 history_rng(derive_seed(config.seed, "vip.histories"));

  // Fixed validation histories so per-epoch losses are comparable.
  std::mt19937_64 val_rng(derive_seed(config.seed, "vip.val_histories"));
  std::vector<History> val_histories;
  val_histories.reserve(data.val_indices.size());
  for (std::size_t idx : data.val_indices) {
    val_histories.push_back(
        sample_random_history(data.answers->row(idx), val_rng, n_queries - 1));
  }

  std::ofstream log;
  if (!config.log_path.empty()) {
    log.open(config.log_path);
    if (!log) throw RuntimeFailure("cannot open training log " + config.log_path);
    log << "epoch,phase,train_loss,val_loss,lr,temperature\n";
  }

  const std::size_t phase1 = config.phase1_epochs();
  std::vector<std::size_t> order(data.train_indices);
  MlpGrads<float> querier_grads = MlpGrads<float>::zeros_like(model.querier);
  MlpGrads<float> classifier_grads = MlpGrads<float>::zeros_like(model.classifier);

  double best_val_loss = std::numeric_limits<double>::infinity();
  MlpParams<float> best_querier = model.querier;
  MlpParams<float> best_classifier = model.classifier;

  std::size_t global_step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const bool biased_phase = epoch >= phase1;
    const double progress =
        config.epochs > 1 ? static_cast<double>(epoch) / static_cast<double>(config.epochs - 1)
                          : 0.0;
    const float temperature = static_cast<float>(
        config.temperature_start + (config.temperature_end - config.temperature_start) * progress);

    seeded_shuffle(order, order_rng);
    double epoch_loss = 0.0;
    double lr = config.lr;
    for (std::size_t b = 0; b < batches_per_epoch; ++b) {
      const std::size_t begin = b * config.batch_size;
      const std::size_t end = std::min(begin + config.batch_size, order.size());
      if (begin >= end) break;
      querier_grads = MlpGrads<float>::zeros_like(model.querier);
      classifier_grads = MlpGrads<float>::zeros_like(model.classifier);
      double batch_loss = 0.0;
      for (std::size_t i = begin; i < end; ++i) {
        const std::size_t idx = order[i];
        const auto x_row = data.answers->row(idx);
        const History history =
            biased_phase
                ? biased_history_rollout(model.querier, x_row, n_queries - 1, temperature,
                                         history_rng)
                : sample_random_history(x_row, history_rng, n_queries - 1);
        batch_loss += accumulate_sample(model.querier, model.classifier, history, x_row,
                                        data.labels[idx], static_cast<float>(pos_weight),
                                        temperature, querier_grads, classifier_grads);
      }
      const float inv_batch = 1.0f / static_cast<float>(end - begin);
      querier_grads.scale(inv_batch);
      classifier_grads.scale(inv_batch);
      batch_loss *= inv_batch;
      if (!std::isfinite(batch_loss)) {
        throw RuntimeFailure("non-finite training loss at epoch " + std::to_string(epoch) +
                             ", batch " + std::to_string(b));
      }
      lr = cosine_lr(schedule, global_step);
      adamw_step(model.querier, querier_grads, querier_opt, static_cast<float>(lr));
      adamw_step(model.classifier, classifier_grads, classifier_opt, static_cast<float>(lr));
      ++global_step;
      epoch_loss += batch_loss;
    }
    epoch_loss /= static_cast<double>(batches_per_epoch);

    // Validation: deterministic histories, hard querier selection, same loss.
    double val_loss = 0.0;
    for (std::size_t v = 0; v < data.val_indices.size(); ++v) {
      const std::size_t idx = data.val_indices[v];
      const auto x_row = data.answers->row(idx);
      const HistoryEncoding enc = encode_history(val_histories[v], n_queries);
      const std::vector<float> logits = mlp_forward<float>(model.querier, enc.concat());
      const Selection<float> sel =
          straight_through_select<float>(logits, enc.mask, 1.0f, SelectMode::kEval);
      std::vector<float> input = enc.concat();
      input[sel.index] = 1.0f;
      input[n_queries + sel.index] = static_cast<float>(x_row[sel.index]);
      const std::vector<float> out = mlp_forward<float>(model.classifier, input);
      val_loss += weighted_bce<float>(out[0], data.labels[idx],
                                      static_cast<float>(pos_weight))
                      .first;
    }
    val_loss /= static_cast<double>(data.val_indices.size());

    if (val_loss < best_val_loss) {
      best_val_loss = val_loss;
      best_querier = model.querier;
      best_classifier = model.classifier;
    }
    if (log.is_open()) {
      log << epoch << ',' << (biased_phase ? "biased" : "random") << ',' << epoch_loss << ','
          << val_loss << ',' << lr << ',' << temperature << '\n';
    }
  }

  model.querier = std::move(best_querier);
  model.classifier = std::move(best_classifier);
  return model;
}

}  // namespace ipursuit
