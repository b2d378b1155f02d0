#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ipursuit/common.hpp"
#include "ipursuit/rng.hpp"

namespace ipursuit {

template <typename T>
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, T{0}) {}

  T& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  T at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  bool operator==(const DenseMatrix&) const = default;
};

/// Fully-connected network: ReLU on every hidden layer, linear final layer.
/// layer_dims has n_layers+1 entries; weights[l] is dims[l+1] x dims[l].
template <typename T>
struct MlpParams {
  std::vector<std::size_t> layer_dims;
  std::vector<DenseMatrix<T>> weights;
  std::vector<std::vector<T>> biases;

  std::size_t n_layers() const { return weights.size(); }
  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t output_dim() const { return layer_dims.back(); }

  bool operator==(const MlpParams&) const = default;

  static MlpParams zeros(const std::vector<std::size_t>& dims) {
    check_dims(dims);
    MlpParams p;
    p.layer_dims = dims;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      p.weights.emplace_back(dims[l + 1], dims[l]);
      p.biases.emplace_back(dims[l + 1], T{0});
    }
    return p;
  }

  /// He-uniform fan-in initialization, seeded.
  static MlpParams he_uniform(const std::vector<std::size_t>& dims, std::uint64_t seed) {
    MlpParams p = zeros(dims);
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l < p.n_layers(); ++l) {
      const T limit = std::sqrt(T{6} / static_cast<T>(dims[l]));
      for (T& w : p.weights[l].data) {
        w = (static_cast<T>(u64_to_unit(rng())) * T{2} - T{1}) * limit;
      }
    }
    return p;
  }

 private:
  static void check_dims(const std::vector<std::size_t>& dims) {
    if (dims.size() < 2) throw ValidationError("mlp: need at least one weight layer");
    for (std::size_t d : dims) {
      if (d == 0) throw ValidationError("mlp: zero-width layer");
    }
  }
};

template <typename T>
struct ForwardCache {
  // inputs[l] is the input fed to layer l; preacts[l] = W_l inputs[l] + b_l.
  std::vector<std::vector<T>> inputs;
  std::vector<std::vector<T>> preacts;
};

template <typename T>
struct MlpGrads {
  std::vector<DenseMatrix<T>> weights;
  std::vector<std::vector<T>> biases;
  std::vector<T> input;  // gradient w.r.t. the network input

  static MlpGrads zeros_like(const MlpParams<T>& params) {
    MlpGrads g;
    for (std::size_t l = 0; l < params.n_layers(); ++l) {
      g.weights.emplace_back(params.weights[l].rows, params.weights[l].cols);
      g.biases.emplace_back(params.biases[l].size(), T{0});
    }
    g.input.assign(params.input_dim(), T{0});
    return g;
  }

  void scale(T factor) {
    for (auto& w : weights) {
      for (T& v : w.data) v *= factor;
    }
    for (auto& b : biases) {
      for (T& v : b) v *= factor;
    }
    for (T& v : input) v *= factor;
  }

  void add(const MlpGrads& other) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      for (std::size_t i = 0; i < weights[l].data.size(); ++i) {
        weights[l].data[i] += other.weights[l].data[i];
      }
      for (std::size_t i = 0; i < biases[l].size(); ++i) biases[l][i] += other.biases[l][i];
    }
  }
};

/// Forward pass; fills `cache` for the backward pass when non-null.
template <typename T>
std::vector<T> mlp_forward(const MlpParams<T>& params, std::span<const T> input,
                           ForwardCache<T>* cache = nullptr) {
  if (input.size() != params.input_dim()) {
    throw ValidationError("mlp_forward: input size " + std::to_string(input.size()) +
                          " does not match dims[0]=" + std::to_string(params.input_dim()));
  }
  if (cache) {
    cache->inputs.assign(params.n_layers(), {});
    cache->preacts.assign(params.n_layers(), {});
  }
  std::vector<T> activation(input.begin(), input.end());
  for (std::size_t l = 0; l < params.n_layers(); ++l) {
    const DenseMatrix<T>& w = params.weights[l];
    const std::vector<T>& b = params.biases[l];
    std::vector<T> pre(w.rows);
    for (std::size_t r = 0; r < w.rows; ++r) {
      const T* wr = w.data.data() + r * w.cols;
      T acc = b[r];
      for (std::size_t c = 0; c < w.cols; ++c) acc += wr[c] * activation[c];
      pre[r] = acc;
    }
    if (cache) {
      cache->inputs[l] = std::move(activation);
      cache->preacts[l] = pre;
    }
    if (l + 1 < params.n_layers()) {
      for (T& v : pre) v = v > T{0} ? v : T{0};  // ReLU on hidden layers
    }
    activation = std::move(pre);
  }
  return activation;
}

/// Exact reverse-mode gradients for all parameters and the input, accumulated
/// into `grads` (callers zero or reuse across a batch).
template <typename T>
void mlp_backward_accum(const MlpParams<T>& params, const ForwardCache<T>& cache,
                        std::span<const T> output_grad, MlpGrads<T>& grads) {
  const std::size_t n_layers = params.n_layers();
  if (cache.inputs.size() != n_layers || cache.preacts.size() != n_layers) {
    throw ValidationError("mlp_backward: cache does not match network");
  }
  if (output_grad.size() != params.output_dim()) {
    throw ValidationError("mlp_backward: output gradient size mismatch");
  }
  std::vector<T> delta(output_grad.begin(), output_grad.end());
  for (std::size_t l = n_layers; l-- > 0;) {
    const DenseMatrix<T>& w = params.weights[l];
    const std::vector<T>& layer_input = cache.inputs[l];
    if (layer_input.size() != w.cols) {
      throw ValidationError("mlp_backward: stale cache for layer " + std::to_string(l));
    }
    if (l + 1 < n_layers) {  // ReLU derivative on hidden outputs
      const std::vector<T>& pre = cache.preacts[l];
      for (std::size_t r = 0; r < delta.size(); ++r) {
        if (pre[r] <= T{0}) delta[r] = T{0};
      }
    }
    DenseMatrix<T>& dw = grads.weights[l];
    std::vector<T>& db = grads.biases[l];
    std::vector<T> prev_delta(w.cols, T{0});
    for (std::size_t r = 0; r < w.rows; ++r) {
      const T d = delta[r];
      db[r] += d;
      T* dwr = dw.data.data() + r * w.cols;
      const T* wr = w.data.data() + r * w.cols;
      if (d != T{0}) {
        for (std::size_t c = 0; c < w.cols; ++c) {
          dwr[c] += d * layer_input[c];
          prev_delta[c] += d * wr[c];
        }
      }
    }
    delta = std::move(prev_delta);
  }
  for (std::size_t i = 0; i < delta.size(); ++i) grads.input[i] += delta[i];
}

template <typename T>
MlpGrads<T> mlp_backward(const MlpParams<T>& params, const ForwardCache<T>& cache,
                         std::span<const T> output_grad) {
  MlpGrads<T> grads = MlpGrads<T>::zeros_like(params);
  mlp_backward_accum(params, cache, output_grad, grads);
  return grads;
}

/// AdamW moments; weight decay is decoupled from the adaptive step.
template <typename T>
struct OptimizerState {
  std::vector<DenseMatrix<T>> m_w, v_w;
  std::vector<std::vector<T>> m_b, v_b;
  std::int64_t step_count = 0;
  T beta1 = T{0.9};
  T beta2 = T{0.999};
  T eps = T{1e-8};
  T weight_decay = T{0.01};

  static OptimizerState zeros_like(const MlpParams<T>& params) {
    OptimizerState s;
    for (std::size_t l = 0; l < params.n_layers(); ++l) {
      s.m_w.emplace_back(params.weights[l].rows, params.weights[l].cols);
      s.v_w.emplace_back(params.weights[l].rows, params.weights[l].cols);
      s.m_b.emplace_back(params.biases[l].size(), T{0});
      s.v_b.emplace_back(params.biases[l].size(), T{0});
    }
    return s;
  }
};

namespace detail {

template <typename T>
void adamw_update_span(T* param, const T* grad, T* m, T* v, std::size_t n, OptimizerState<T>& state,
                       T lr, T bias1, T bias2, const char* tensor_name) {
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(grad[i])) {
      throw RuntimeFailure(std::string("non-finite gradient in ") + tensor_name);
    }
    m[i] = state.beta1 * m[i] + (T{1} - state.beta1) * grad[i];
    v[i] = state.beta2 * v[i] + (T{1} - state.beta2) * grad[i] * grad[i];
    const T m_hat = m[i] / bias1;
    const T v_hat = v[i] / bias2;
    // Decoupled decay: applied to the parameter, not folded into the moment.
    param[i] -= lr * state.weight_decay * param[i];
    param[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
}

}  // namespace detail

template <typename T>
void adamw_step(MlpParams<T>& params, const MlpGrads<T>& grads, OptimizerState<T>& state, T lr) {
  if (grads.weights.size() != params.n_layers()) {
    throw ValidationError("adamw_step: gradient/parameter layer mismatch");
  }
  state.step_count += 1;
  const T bias1 = T{1} - std::pow(state.beta1, static_cast<T>(state.step_count));
  const T bias2 = T{1} - std::pow(state.beta2, static_cast<T>(state.step_count));
  for (std::size_t l = 0; l < params.n_layers(); ++l) {
    const std::string wname = "weights[" + std::to_string(l) + "]";
    const std::string bname = "biases[" + std::to_string(l) + "]";
    detail::adamw_update_span(params.weights[l].data.data(), grads.weights[l].data.data(),
                              state.m_w[l].data.data(), state.v_w[l].data.data(),
                              params.weights[l].data.size(), state, lr, bias1, bias2,
                              wname.c_str());
    detail::adamw_update_span(params.biases[l].data(), grads.biases[l].data(),
                              state.m_b[l].data(), state.v_b[l].data(), params.biases[l].size(),
                              state, lr, bias1, bias2, bname.c_str());
  }
}

struct LrSchedule {
  double eta_max = 1e-4;
  double eta_min = 0.0;
  std::size_t total_steps = 1;
};

/// Cosine annealing from eta_max at step 0 down to eta_min at total_steps.
inline double cosine_lr(const LrSchedule& schedule, std::size_t step) {
  if (schedule.eta_min > schedule.eta_max) {
    throw ValidationError("cosine_lr: eta_min exceeds eta_max");
  }
  if (schedule.total_steps < 1) throw ValidationError("cosine_lr: total_steps must be >= 1");
  if (step > schedule.total_steps) {
    throw ValidationError("cosine_lr: step " + std::to_string(step) + " out of range");
  }
  const double phase = M_PI * static_cast<double>(step) / static_cast<double>(schedule.total_steps);
  return schedule.eta_min + 0.5 * (schedule.eta_max - schedule.eta_min) * (1.0 + std::cos(phase));
}

template <typename T>
T stable_sigmoid(T z) {
  if (z >= T{0}) {
    return T{1} / (T{1} + std::exp(-z));
  }
  const T e = std::exp(z);
  return e / (T{1} + e);
}

template <typename T>
T softplus(T z) {
  // max(z, 0) + log1p(exp(-|z|)): finite for any representable z.
  return std::max(z, T{0}) + std::log1p(std::exp(-std::abs(z)));
}

/// Weighted binary cross-entropy on a logit, log-sum-exp stabilized.
/// Returns (loss, dloss/dlogit).
template <typename T>
std::pair<T, T> weighted_bce(T logit, int label, T pos_weight) {
  if (pos_weight <= T{0}) throw ValidationError("weighted_bce: pos_weight must be positive");
  if (label != 0 && label != 1) throw ValidationError("weighted_bce: label must be 0 or 1");
  const T y = static_cast<T>(label);
  const T loss = pos_weight * y * softplus(-logit) + (T{1} - y) * softplus(logit);
  const T sig = stable_sigmoid(logit);
  const T grad = pos_weight * y * (sig - T{1}) + (T{1} - y) * sig;
  return {loss, grad};
}

enum class SelectMode { kTrain, kEval };

/// Result of a masked discrete selection. `onehot` is the forward value; in
/// train mode `soft` holds the tempered softmax used by the backward pass.
template <typename T>
struct Selection {
  std::size_t index = 0;
  std::vector<T> onehot;
  std::vector<T> soft;
};

/// Hard argmax over unmasked positions (mask 1 = excluded). Train mode keeps
/// the tempered softmax so gradients flow straight-through.
template <typename T>
Selection<T> straight_through_select(std::span<const T> logits, std::span<const T> mask,
                                     T temperature, SelectMode mode) {
  if (temperature <= T{0}) throw ValidationError("selection temperature must be positive");
  if (!mask.empty() && mask.size() != logits.size()) {
    throw ValidationError("selection mask size mismatch");
  }
  const std::size_t n = logits.size();
  Selection<T> sel;
  sel.onehot.assign(n, T{0});

  std::size_t best = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask.empty() && mask[i] != T{0}) continue;
    if (best == n || logits[i] > logits[best]) best = i;
  }
  if (best == n) throw ValidationError("straight_through_select: all positions masked");
  sel.index = best;
  sel.onehot[best] = T{1};

  if (mode == SelectMode::kTrain) {
    sel.soft.assign(n, T{0});
    const T max_logit = logits[best];
    T total = T{0};
    for (std::size_t i = 0; i < n; ++i) {
      if (!mask.empty() && mask[i] != T{0}) continue;
      sel.soft[i] = std::exp((logits[i] - max_logit) / temperature);
      total += sel.soft[i];
    }
    for (T& p : sel.soft) p /= total;
  }
  return sel;
}

/// Backward for the straight-through path: the jacobian of the tempered
/// softmax at the forward point, masked positions receiving zero gradient.
template <typename T>
std::vector<T> straight_through_backward(const Selection<T>& selection,
                                         std::span<const T> d_selection, T temperature) {
  if (selection.soft.empty()) {
    throw ValidationError("straight_through_backward: selection was not made in train mode");
  }
  if (d_selection.size() != selection.soft.size()) {
    throw ValidationError("straight_through_backward: gradient size mismatch");
  }
  const std::size_t n = selection.soft.size();
  T weighted = T{0};
  for (std::size_t i = 0; i < n; ++i) weighted += selection.soft[i] * d_selection[i];
  std::vector<T> d_logits(n, T{0});
  for (std::size_t i = 0; i < n; ++i) {
    d_logits[i] = selection.soft[i] * (d_selection[i] - weighted) / temperature;
  }
  return d_logits;
}

/// Checkpoint container entry: float32 payloads in header order.
struct TensorEntry {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<float> data;
};

struct CheckpointContent {
  std::vector<TensorEntry> tensors;
  std::string meta_json;  // serialized JSON object: config echo, schedule state
};

/// "IPCK1" container: magic, 4-byte LE header length, JSON header (tensor
/// names, shapes, dtypes, meta), then concatenated LE float32 payloads.
void save_checkpoint(const std::string& path, const CheckpointContent& content);
CheckpointContent load_checkpoint(const std::string& path);

}  // namespace ipursuit
