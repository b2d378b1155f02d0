#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "ipursuit/neuralcore.hpp"
#include "support/test_util.hpp"

using namespace ipursuit;

namespace {

MlpParams<double> random_params(const std::vector<std::size_t>& dims, std::uint64_t seed) {
  MlpParams<double> p = MlpParams<double>::he_uniform(dims, seed);
  std::mt19937_64 rng(seed ^ 0xabcdef);
  for (auto& b : p.biases) {
    for (double& v : b) v = u64_to_unit(rng()) * 0.2 - 0.1;
  }
  return p;
}

std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = (u64_to_unit(rng()) * 2.0 - 1.0) * scale;
  return v;
}

/// Scalar objective g . f(theta) used by every finite-difference check.
double directional_output(const MlpParams<double>& params, const std::vector<double>& input,
                          const std::vector<double>& out_grad) {
  const std::vector<double> out = mlp_forward<double>(params, input);
  double acc = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) acc += out_grad[i] * out[i];
  return acc;
}

/// Central finite differences vs analytic gradients with relative error 1e-4.
bool gradients_match_fd(MlpParams<double> params, const std::vector<double>& input,
                        const std::vector<double>& out_grad, double h = 1e-4) {
  ForwardCache<double> cache;
  mlp_forward<double>(params, input, &cache);
  const MlpGrads<double> grads = mlp_backward<double>(params, cache, out_grad);

  auto check = [&](double* coord, double analytic) {
    const double saved = *coord;
    *coord = saved + h;
    const double up = directional_output(params, input, out_grad);
    *coord = saved - h;
    const double down = directional_output(params, input, out_grad);
    *coord = saved;
    const double fd = (up - down) / (2.0 * h);
    const double scale = std::max({std::abs(fd), std::abs(analytic), 1e-6});
    return std::abs(fd - analytic) <= 1e-4 * scale;
  };

  for (std::size_t l = 0; l < params.n_layers(); ++l) {
    for (std::size_t i = 0; i < params.weights[l].data.size(); ++i) {
      if (!check(&params.weights[l].data[i], grads.weights[l].data[i])) return false;
    }
    for (std::size_t i = 0; i < params.biases[l].size(); ++i) {
      if (!check(&params.biases[l][i], grads.biases[l][i])) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("all-zero parameters map any input to zero logits") {
  const MlpParams<double> p = MlpParams<double>::zeros({3, 4, 2});
  const std::vector<double> out = mlp_forward<double>(p, std::vector<double>{1.0, -2.0, 0.5});
  for (double v : out) CHECK(v == 0.0);
}

TEST_CASE("single identity layer reproduces its input") {
  MlpParams<double> p = MlpParams<double>::zeros({3, 3});
  for (std::size_t i = 0; i < 3; ++i) p.weights[0].at(i, i) = 1.0;
  const std::vector<double> input{0.5, -1.5, 2.0};
  CHECK(mlp_forward<double>(p, input) == input);
}

TEST_CASE("negative pre-activations contribute nothing downstream") {
  // One hidden unit driven negative: its outgoing weight must not matter.
  MlpParams<double> p = MlpParams<double>::zeros({1, 1, 1});
  p.weights[0].at(0, 0) = -3.0;  // hidden pre-activation = -3 < 0
  p.weights[1].at(0, 0) = 7.0;
  const std::vector<double> out = mlp_forward<double>(p, std::vector<double>{1.0});
  CHECK(out[0] == 0.0);
}

TEST_CASE("input size mismatch is rejected") {
  const MlpParams<double> p = MlpParams<double>::zeros({3, 2});
  CHECK_THROWS_AS(mlp_forward<double>(p, std::vector<double>{1.0}), ValidationError);
}

TEST_CASE("zero output gradient zeroes every parameter gradient") {
  const MlpParams<double> p = random_params({4, 5, 3}, 11);
  std::mt19937_64 rng(3);
  const std::vector<double> input = random_vector(4, rng);
  ForwardCache<double> cache;
  mlp_forward<double>(p, input, &cache);
  const MlpGrads<double> grads = mlp_backward<double>(p, cache, std::vector<double>{0.0, 0.0, 0.0});
  for (const auto& w : grads.weights) {
    for (double v : w.data) CHECK(v == 0.0);
  }
  for (const auto& b : grads.biases) {
    for (double v : b) CHECK(v == 0.0);
  }
}

TEST_CASE("backward pass is linear in the output gradient") {
  const MlpParams<double> p = random_params({3, 4, 2}, 21);
  std::mt19937_64 rng(4);
  const std::vector<double> input = random_vector(3, rng);
  std::vector<double> g = random_vector(2, rng);
  ForwardCache<double> cache;
  mlp_forward<double>(p, input, &cache);
  const MlpGrads<double> once = mlp_backward<double>(p, cache, g);
  for (double& v : g) v *= 2.0;
  const MlpGrads<double> twice = mlp_backward<double>(p, cache, g);
  for (std::size_t l = 0; l < once.weights.size(); ++l) {
    for (std::size_t i = 0; i < once.weights[l].data.size(); ++i) {
      CHECK(twice.weights[l].data[i] == doctest::Approx(2.0 * once.weights[l].data[i]));
    }
  }
}

TEST_CASE("2-3-2 network gradients match central finite differences") {
  std::mt19937_64 rng(77);
  const MlpParams<double> p = random_params({2, 3, 2}, 1234);
  const std::vector<double> input = random_vector(2, rng);
  const std::vector<double> out_grad = random_vector(2, rng);
  CHECK(gradients_match_fd(p, input, out_grad));
}

TEST_CASE("gradients pass finite-difference checks on random small networks") {
  std::mt19937_64 rng(4242);
  const std::vector<std::vector<std::size_t>> shapes{
      {2, 3, 2}, {3, 4, 4, 1}, {5, 2, 3}, {1, 6, 1}, {4, 4, 4, 4, 2},
      {2, 8, 1}, {6, 3, 3, 2}, {3, 3, 3, 3, 3, 1}, {2, 5, 4, 3}, {7, 2, 1}};
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const MlpParams<double> p = random_params(shapes[i], 1000 + i);
    const std::vector<double> input = random_vector(shapes[i].front(), rng);
    const std::vector<double> out_grad = random_vector(shapes[i].back(), rng);
    CHECK(gradients_match_fd(p, input, out_grad));
  }
}

TEST_CASE("adamw decay-only step scales parameters by (1 - lr*lambda)") {
  MlpParams<double> p = random_params({2, 2}, 5);
  const MlpParams<double> before = p;
  OptimizerState<double> state = OptimizerState<double>::zeros_like(p);
  state.weight_decay = 0.01;
  const MlpGrads<double> zero = MlpGrads<double>::zeros_like(p);
  adamw_step<double>(p, zero, state, 1e-4);
  for (std::size_t i = 0; i < p.weights[0].data.size(); ++i) {
    CHECK(p.weights[0].data[i] ==
          doctest::Approx(before.weights[0].data[i] * (1.0 - 1e-6)).epsilon(1e-12));
  }
}

TEST_CASE("adamw first step with unit gradients is -lr/(1+eps) per coordinate") {
  MlpParams<double> p = MlpParams<double>::zeros({2, 2});
  OptimizerState<double> state = OptimizerState<double>::zeros_like(p);
  state.weight_decay = 0.0;
  MlpGrads<double> grads = MlpGrads<double>::zeros_like(p);
  for (auto& w : grads.weights) {
    for (double& v : w.data) v = 1.0;
  }
  for (auto& b : grads.biases) {
    for (double& v : b) v = 1.0;
  }
  const double lr = 1e-4;
  adamw_step<double>(p, grads, state, lr);
  const double expected = -lr * 1.0 / (1.0 + 1e-8);
  for (double v : p.weights[0].data) CHECK(v == doctest::Approx(expected).epsilon(1e-12));
  for (double v : p.biases[0]) CHECK(v == doctest::Approx(expected).epsilon(1e-12));
  CHECK(state.step_count == 1);
}

TEST_CASE("adamw updates tensors independently") {
  MlpParams<double> p = MlpParams<double>::zeros({2, 3, 2});
  OptimizerState<double> state = OptimizerState<double>::zeros_like(p);
  state.weight_decay = 0.0;
  MlpGrads<double> grads = MlpGrads<double>::zeros_like(p);
  for (double& v : grads.weights[0].data) v = 1.0;  // only layer 0 gets gradient
  adamw_step<double>(p, grads, state, 1e-3);
  for (double v : p.weights[1].data) CHECK(v == 0.0);
  for (double v : p.biases[0]) CHECK(v == 0.0);
  for (double v : p.weights[0].data) CHECK(v != 0.0);
}

TEST_CASE("adamw rejects non-finite gradients naming the tensor") {
  MlpParams<double> p = MlpParams<double>::zeros({2, 2});
  OptimizerState<double> state = OptimizerState<double>::zeros_like(p);
  MlpGrads<double> grads = MlpGrads<double>::zeros_like(p);
  grads.weights[0].data[1] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(adamw_step<double>(p, grads, state, 1e-4),
                       doctest::Contains("weights[0]"), RuntimeFailure);
}

TEST_CASE("cosine schedule endpoints and midpoint") {
  const LrSchedule schedule{1e-4, 0.0, 100};
  CHECK(cosine_lr(schedule, 0) == doctest::Approx(1e-4).epsilon(1e-12));
  CHECK(cosine_lr(schedule, 100) == doctest::Approx(0.0));
  CHECK(cosine_lr(schedule, 50) == doctest::Approx(0.5e-4).epsilon(1e-12));
  const LrSchedule shifted{2e-3, 4e-4, 10};
  CHECK(cosine_lr(shifted, 5) == doctest::Approx((2e-3 + 4e-4) / 2.0).epsilon(1e-12));
  CHECK_THROWS_AS(cosine_lr(schedule, 101), ValidationError);
}

TEST_CASE("weighted bce worked values") {
  const auto [l1, g1] = weighted_bce<double>(0.0, 1, 1.0);
  CHECK(l1 == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  const auto [l3, g3] = weighted_bce<double>(0.0, 1, 3.0);
  CHECK(l3 == doctest::Approx(3.0 * std::log(2.0)).epsilon(1e-12));
  CHECK(g1 == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("weighted bce gradient matches finite differences across the logit range") {
  for (double logit : {-20.0, -1.0, 0.0, 1.0, 20.0}) {
    for (int label : {0, 1}) {
      for (double w : {1.0, 2.5, 9.0}) {
        const double h = 1e-6;
        const auto [loss, grad] = weighted_bce<double>(logit, label, w);
        const double up = weighted_bce<double>(logit + h, label, w).first;
        const double down = weighted_bce<double>(logit - h, label, w).first;
        const double fd = (up - down) / (2.0 * h);
        CHECK(grad == doctest::Approx(fd).epsilon(1e-6));
        CHECK(std::isfinite(loss));
      }
    }
  }
}

TEST_CASE("weighted bce stays finite at extreme logits") {
  for (double logit : {-1e4, -100.0, 100.0, 1e4}) {
    for (int label : {0, 1}) {
      const auto [loss, grad] = weighted_bce<double>(logit, label, 5.0);
      CHECK(std::isfinite(loss));
      CHECK(std::isfinite(grad));
    }
  }
}

TEST_CASE("eval selection takes the unmasked argmax") {
  const std::vector<double> logits{1.0, 5.0, 2.0};
  const std::vector<double> no_mask{0.0, 0.0, 0.0};
  const auto sel = straight_through_select<double>(logits, no_mask, 1.0, SelectMode::kEval);
  CHECK(sel.index == 1);
  CHECK(sel.onehot == std::vector<double>{0.0, 1.0, 0.0});

  const std::vector<double> mask{0.0, 1.0, 0.0};
  const auto masked = straight_through_select<double>(logits, mask, 1.0, SelectMode::kEval);
  CHECK(masked.index == 2);
}

TEST_CASE("selection with everything masked is an error") {
  const std::vector<double> logits{1.0, 2.0};
  const std::vector<double> mask{1.0, 1.0};
  CHECK_THROWS_AS(straight_through_select<double>(logits, mask, 1.0, SelectMode::kEval),
                  ValidationError);
}

TEST_CASE("eval selection is invariant to a constant shift of unmasked logits") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> logits = random_vector(6, rng, 3.0);
    std::vector<double> mask(6, 0.0);
    mask[rng() % 6] = 1.0;
    const auto base = straight_through_select<double>(logits, mask, 1.0, SelectMode::kEval);
    const double shift = (u64_to_unit(rng()) - 0.5) * 20.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
      if (mask[i] == 0.0) logits[i] += shift;
    }
    const auto shifted = straight_through_select<double>(logits, mask, 1.0, SelectMode::kEval);
    CHECK(shifted.index == base.index);
  }
}

TEST_CASE("straight-through backward matches finite differences of the soft path") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 4 + rng() % 4;
    std::vector<double> logits = random_vector(n, rng, 2.0);
    std::vector<double> mask(n, 0.0);
    if (trial % 2 == 1) mask[rng() % n] = 1.0;
    const double temperature = 0.3 + u64_to_unit(rng());
    const std::vector<double> downstream = random_vector(n, rng);

    auto soft_objective = [&](const std::vector<double>& l) {
      const auto sel = straight_through_select<double>(l, mask, temperature, SelectMode::kTrain);
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += downstream[i] * sel.soft[i];
      return acc;
    };

    const auto sel = straight_through_select<double>(logits, mask, temperature, SelectMode::kTrain);
    const std::vector<double> analytic =
        straight_through_backward<double>(sel, downstream, temperature);

    const double h = 1e-6;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> up = logits, down = logits;
      up[i] += h;
      down[i] -= h;
      const double fd = (soft_objective(up) - soft_objective(down)) / (2.0 * h);
      CHECK(analytic[i] == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("checkpoint container round-trips tensors and metadata bitwise") {
  test_util::TempDir dir;
  CheckpointContent content;
  std::mt19937_64 rng(17);
  TensorEntry t1{"net.w0", {3, 4}, {}};
  for (int i = 0; i < 12; ++i) t1.data.push_back(static_cast<float>(u64_to_unit(rng()) - 0.5));
  TensorEntry t2{"net.b0", {3}, {0.25f, -1.5f, 3.0f}};
  content.tensors = {t1, t2};
  content.meta_json = R"({"purpose":"test","steps":12})";

  const std::string path = dir.file("ck.ipck");
  save_checkpoint(path, content);
  const CheckpointContent loaded = load_checkpoint(path);
  REQUIRE(loaded.tensors.size() == 2);
  CHECK(loaded.tensors[0].name == "net.w0");
  CHECK(loaded.tensors[0].shape == std::vector<std::size_t>{3, 4});
  CHECK(loaded.tensors[0].data == t1.data);
  CHECK(loaded.tensors[1].data == t2.data);
  CHECK(loaded.meta_json.find("\"steps\":12") != std::string::npos);
}

TEST_CASE("forward pass is a pure function of parameters and input") {
  const MlpParams<float> p = MlpParams<float>::he_uniform({4, 8, 2}, 900);
  const std::vector<float> input{0.5f, -0.25f, 1.0f, 0.0f};
  const std::vector<float> a = mlp_forward<float>(p, input);
  const std::vector<float> b = mlp_forward<float>(p, input);
  CHECK(a == b);
}
