#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "composenet/errors.hpp"
#include "composenet/optim.hpp"
#include "composenet/params.hpp"
#include "composenet/rng.hpp"
#include "composenet/tape.hpp"
#include "composenet/tensor.hpp"

using namespace composenet;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, float lo = -1.0f, float hi = 1.0f) {
  Tensor t(std::move(shape));
  for (int i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Independent triple-loop matrix multiply in double.
std::vector<double> naive_dense(const Tensor& x, const Tensor& w, const Tensor& b, bool relu) {
  const int out = w.shape()[0];
  const int in = w.shape()[1];
  std::vector<double> y(static_cast<size_t>(out));
  for (int o = 0; o < out; ++o) {
    double acc = b[o];
    for (int i = 0; i < in; ++i)
      acc += static_cast<double>(w[o * in + i]) * static_cast<double>(x[i]);
    y[static_cast<size_t>(o)] = (relu && acc < 0.0) ? 0.0 : acc;
  }
  return y;
}

}  // namespace

TEST_CASE("dense_forward: zero weight passes bias through") {
  Tensor x({3}, {5.0f, -2.0f, 9.0f});
  Tensor w({2, 3});
  Tensor b({2}, {1.0f, 2.0f});
  const Tensor y = dense_forward(x, w, b, Activation::None);
  CHECK(y[0] == 1.0f);
  CHECK(y[1] == 2.0f);
}

TEST_CASE("dense_forward: identity weight with relu") {
  Tensor x({2}, {1.0f, 0.0f});
  Tensor w({2, 2}, {1.0f, 0.0f, 0.0f, 1.0f});
  Tensor b({2});
  const Tensor y = dense_forward(x, w, b, Activation::Relu);
  CHECK(y[0] == 1.0f);
  CHECK(y[1] == 0.0f);
}

TEST_CASE("dense_forward matches a naive matmul oracle (seed 7)") {
  Rng rng(7);
  const Tensor x = random_tensor({13}, rng);
  const Tensor w = random_tensor({9, 13}, rng);
  const Tensor b = random_tensor({9}, rng);
  for (bool relu : {false, true}) {
    const Tensor y = dense_forward(x, w, b, relu ? Activation::Relu : Activation::None);
    const auto ref = naive_dense(x, w, b, relu);
    for (int o = 0; o < 9; ++o)
      CHECK(std::fabs(y[o] - ref[static_cast<size_t>(o)]) < 1e-6);
  }
}

TEST_CASE("dense_forward rejects mismatched shapes") {
  Tensor x({3});
  Tensor w({2, 4});
  Tensor b({2});
  CHECK_THROWS_AS(dense_forward(x, w, b, Activation::None), ConfigError);
}

TEST_CASE("softmax: uniform on equal logits") {
  const Tensor p = softmax(Tensor({4}, {0.0f, 0.0f, 0.0f, 0.0f}));
  for (int i = 0; i < 4; ++i) CHECK(p[i] == doctest::Approx(0.25f).epsilon(1e-6));
}

TEST_CASE("softmax: shift invariance and normalization") {
  Rng rng(11);
  for (int rep = 0; rep < 50; ++rep) {
    const Tensor logits = random_tensor({5}, rng, -4.0f, 4.0f);
    const float c = rng.uniform(-100.0f, 100.0f);
    Tensor shifted = logits;
    for (int i = 0; i < 5; ++i) shifted[i] += c;
    const Tensor p = softmax(logits);
    const Tensor ps = softmax(shifted);
    float sum = 0.0f;
    for (int i = 0; i < 5; ++i) {
      CHECK(p[i] > 0.0f);
      CHECK(std::fabs(p[i] - ps[i]) < 1e-6);
      sum += p[i];
    }
    CHECK(std::fabs(sum - 1.0f) < 1e-6);
  }
}

TEST_CASE("softmax of [1,2] matches the closed form") {
  const Tensor p = softmax(Tensor({2}, {1.0f, 2.0f}));
  CHECK(p[0] == doctest::Approx(0.26894f).epsilon(1e-4));
  CHECK(p[1] == doctest::Approx(0.73106f).epsilon(1e-4));
}

TEST_CASE("backward: loss = sum(W x) gives the outer-product gradient") {
  ParamSet params;
  Rng rng(3);
  params.insert("w", random_tensor({4, 3}, rng));
  params.insert("b", Tensor({4}));
  params.freeze("b");
  const Tensor x = random_tensor({3}, rng);

  Tape tape(params);
  const auto y = tape.dense(tape.constant(x), tape.param("w"), tape.param("b"),
                            Activation::None);
  const auto loss = tape.sum(y);
  const GradMap grads = tape.backward(loss);

  REQUIRE(grads.count("w") == 1);
  CHECK(grads.count("b") == 0);  // frozen: no gradient entry
  // d(sum(Wx))/dW[o][i] = x[i]; compare against central differences (h=1e-3).
  const Tensor& gw = grads.at("w");
  for (int o = 0; o < 4; ++o) {
    for (int i = 0; i < 3; ++i) {
      ParamSet plus = params, minus = params;
      plus.mutable_at("w")[o * 3 + i] += 1e-3f;
      minus.mutable_at("w")[o * 3 + i] -= 1e-3f;
      auto eval = [&](const ParamSet& ps) {
        double s = 0.0;
        for (double v : naive_dense(x, ps.at("w"), ps.at("b"), false)) s += v;
        return s;
      };
      const double fd = (eval(plus) - eval(minus)) / 2e-3;
      CHECK(std::fabs(gw[o * 3 + i] - fd) / std::max(1.0, std::fabs(fd)) < 1e-4);
    }
  }
}

TEST_CASE("backward: parameters the loss does not reach get no entry") {
  ParamSet params;
  Rng rng(5);
  params.insert("used.weight", random_tensor({2, 2}, rng));
  params.insert("used.bias", Tensor({2}));
  params.insert("unused.weight", random_tensor({2, 2}, rng));

  Tape tape(params);
  const auto y = tape.dense(tape.constant(random_tensor({2}, rng)), "used", Activation::None);
  const GradMap grads = tape.backward(tape.sum(y));
  CHECK(grads.count("used.weight") == 1);
  CHECK(grads.count("unused.weight") == 0);
}

TEST_CASE("backward: 3-layer network matches finite differences") {
  // Double-precision replica evaluated at +/-h is the oracle.
  ParamSet params;
  Rng rng(17);
  params.insert("l1.weight", random_tensor({5, 6}, rng));
  params.insert("l1.bias", random_tensor({5}, rng, -0.1f, 0.1f));
  params.insert("l2.weight", random_tensor({4, 5}, rng));
  params.insert("l2.bias", random_tensor({4}, rng, -0.1f, 0.1f));
  params.insert("l3.weight", random_tensor({3, 4}, rng));
  params.insert("l3.bias", random_tensor({3}, rng, -0.1f, 0.1f));
  const Tensor x = random_tensor({6}, rng);

  auto forward_double = [&](const ParamSet& ps) {
    std::vector<double> h(x.span().begin(), x.span().end());
    std::vector<double> out;
    auto layer = [&](const std::string& base, bool relu) {
      const Tensor& w = ps.at(base + ".weight");
      const Tensor& b = ps.at(base + ".bias");
      const int o_n = w.shape()[0], i_n = w.shape()[1];
      out.assign(static_cast<size_t>(o_n), 0.0);
      for (int o = 0; o < o_n; ++o) {
        double acc = b[o];
        for (int i = 0; i < i_n; ++i) acc += static_cast<double>(w[o * i_n + i]) * h[static_cast<size_t>(i)];
        out[static_cast<size_t>(o)] = (relu && acc < 0.0) ? 0.0 : acc;
      }
      h = out;
    };
    layer("l1", true);
    layer("l2", true);
    layer("l3", false);
    double s = 0.0;
    for (double v : h) s += v * v;
    return s;
  };

  Tape tape(params);
  auto h1 = tape.dense(tape.constant(x), "l1", Activation::Relu);
  auto h2 = tape.dense(h1, "l2", Activation::Relu);
  auto h3 = tape.dense(h2, "l3", Activation::None);
  const auto loss = tape.sum(tape.square(h3));
  const GradMap grads = tape.backward(loss);

  Rng pick(23);
  int checked = 0;
  while (checked < 20) {
    const auto names = params.names();
    const std::string name = names[static_cast<size_t>(pick.uniform_int(static_cast<int>(names.size())))];
    const int coord = pick.uniform_int(params.at(name).size());
    ParamSet plus = params, minus = params;
    plus.mutable_at(name)[coord] += 1e-4f;
    minus.mutable_at(name)[coord] -= 1e-4f;
    // divide by the realized (float32-rounded) step, not the nominal one
    const double h2 = static_cast<double>(plus.at(name)[coord]) -
                      static_cast<double>(minus.at(name)[coord]);
    const double fd = (forward_double(plus) - forward_double(minus)) / h2;
    const double ad = grads.count(name) ? grads.at(name)[coord] : 0.0;
    const double denom = std::max({std::fabs(fd), std::fabs(ad), 1e-3});
    CHECK(std::fabs(fd - ad) / denom < 1e-4);
    ++checked;
  }
}

TEST_CASE("backward requires a scalar loss") {
  ParamSet params;
  Tape tape(params);
  const auto v = tape.constant(Tensor({3}, {1.0f, 2.0f, 3.0f}));
  CHECK_THROWS_AS(tape.backward(v), ConfigError);
}

TEST_CASE("rmsprop: zero gradient leaves parameters unchanged") {
  ParamSet params;
  params.insert("p", Tensor({3}, {1.0f, -2.0f, 0.5f}));
  const Tensor before = params.at("p");
  RmsProp opt;
  GradMap grads;
  grads.emplace("p", Tensor({3}));
  opt.step(params, grads);
  CHECK(params.at("p").bytes_equal(before));
}

TEST_CASE("rmsprop: gradient entry for a frozen parameter is rejected") {
  ParamSet params;
  params.insert("p", Tensor({1}, {1.0f}));
  params.freeze("p");
  RmsProp opt;
  GradMap grads;
  grads.emplace("p", Tensor({1}, {0.1f}));
  CHECK_THROWS_AS(opt.step(params, grads), UsageError);
  CHECK(params.at("p")[0] == 1.0f);
}

TEST_CASE("rmsprop: three steps of constant gradient match the hand recurrence") {
  const float lr = 7e-4f, decay = 0.99f, eps = 1e-5f, g = 0.3f;
  ParamSet params;
  params.insert("p", Tensor({1}, {1.0f}));
  RmsProp opt(RmsPropConfig{lr, decay, eps});
  GradMap grads;
  grads.emplace("p", Tensor({1}, {g}));

  double s = 0.0, p = 1.0;
  for (int step = 0; step < 3; ++step) {
    opt.step(params, grads);
    s = decay * s + (1.0 - decay) * static_cast<double>(g) * g;
    p -= lr * g / std::sqrt(s + eps);
    CHECK(std::fabs(params.at("p")[0] - p) < 1e-6);
  }
}

TEST_CASE("rmsprop: NaN gradient aborts the step with nothing mutated") {
  ParamSet params;
  params.insert("a", Tensor({1}, {1.0f}));
  params.insert("b", Tensor({1}, {2.0f}));
  RmsProp opt;
  GradMap grads;
  grads.emplace("a", Tensor({1}, {0.5f}));
  grads.emplace("b", Tensor({1}, {std::nanf("")}));
  CHECK_THROWS_AS(opt.step(params, grads), NumericError);
  CHECK(params.at("a")[0] == 1.0f);
  CHECK(params.at("b")[0] == 2.0f);
}

TEST_CASE("clip_global_norm scales down to the bound") {
  GradMap grads;
  grads.emplace("p", Tensor({2}, {3.0f, 4.0f}));  // norm 5
  const float norm = clip_global_norm(grads, 1.0f);
  CHECK(norm == doctest::Approx(5.0f));
  CHECK(grads.at("p")[0] == doctest::Approx(0.6f));
  CHECK(grads.at("p")[1] == doctest::Approx(0.8f));
  // below the bound: untouched
  GradMap small;
  small.emplace("p", Tensor({2}, {0.3f, 0.4f}));
  clip_global_norm(small, 1.0f);
  CHECK(small.at("p")[0] == doctest::Approx(0.3f));
}

TEST_CASE("sample_categorical: degenerate distribution") {
  Rng rng(1);
  const std::vector<float> probs = {1.0f, 0.0f, 0.0f, 0.0f};
  for (int i = 0; i < 100; ++i) CHECK(sample_categorical(probs, rng) == 0);
}

TEST_CASE("sample_categorical: 100k draws of a fair coin land near 0.5") {
  Rng rng(42);
  const std::vector<float> probs = {0.5f, 0.5f};
  int ones = 0;
  for (int i = 0; i < 100000; ++i) ones += sample_categorical(probs, rng);
  const double freq = ones / 100000.0;
  CHECK(freq > 0.49);
  CHECK(freq < 0.51);
}

TEST_CASE("sample_categorical: same seed, same sequence") {
  Rng a(7), b(7);
  const std::vector<float> probs = {0.2f, 0.3f, 0.5f};
  for (int i = 0; i < 1000; ++i) CHECK(sample_categorical(probs, a) == sample_categorical(probs, b));
}

TEST_CASE("ParamSet: frozen bytes stay identical through optimizer traffic") {
  ParamSet params;
  Rng rng(9);
  params.insert("frozen.w", random_tensor({8, 8}, rng));
  params.insert("live.w", random_tensor({8, 8}, rng));
  params.freeze("frozen.w");
  const Tensor before = params.at("frozen.w");

  RmsProp opt;
  for (int i = 0; i < 10; ++i) {
    GradMap grads;
    grads.emplace("live.w", random_tensor({8, 8}, rng));
    opt.step(params, grads);
  }
  CHECK(params.at("frozen.w").bytes_equal(before));
}
