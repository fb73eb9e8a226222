#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "glassbox/rng.hpp"
#include "glassbox/tensor.hpp"

using namespace glassbox::ad;
using glassbox::Rng;

namespace {

Tensor random_tensor(Rng& rng, std::vector<int> shape, double scale = 1.0) {
  Tensor t(shape);
  for (auto& v : t.data) v = static_cast<float>(rng.uniform(-scale, scale));
  return t;
}

// Values bounded away from zero so relu's kink never sits inside the
// finite-difference stencil.
Tensor random_tensor_off_kink(Rng& rng, std::vector<int> shape) {
  Tensor t(shape);
  for (auto& v : t.data) {
    const double sign = rng.uniform01() < 0.5 ? -1.0 : 1.0;
    v = static_cast<float>(sign * rng.uniform(0.05, 1.0));
  }
  return t;
}

using BuildFn = std::function<Var(Tape&, const std::vector<Var>&)>;

double eval_weighted(const BuildFn& build, const std::vector<Tensor>& inputs,
                     const Tensor& weights) {
  Tape tape;
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(tape.input(t, false));
  Var out = build(tape, vars);
  Var w = tape.input(weights, false);
  Var loss = tape.sum(tape.mul(out, w));
  return tape.value(loss).data[0];
}

// Central finite differences vs reverse mode, step 1e-3, difference quotient
// accumulated in f64.
void check_grad(const BuildFn& build, std::vector<Tensor> inputs,
                std::uint64_t seed, double tol = 1e-3) {
  Tape tape;
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(tape.input(t, true));
  Var out = build(tape, vars);
  Rng wrng(seed ^ 0xABCDEF);
  Tensor weights = random_tensor(wrng, tape.value(out).shape);
  Var w = tape.input(weights, false);
  Var loss = tape.sum(tape.mul(out, w));
  tape.backward(loss);

  const float h = 1e-3f;
  for (std::size_t which = 0; which < inputs.size(); ++which) {
    const Tensor& analytic = tape.grad(vars[which]);
    for (std::size_t c = 0; c < inputs[which].data.size(); ++c) {
      const float keep = inputs[which].data[c];
      inputs[which].data[c] = keep + h;
      const double up = eval_weighted(build, inputs, weights);
      inputs[which].data[c] = keep - h;
      const double down = eval_weighted(build, inputs, weights);
      inputs[which].data[c] = keep;
      const double fd = (up - down) / (2.0 * static_cast<double>(h));
      const double an = analytic.data[c];
      const double err = std::abs(fd - an);
      const double bound = tol * std::max({1.0, std::abs(fd), std::abs(an)});
      CAPTURE(which);
      CAPTURE(c);
      CAPTURE(fd);
      CAPTURE(an);
      REQUIRE(err <= bound);
    }
  }
}

}  // namespace

TEST_CASE("forward op definitions") {
  Tape t;
  SUBCASE("softmax of a constant row is uniform") {
    Var x = t.input(Tensor::from({1, 3}, {0, 0, 0}));
    const Tensor& y = t.value(t.softmax_rows(x));
    for (float v : y.data) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-7));
  }
  SUBCASE("matmul by identity is identity") {
    Var eye = t.input(Tensor::from({2, 2}, {1, 0, 0, 1}));
    Var a = t.input(Tensor::from({2, 2}, {1, 2, 3, 4}));
    const Tensor& y = t.value(t.matmul(eye, a));
    CHECK(y.data == std::vector<float>{1, 2, 3, 4});
  }
  SUBCASE("layer_norm of a constant row is zero before affine") {
    Var x = t.input(Tensor::from({1, 4}, {5, 5, 5, 5}));
    Var g = t.input(Tensor::from({1, 4}, {1, 1, 1, 1}));
    Var b = t.input(Tensor::from({1, 4}, {0, 0, 0, 0}));
    const Tensor& y = t.value(t.layer_norm(x, g, b));
    for (float v : y.data) CHECK(v == doctest::Approx(0.0).epsilon(1e-6));
  }
  SUBCASE("softmax stays finite for magnitude 1e4 inputs") {
    Var x = t.input(Tensor::from({1, 3}, {1e4f, -1e4f, 0.0f}));
    const Tensor& y = t.value(t.softmax_rows(x));
    double s = 0.0;
    for (float v : y.data) {
      CHECK(std::isfinite(v));
      s += v;
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("shape mismatch names the op") {
    Var a = t.input(Tensor({2, 3}));
    Var b = t.input(Tensor({2, 3}));
    CHECK_THROWS_WITH_AS(t.matmul(a, b),
                         doctest::Contains("matmul"), std::invalid_argument);
  }
}

TEST_CASE("trivial backward identities") {
  SUBCASE("grad of sum is ones") {
    Tape t;
    Var x = t.input(Tensor::from({1, 3}, {1, 2, 3}), true);
    t.backward(t.sum(x));
    CHECK(t.grad(x).data == std::vector<float>{1, 1, 1});
  }
  SUBCASE("grad of sum of squares is 2x") {
    Tape t;
    Var x = t.input(Tensor::from({1, 2}, {1, 2}), true);
    Var sq = t.mul(x, x);
    t.backward(t.sum(sq));
    CHECK(t.grad(x).data == std::vector<float>{2, 4});
  }
  SUBCASE("backward twice errors") {
    Tape t;
    Var x = t.input(Tensor::from({1, 2}, {1, 2}), true);
    Var loss = t.sum(x);
    t.backward(loss);
    CHECK_THROWS_AS(t.backward(loss), std::logic_error);
  }
  SUBCASE("backward requires a scalar") {
    Tape t;
    Var x = t.input(Tensor::from({1, 2}, {1, 2}), true);
    CHECK_THROWS_AS(t.backward(x), std::invalid_argument);
  }
}

TEST_CASE("gradient checks across all ops over 100 seeds") {
  const std::vector<std::uint8_t> mask = {0, 1, 0, 0, 0, 1};
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    check_grad(
        [](Tape& t, const std::vector<Var>& v) { return t.matmul(v[0], v[1]); },
        {random_tensor(rng, {2, 3}), random_tensor(rng, {3, 4})}, seed);
    check_grad(
        [](Tape& t, const std::vector<Var>& v) { return t.add(v[0], v[1]); },
        {random_tensor(rng, {2, 3}), random_tensor(rng, {2, 3})}, seed);
    check_grad(
        [](Tape& t, const std::vector<Var>& v) { return t.add_row(v[0], v[1]); },
        {random_tensor(rng, {3, 4}), random_tensor(rng, {1, 4})}, seed);
    check_grad(
        [](Tape& t, const std::vector<Var>& v) { return t.scale(v[0], -1.7f); },
        {random_tensor(rng, {2, 3})}, seed);
    check_grad(
        [](Tape& t, const std::vector<Var>& v) { return t.mul(v[0], v[1]); },
        {random_tensor(rng, {2, 3}), random_tensor(rng, {2, 3})}, seed);
    check_grad(
        [](Tape& t, const std::vector<Var>& v) { return t.relu(v[0]); },
        {random_tensor_off_kink(rng, {2, 5})}, seed);
    check_grad(
        [](Tape& t, const std::vector<Var>& v) { return t.sigmoid(v[0]); },
        {random_tensor(rng, {2, 3})}, seed);
    check_grad(
        [](Tape& t, const std::vector<Var>& v) { return t.softmax_rows(v[0]); },
        {random_tensor(rng, {3, 4})}, seed);
    check_grad(
        [&mask](Tape& t, const std::vector<Var>& v) {
          // Moderate fill: a -1e30 fill would swamp the finite-difference
          // quotient of the weighted loss. The -1e30 path is covered by the
          // attention tests.
          return t.masked_fill(v[0], mask, -2.5f);
        },
        {random_tensor(rng, {2, 3})}, seed);
    check_grad(
        [](Tape& t, const std::vector<Var>& v) {
          return t.layer_norm(v[0], v[1], v[2]);
        },
        {random_tensor(rng, {3, 6}), random_tensor(rng, {1, 6}),
         random_tensor(rng, {1, 6})},
        seed);
    check_grad(
        [](Tape& t, const std::vector<Var>& v) { return t.transpose(v[0]); },
        {random_tensor(rng, {3, 4})}, seed);
    check_grad(
        [](Tape& t, const std::vector<Var>& v) {
          return t.reshape(v[0], {6, 2});
        },
        {random_tensor(rng, {3, 4})}, seed);
    check_grad(
        [](Tape& t, const std::vector<Var>& v) {
          return t.slice_rows(v[0], 1, 3);
        },
        {random_tensor(rng, {4, 3})}, seed);
    check_grad(
        [](Tape& t, const std::vector<Var>& v) {
          return t.slice_cols(v[0], 1, 4);
        },
        {random_tensor(rng, {3, 5})}, seed);
    check_grad(
        [](Tape& t, const std::vector<Var>& v) {
          return t.concat_rows({v[0], v[1]});
        },
        {random_tensor(rng, {2, 3}), random_tensor(rng, {3, 3})}, seed);
    check_grad(
        [](Tape& t, const std::vector<Var>& v) {
          return t.concat_cols({v[0], v[1]});
        },
        {random_tensor(rng, {2, 3}), random_tensor(rng, {2, 2})}, seed);
    check_grad(
        [](Tape& t, const std::vector<Var>& v) {
          return t.mean_pool_rows(v[0], 2);
        },
        {random_tensor(rng, {6, 3})}, seed);
    check_grad(
        [](Tape& t, const std::vector<Var>& v) {
          return t.embedding_add(v[0], v[1]);
        },
        {random_tensor(rng, {6, 3}), random_tensor(rng, {3, 3})}, seed);
    Tensor targets(std::vector<int>{4, 1});
    for (auto& v : targets.data) v = rng.uniform01() > 0.5 ? 1.0f : 0.0f;
    check_grad(
        [&targets](Tape& t, const std::vector<Var>& v) {
          return t.bce_with_logits(v[0], targets);
        },
        {random_tensor(rng, {4, 1}, 2.0)}, seed);
  }
}

TEST_CASE("three layer mlp gradients match finite differences") {
  // Every parameter and the input, through a composite graph.
  Rng rng(123);
  auto mlp = [](Tape& t, const std::vector<Var>& v) {
    Var h1 = t.relu(t.add_row(t.matmul(v[0], v[1]), v[2]));
    Var h2 = t.relu(t.add_row(t.matmul(h1, v[3]), v[4]));
    return t.add_row(t.matmul(h2, v[5]), v[6]);
  };
  check_grad(mlp,
             {random_tensor(rng, {4, 3}), random_tensor(rng, {3, 5}),
              random_tensor(rng, {1, 5}), random_tensor(rng, {5, 4}),
              random_tensor(rng, {1, 4}), random_tensor(rng, {4, 2}),
              random_tensor(rng, {1, 2})},
             123);
}

TEST_CASE("params accumulate gradients through the tape") {
  Param w("w", Tensor::from({2, 2}, {1, 2, 3, 4}));
  Tape t;
  Var x = t.input(Tensor::from({1, 2}, {1, 1}));
  Var y = t.matmul(x, t.param(w));
  t.backward(t.sum(y));
  // d sum(x W) / dW = x^T 1 = all-ones outer product here.
  CHECK(w.grad.data == std::vector<float>{1, 1, 1, 1});
}

TEST_CASE("adam") {
  SUBCASE("zero gradient leaves parameters unchanged while moments decay") {
    Tensor p = Tensor::from({1, 2}, {1.0f, -2.0f});
    Tensor g({1, 2});
    AdamState st;
    st.m = Tensor::from({1, 2}, {0.5f, 0.5f});
    st.v = Tensor::from({1, 2}, {0.25f, 0.25f});
    st.step = 3;
    // With g = 0 the step direction m-hat/(sqrt(v-hat)+eps) is nonzero, so
    // freeze the check to the moment update itself.
    adam_step(p, g, st, 0.0f);
    CHECK(p.data == std::vector<float>{1.0f, -2.0f});
    CHECK(st.m.data[0] == doctest::Approx(0.45f));
    CHECK(st.v.data[0] == doctest::Approx(0.25f * 0.999f));
  }
  SUBCASE("first step from zero state matches the hand-computed oracle") {
    Tensor p = Tensor::from({1, 3}, {0.0f, 0.0f, 0.0f});
    Tensor g = Tensor::from({1, 3}, {0.3f, -2.0f, 1e-5f});
    AdamState st;
    const float lr = 0.01f, b1 = 0.9f, b2 = 0.999f, eps = 1e-8f;
    adam_step(p, g, st, lr, b1, b2, eps);
    for (int j = 0; j < 3; ++j) {
      const double gd = g.data[j];
      const double mhat = (1.0 - b1) * gd / (1.0 - b1);
      const double vhat = (1.0 - b2) * gd * gd / (1.0 - b2);
      const double want = -lr * mhat / (std::sqrt(vhat) + eps);
      CHECK(p.data[j] == doctest::Approx(want).epsilon(1e-6));
    }
  }
  SUBCASE("two identical runs are bit-identical") {
    auto run = [] {
      Rng rng(5);
      Tensor p = random_tensor(rng, {4, 4});
      AdamState st;
      for (int it = 0; it < 50; ++it) {
        Tensor g = random_tensor(rng, {4, 4});
        adam_step(p, g, st, 3e-4f);
      }
      return p.data;
    };
    CHECK(run() == run());
  }
}
