#include <cmath>
#include <cstring>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "f2s/adam.hpp"
#include "f2s/error.hpp"
#include "f2s/gradcheck.hpp"
#include "f2s/rng.hpp"
#include "f2s/tape.hpp"
#include "f2s/tensor.hpp"

using namespace f2s;

namespace {

// Rebuilds a fresh graph from the current parameter storage on every call
// and compares the tape's analytic gradients against central differences.
double check_tape_graph(const std::function<GradTape::Value(GradTape&)>& build,
                        std::span<const ParamBinding> params) {
  GradTape tape;
  GradTape::Value loss = build(tape);
  tape.backward(loss);
  std::map<std::string, std::vector<double>> analytic;
  for (const auto& b : params) {
    if (tape.has_param(b.name)) analytic[b.name] = tape.grad(b.name);
  }
  auto f = [&]() {
    GradTape t;
    return t.scalar(build(t));
  };
  return grad_check(f, params, analytic).max_rel_error;
}

Tensor1 rand_vec(std::size_t n, Rng& rng, double lo = -2.0, double hi = 2.0) {
  Tensor1 v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = rng.uniform(lo, hi);
  return v;
}

Tensor2 rand_mat(std::size_t r, std::size_t c, Rng& rng) {
  Tensor2 m(r, c);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-2.0, 2.0);
  return m;
}

}  // namespace

TEST_CASE("linear_forward worked examples") {
  Tensor2 I(2, 2);
  I.at(0, 0) = 1.0;
  I.at(1, 1) = 1.0;
  Tensor1 x{3.0, -4.0};
  Tensor1 zero(2);
  CHECK(linear_forward(x, I, zero) == x);

  Tensor2 W(2, 2);
  W.at(0, 0) = 1.0;
  W.at(0, 1) = 1.0;
  W.at(1, 0) = 2.0;
  W.at(1, 1) = 0.0;
  Tensor1 b{0.0, 1.0};
  Tensor1 y = linear_forward(Tensor1{1.0, 2.0}, W, b);
  CHECK(y == Tensor1{3.0, 3.0});

  Tensor2 Z(3, 2);
  CHECK(linear_forward(Tensor1{5.0, 6.0}, Z, Tensor1(3)) == Tensor1(3));

  CHECK_THROWS_AS(linear_forward(Tensor1{1.0}, W, b), ConfigError);
  CHECK_THROWS_AS(linear_forward(Tensor1{1.0, 2.0}, W, Tensor1(3)), ConfigError);
}

TEST_CASE("softmax examples and stability") {
  Tensor1 p = softmax(Tensor1{0.0, std::log(3.0)});
  CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-12));

  // Shift invariance.
  Tensor1 a = softmax(Tensor1{0.3, -1.2, 2.4});
  Tensor1 b = softmax(Tensor1{100.3, 98.8, 102.4});
  for (std::size_t i = 0; i < 3; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));

  // Large inputs do not overflow.
  Tensor1 big = softmax(Tensor1{1000.0, 1000.1});
  CHECK(std::isfinite(big[0]));
  CHECK(big[0] + big[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(big[1] > big[0]);

  CHECK_THROWS_AS(softmax(Tensor1{}), ConfigError);

  Rng rng(11);
  for (int k = 0; k < 50; ++k) {
    Tensor1 v = rand_vec(1 + rng.index(8), rng, -30.0, 30.0);
    Tensor1 s = softmax(v);
    double z = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      CHECK(s[i] >= 0.0);
      z += s[i];
    }
    CHECK(z == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("sigmoid, relu, mse, dot, concat") {
  Tensor1 s = sigmoid(Tensor1{0.0, 100.0, -100.0});
  CHECK(s[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s[2] == doctest::Approx(0.0).epsilon(1e-12));

  CHECK(relu(Tensor1{-1.5, 0.0, 2.5}) == Tensor1{0.0, 0.0, 2.5});

  CHECK(mse(Tensor1{1.0, 2.0}, Tensor1{1.0, 2.0}) == 0.0);
  CHECK(mse(Tensor1{0.0, 0.0}, Tensor1{1.0, 1.0}) == doctest::Approx(1.0));
  CHECK(mse(Tensor1{0.0, 0.0, 0.0}, Tensor1{1.0, 2.0, 3.0}) ==
        doctest::Approx(14.0 / 3.0).epsilon(1e-15));
  CHECK_THROWS_AS(mse(Tensor1{1.0}, Tensor1{1.0, 2.0}), ConfigError);
  CHECK_THROWS_AS(mse(Tensor1{}, Tensor1{}), ConfigError);

  CHECK(dot(Tensor1{1.0, 2.0, 3.0}, Tensor1{4.0, 5.0, 6.0}) == doctest::Approx(32.0));
  CHECK_THROWS_AS(dot(Tensor1{1.0}, Tensor1{1.0, 2.0}), ConfigError);

  CHECK(concat(Tensor1{1.0, 2.0}, Tensor1{3.0}) == Tensor1{1.0, 2.0, 3.0});
  const Tensor1 a{1.0};
  const Tensor1 b{2.0, 3.0};
  const Tensor1* parts[] = {&a, &b};
  CHECK(concat(std::span<const Tensor1* const>(parts)) == Tensor1{1.0, 2.0, 3.0});
}

TEST_CASE("require_finite and quantize") {
  CHECK_NOTHROW(require_finite(Tensor1{1.0, -2.0}, "v"));
  CHECK_THROWS_AS(require_finite(Tensor1{1.0, std::nan("")}, "v"), DataError);
  CHECK_THROWS_AS(require_finite(Tensor1{1.0, INFINITY}, "v"), DataError);

  CHECK(quantize_f32(0.5) == 0.5);
  CHECK(quantize_f32(0.1) == static_cast<double>(0.1f));
  CHECK(quantize_f32(quantize_f32(0.1)) == quantize_f32(0.1));
  Tensor1 t{0.1, 0.2};
  quantize_f32(t);
  CHECK(t[0] == static_cast<double>(0.1f));
}

TEST_CASE("rng determinism and ranges") {
  Rng a(99), b(99);
  for (int i = 0; i < 10; ++i) CHECK(a.uniform() == b.uniform());

  Rng r(5);
  for (int i = 0; i < 1000; ++i) {
    double u = r.uniform(-3.0, 7.0);
    CHECK(u >= -3.0);
    CHECK(u < 7.0);
  }

  // fork is const and repeatable; sibling streams differ.
  Rng base(1234);
  Rng f1 = base.fork(1);
  Rng f1b = base.fork(1);
  Rng f2 = base.fork(2);
  CHECK(f1.uniform() == f1b.uniform());
  CHECK(f1.seed() != f2.seed());

  std::vector<int> v1{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, v2 = v1;
  Rng s1(42), s2(42);
  s1.shuffle(v1);
  s2.shuffle(v2);
  CHECK(v1 == v2);
  std::vector<int> sorted = v1;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});

  Rng g(7);
  double mean = 0.0;
  for (int i = 0; i < 10000; ++i) {
    double x = g.gaussian();
    CHECK(std::isfinite(x));
    mean += x;
  }
  CHECK(std::abs(mean / 10000.0) < 0.06);
}

TEST_CASE("tape ops match central differences") {
  Rng rng(123);
  Tensor2 W = rand_mat(2, 3, rng);
  Tensor1 b = rand_vec(2, rng);
  Tensor1 x = rand_vec(3, rng);
  Tensor1 y = rand_vec(3, rng);
  // Keep relu inputs away from the kink.
  for (std::size_t i = 0; i < x.size(); ++i)
    if (std::abs(x[i]) < 0.05) x[i] = 0.5;

  std::vector<ParamBinding> pw{{"W", W.data(), W.size()},
                               {"b", b.data(), b.size()},
                               {"x", x.data(), x.size()}};
  std::vector<ParamBinding> pxy{{"x", x.data(), x.size()}, {"y", y.data(), y.size()}};

  SUBCASE("linear -> relu -> sum") {
    auto build = [&](GradTape& t) {
      auto loss = t.sum(t.relu(t.linear(t.param("W", W), t.param("b", b), t.param("x", x))));
      return loss;
    };
    CHECK(check_tape_graph(build, pw) < 1e-6);
  }

  SUBCASE("softmax -> dot with constant") {
    Tensor1 c = rand_vec(3, rng);
    auto build = [&](GradTape& t) { return t.dot(t.softmax(t.param("x", x)), t.input(c)); };
    CHECK(check_tape_graph(build, {pw.data() + 2, 1}) < 1e-6);
  }

  SUBCASE("sigmoid -> sum") {
    auto build = [&](GradTape& t) { return t.sum(t.sigmoid(t.param("x", x))); };
    CHECK(check_tape_graph(build, {pw.data() + 2, 1}) < 1e-6);
  }

  SUBCASE("elementwise add/sub/mul/square") {
    auto build = [&](GradTape& t) {
      auto xv = t.param("x", x);
      auto yv = t.param("y", y);
      return t.sum(t.square(t.sub(t.mul(xv, yv), t.add(xv, yv))));
    };
    CHECK(check_tape_graph(build, pxy) < 1e-6);
  }

  SUBCASE("element, add_scalar, scale, concat, dot") {
    auto build = [&](GradTape& t) {
      auto xv = t.param("x", x);
      auto yv = t.param("y", y);
      std::vector<GradTape::Value> parts{xv, yv};
      auto joined = t.concat(parts);
      auto d = t.dot(joined, joined);
      return t.scale(t.add_scalar(t.add(d, t.element(xv, 1)), 2.5), -1.5);
    };
    CHECK(check_tape_graph(build, pxy) < 1e-6);
  }

  SUBCASE("taped values equal eager kernels bitwise") {
    GradTape t;
    auto out = t.linear(t.param("W", W), t.param("b", b), t.param("x", x));
    CHECK(t.value(out) == linear_forward(x, W, b).values());
    auto sm = t.softmax(out);
    CHECK(t.value(sm) == softmax(linear_forward(x, W, b)).values());
  }
}

TEST_CASE("stop_grad blocks the gradient") {
  Tensor1 x{0.4, -1.2};
  GradTape t;
  auto xv = t.param("x", x);
  auto loss = t.dot(t.stop_grad(xv), xv);  // d/dx should see only the live side
  t.backward(loss);
  const auto& g = t.grad("x");
  CHECK(g[0] == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(g[1] == doctest::Approx(-1.2).epsilon(1e-15));

  GradTape t2;
  auto xv2 = t2.param("x", x);
  auto dead = t2.sum(t2.stop_grad(xv2));
  t2.backward(dead);
  CHECK(t2.grad("x") == std::vector<double>{0.0, 0.0});
}

TEST_CASE("tape misuse is rejected") {
  Tensor1 x{1.0, 2.0};
  {
    GradTape t;
    auto v = t.param("x", x);
    auto loss = t.sum(v);
    t.backward(loss);
    CHECK_THROWS_AS(t.backward(loss), InternalError);
  }
  {
    GradTape t;
    auto v = t.param("x", x);
    CHECK_THROWS_AS(t.backward(v), InternalError);  // non-scalar loss
  }
  {
    GradTape t;
    t.param("x", x);
    CHECK_THROWS_AS(t.param("x", x), InternalError);
  }
  {
    GradTape t;
    t.param("x", x);
    CHECK_THROWS_AS(t.grad("nope"), InternalError);
  }
}

TEST_CASE("adam first step and zero gradient") {
  Tensor1 theta{0.5};
  std::vector<ParamBinding> params{{"p", theta.data(), 1}};
  AdamState st;

  std::vector<double> g{0.7};
  auto grad = [&](const std::string&) { return std::span<const double>(g); };
  adam_step(params, grad, st);
  CHECK(st.step_count() == 1);
  // First bias-corrected step moves by ~lr regardless of |g| (modulo the
  // 32-bit re-quantization of the stored value).
  CHECK(theta[0] == doctest::Approx(0.5 - 1e-4).epsilon(1e-6));

  Tensor1 frozen{0.25};
  std::vector<ParamBinding> params2{{"p", frozen.data(), 1}};
  AdamState st2;
  std::vector<double> zero{0.0};
  auto gz = [&](const std::string&) { return std::span<const double>(zero); };
  adam_step(params2, gz, st2);
  CHECK(frozen[0] == 0.25);
}

TEST_CASE("adam rejects bad gradients without touching parameters") {
  Tensor1 theta{1.0, 2.0};
  std::vector<ParamBinding> params{{"p", theta.data(), 2}};
  AdamState st;
  std::vector<double> g{0.1, std::nan("")};
  auto grad = [&](const std::string&) { return std::span<const double>(g); };
  CHECK_THROWS_AS(adam_step(params, grad, st), DataError);
  CHECK(theta == Tensor1{1.0, 2.0});
  CHECK(st.step_count() == 0);

  std::vector<double> wrong{0.1};
  auto gw = [&](const std::string&) { return std::span<const double>(wrong); };
  CHECK_THROWS_AS(adam_step(params, gw, st), InternalError);
}

TEST_CASE("adam trajectories are deterministic") {
  auto run = [](std::vector<double>& out) {
    Tensor1 theta{0.3, -0.8, 1.7};
    std::vector<ParamBinding> params{{"p", theta.data(), 3}};
    AdamState st;
    Rng rng(55);
    for (int step = 0; step < 10; ++step) {
      std::vector<double> g{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                            rng.uniform(-1.0, 1.0)};
      auto grad = [&](const std::string&) { return std::span<const double>(g); };
      adam_step(params, grad, st);
    }
    out = theta.values();
  };
  std::vector<double> a, b;
  run(a);
  run(b);
  CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

TEST_CASE("grad_check contract") {
  Tensor1 x{0.5, -0.25};
  Tensor1 unused{3.0};
  std::vector<ParamBinding> params{{"x", x.data(), 2}, {"unused", unused.data(), 1}};

  // f ignores "unused"; an absent analytic entry means zero, which matches.
  auto f = [&]() { return x[0] * x[0] + 2.0 * x[1]; };
  std::map<std::string, std::vector<double>> analytic{{"x", {2.0 * x[0], 2.0}}};
  GradCheckResult r = grad_check(f, params, analytic);
  CHECK(r.max_rel_error < 1e-6);

  std::map<std::string, std::vector<double>> bad{{"x", {1.0}}};
  CHECK_THROWS_AS(grad_check(f, params, bad), InternalError);
}
