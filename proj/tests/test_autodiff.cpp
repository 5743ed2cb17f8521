// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>

#include "dartnet/adam.hpp"
#include "dartnet/grad_check.hpp"
#include "dartnet/tape.hpp"
#include "support/test_util.hpp"

using namespace dartnet;
using dartnet::testing::random_array;
using dartnet::testing::random_values;

namespace {

// Naive triple-loop reference, independent of the tape implementation.
std::vector<double> matmul_oracle(const std::vector<double>& a, const std::vector<double>& b,
                                  std::size_t m, std::size_t k, std::size_t n) {
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t p = 0; p < k; ++p) out[i * n + j] += a[i * k + p] * b[p * n + j];
    }
  }
  return out;
}

/// Builds a finite-difference case for one primitive kind: differentiable
/// points plus a function that applies the op and contracts the output
/// with a fixed random cotangent so index mix-ups cannot cancel out.
struct FdCase {
  std::vector<Array> points;
  TapeFn fn;
};

FdCase fd_case(OpKind kind, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> dim(1, 4);
  const auto weighted = [](Tape& tape, const Tensor& out, std::uint64_t seed) {
    std::mt19937_64 wrng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> w(out.size());
    for (double& v : w) v = dist(wrng);
    return tape.sum(tape.hadamard(out, tape.constant(out.shape(), w)));
  };
  const std::uint64_t cotangent_seed = rng();

  FdCase c;
  switch (kind) {
    case OpKind::matmul: {
      const std::size_t m = dim(rng), k = dim(rng), n = dim(rng);
      c.points = {random_array({m, k}, rng), random_array({k, n}, rng)};
      c.fn = [cotangent_seed, weighted](Tape& t, const std::vector<Tensor>& in) {
        return weighted(t, t.matmul(in[0], in[1]), cotangent_seed);
      };
      break;
    }
    case OpKind::add:
    case OpKind::hadamard: {
      const Shape shape = rng() % 2 ? Shape{dim(rng)} : Shape{dim(rng), dim(rng)};
      c.points = {random_array(shape, rng), random_array(shape, rng)};
      c.fn = [kind, cotangent_seed, weighted](Tape& t, const std::vector<Tensor>& in) {
        const Tensor out = kind == OpKind::add ? t.add(in[0], in[1]) : t.hadamard(in[0], in[1]);
        return weighted(t, out, cotangent_seed);
      };
      break;
    }
    case OpKind::concat: {
      const std::size_t rows = dim(rng);
      c.points = {random_array({rows, dim(rng)}, rng), random_array({rows, dim(rng)}, rng),
                  random_array({rows, dim(rng)}, rng)};
      c.fn = [cotangent_seed, weighted](Tape& t, const std::vector<Tensor>& in) {
        return weighted(t, t.concat({in[0], in[1], in[2]}), cotangent_seed);
      };
      break;
    }
    case OpKind::scale: {
      std::uniform_real_distribution<double> fdist(-2.0, 2.0);
      const double factor = fdist(rng);
      c.points = {random_array({dim(rng)}, rng)};
      c.fn = [factor, cotangent_seed, weighted](Tape& t, const std::vector<Tensor>& in) {
        return weighted(t, t.scale(in[0], factor), cotangent_seed);
      };
      break;
    }
    case OpKind::sigmoid:
    case OpKind::tanh_: {
      c.points = {random_array({dim(rng)}, rng, -2.0, 2.0)};
      c.fn = [kind, cotangent_seed, weighted](Tape& t, const std::vector<Tensor>& in) {
        const Tensor out = kind == OpKind::sigmoid ? t.sigmoid(in[0]) : t.tanh(in[0]);
        return weighted(t, out, cotangent_seed);
      };
      break;
    }
    case OpKind::mean_rows: {
      c.points = {random_array({dim(rng), dim(rng)}, rng)};
      c.fn = [cotangent_seed, weighted](Tape& t, const std::vector<Tensor>& in) {
        return weighted(t, t.mean_rows(in[0]), cotangent_seed);
      };
      break;
    }
    case OpKind::affine: {
      const std::size_t m = dim(rng), p = dim(rng), q = dim(rng);
      c.points = {random_array({m, p}, rng), random_array({p, q}, rng), random_array({q}, rng)};
      c.fn = [cotangent_seed, weighted](Tape& t, const std::vector<Tensor>& in) {
        return weighted(t, t.affine(in[0], in[1], in[2]), cotangent_seed);
      };
      break;
    }
    case OpKind::row: {
      const std::size_t n = dim(rng) + 1;
      const std::size_t index = rng() % n;
      c.points = {random_array({n, dim(rng)}, rng)};
      c.fn = [index, cotangent_seed, weighted](Tape& t, const std::vector<Tensor>& in) {
        return weighted(t, t.row(in[0], index), cotangent_seed);
      };
      break;
    }
    case OpKind::rows: {
      const std::size_t n = dim(rng) + 1;
      // duplicate indices exercise the scatter-add accumulation
      std::vector<std::size_t> indices = {rng() % n, rng() % n, rng() % n, rng() % n};
      c.points = {random_array({n, dim(rng)}, rng)};
      c.fn = [indices, cotangent_seed, weighted](Tape& t, const std::vector<Tensor>& in) {
        return weighted(t, t.rows(in[0], indices), cotangent_seed);
      };
      break;
    }
    case OpKind::stack_rows: {
      const std::size_t n = dim(rng);
      c.points = {random_array({n}, rng), random_array({n}, rng), random_array({n}, rng)};
      c.fn = [cotangent_seed, weighted](Tape& t, const std::vector<Tensor>& in) {
        return weighted(t, t.stack_rows({in[0], in[1], in[2]}), cotangent_seed);
      };
      break;
    }
    case OpKind::slice: {
      const std::size_t n = dim(rng) + 2;
      const std::size_t offset = rng() % (n - 1);
      const std::size_t length = 1 + rng() % (n - offset - 1);
      c.points = {random_array({n}, rng)};
      c.fn = [offset, length, cotangent_seed, weighted](Tape& t, const std::vector<Tensor>& in) {
        return weighted(t, t.slice(in[0], offset, length), cotangent_seed);
      };
      break;
    }
    case OpKind::sum: {
      c.points = {random_array({dim(rng) + 1}, rng)};
      c.fn = [](Tape& t, const std::vector<Tensor>& in) { return t.sum(in[0]); };
      break;
    }
    case OpKind::mse: {
      const Shape shape{dim(rng) + 1};
      c.points = {random_array(shape, rng), random_array(shape, rng)};
      c.fn = [](Tape& t, const std::vector<Tensor>& in) { return t.mse(in[0], in[1]); };
      break;
    }
    case OpKind::cross_entropy: {
      const std::size_t n = dim(rng) + 1;
      const std::size_t index = rng() % n;
      c.points = {random_array({n}, rng, -2.0, 2.0)};
      c.fn = [index](Tape& t, const std::vector<Tensor>& in) { return t.cross_entropy(in[0], index); };
      break;
    }
    case OpKind::leaf:
      break;
  }
  return c;
}

const std::vector<OpKind> kAllKinds = {
    OpKind::matmul,    OpKind::add,   OpKind::concat, OpKind::scale,  OpKind::sigmoid,
    OpKind::tanh_,     OpKind::hadamard, OpKind::mean_rows, OpKind::affine, OpKind::row,
    OpKind::rows,      OpKind::stack_rows, OpKind::slice, OpKind::sum,    OpKind::mse,
    OpKind::cross_entropy};

}  // namespace

TEST_SUITE("autodiff") {

TEST_CASE("sigmoid of zero is one half") {
  Tape tape;
  const Tensor out = tape.apply(OpKind::sigmoid, {tape.constant({1}, {0.0})});
  CHECK(out.values() == std::vector<double>{0.5});
}

TEST_CASE("mean_rows averages down the first axis") {
  Tape tape;
  const Tensor out = tape.apply(OpKind::mean_rows, {tape.constant({2, 2}, {1, 3, 3, 5})});
  CHECK(out.values() == std::vector<double>{2.0, 4.0});
}

TEST_CASE("matmul matches the naive triple-loop oracle") {
  std::mt19937_64 rng(11);
  const Array a = random_array({2, 3}, rng);
  const Array b = random_array({3, 4}, rng);
  Tape tape;
  const Tensor out = tape.matmul(tape.constant(a), tape.constant(b));
  REQUIRE(out.shape() == Shape{2, 4});
  const auto expected = matmul_oracle(a.values, b.values, 2, 3, 4);
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CHECK(out.values()[i] == doctest::Approx(expected[i]).epsilon(1e-12));
  }
}

TEST_CASE("vector-matrix matmul") {
  Tape tape;
  const Tensor out = tape.matmul(tape.constant({2}, {1.0, 2.0}), tape.constant({2, 2}, {1, 2, 3, 4}));
  CHECK(out.shape() == Shape{2});
  CHECK(out.values() == std::vector<double>{7.0, 10.0});
}

TEST_CASE("backward of x*x at 3 gives 6") {
  Tape tape;
  const Tensor x = tape.leaf(Array({1}, {3.0}), true);
  const Tensor y = tape.sum(tape.hadamard(x, x));
  tape.backward(y);
  CHECK(tape.grad(x) == std::vector<double>{6.0});
  CHECK(tape.grad(y) == std::vector<double>{1.0});
}

TEST_CASE("mse of a one-layer affine map passes the finite-difference check") {
  std::mt19937_64 rng(5);
  const Array x = random_array({3}, rng);
  const Array target = random_array({2}, rng);
  std::vector<Array> points = {random_array({3, 2}, rng), random_array({2}, rng)};
  const auto fn = [&x, &target](Tape& t, const std::vector<Tensor>& in) {
    return t.mse(t.affine(t.constant(x), in[0], in[1]), t.constant(target));
  };
  const GradCheckReport report = grad_check(fn, points, 1e-5, 1e-4);
  CHECK(report.pass);
  CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("cross-entropy gradient at uniform logits") {
  Tape tape;
  const Tensor logits = tape.leaf(Array({3}, {0.0, 0.0, 0.0}), true);
  const Tensor loss = tape.cross_entropy(logits, 1);
  tape.backward(loss);
  const auto g = tape.grad(logits);
  CHECK(g[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(g[1] == doctest::Approx(1.0 / 3.0 - 1.0).epsilon(1e-12));
  CHECK(g[2] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("mse values") {
  Tape tape;
  SUBCASE("identical inputs give zero") {
    const Tensor p = tape.constant({3}, {1, 2, 3});
    CHECK(tape.mse(p, p).scalar() == 0.0);
  }
  SUBCASE("hand example") {
    CHECK(tape.mse(tape.constant({2}, {1, 2}), tape.constant({2}, {0, 0})).scalar() == 2.5);
  }
  SUBCASE("random pair matches a scalar loop") {
    std::mt19937_64 rng(17);
    const auto a = random_values(10, rng);
    const auto b = random_values(10, rng);
    double expected = 0.0;
    for (std::size_t i = 0; i < 10; ++i) expected += (a[i] - b[i]) * (a[i] - b[i]);
    expected /= 10.0;
    const double got = tape.mse(tape.constant({10}, a), tape.constant({10}, b)).scalar();
    CHECK(std::abs(got - expected) < 1e-12);
  }
  SUBCASE("shape mismatch is rejected") {
    CHECK_THROWS_AS(tape.mse(tape.constant({2}, {1, 2}), tape.constant({3}, {1, 2, 3})),
                    std::invalid_argument);
  }
}

TEST_CASE("cross-entropy values") {
  Tape tape;
  SUBCASE("uniform logits give log M") {
    for (std::size_t m : {2, 5, 9}) {
      const Tensor logits = tape.constant({m}, std::vector<double>(m, 0.3));
      CHECK(tape.cross_entropy(logits, m / 2).scalar() == doctest::Approx(std::log(m)).epsilon(1e-12));
    }
  }
  SUBCASE("huge logit gap stays finite") {
    const double loss = tape.cross_entropy(tape.constant({2}, {1000.0, 0.0}), 0).scalar();
    CHECK(std::isfinite(loss));
    CHECK(loss == doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("random case matches the direct softmax formula") {
    std::mt19937_64 rng(23);
    const auto z = random_values(5, rng, -3.0, 3.0);
    double denom = 0.0;
    for (double v : z) denom += std::exp(v);
    const double expected = -std::log(std::exp(z[2]) / denom);
    const double got = tape.cross_entropy(tape.constant({5}, z), 2).scalar();
    CHECK(std::abs(got - expected) < 1e-10);
  }
  SUBCASE("class index out of range is rejected") {
    CHECK_THROWS_AS(tape.cross_entropy(tape.constant({2}, {0, 0}), 2), std::invalid_argument);
  }
}

TEST_CASE("shift invariance of cross-entropy") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const auto z = random_values(6, rng, -2.0, 2.0);
    std::uniform_real_distribution<double> cdist(-50.0, 50.0);
    const double c = cdist(rng);
    auto shifted = z;
    for (double& v : shifted) v += c;
    Tape tape;
    const double a = tape.cross_entropy(tape.constant({6}, z), 3).scalar();
    const double b = tape.cross_entropy(tape.constant({6}, shifted), 3).scalar();
    CHECK(std::abs(a - b) < 1e-10);
  }
}

TEST_CASE("concat then split returns the parts and routes gradients") {
  Tape tape;
  const Tensor a = tape.leaf(Array({3}, {1, 2, 3}), true);
  const Tensor b = tape.leaf(Array({2}, {4, 5}), true);
  const Tensor joined = tape.concat({a, b});
  const Tensor s1 = tape.slice(joined, 0, 3);
  const Tensor s2 = tape.slice(joined, 3, 2);
  CHECK(s1.values() == a.values());
  CHECK(s2.values() == b.values());

  const Tensor w = tape.constant({3}, {10, 20, 30});
  tape.backward(tape.sum(tape.hadamard(s1, w)));
  CHECK(tape.grad(a) == std::vector<double>{10, 20, 30});
  CHECK(tape.grad(b) == std::vector<double>{0, 0});
}

TEST_CASE("every primitive kind passes finite differences over random seeds") {
  for (OpKind kind : kAllKinds) {
    CAPTURE(op_name(kind));
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      std::mt19937_64 rng(seed * 7919 + 13);
      FdCase c = fd_case(kind, rng);
      const GradCheckReport report = grad_check(c.fn, c.points, 1e-5, 1e-4);
      CAPTURE(seed);
      CAPTURE(report.max_rel_err);
      CHECK(report.pass);
    }
  }
}

TEST_CASE("tape replay is bit-identical") {
  const auto run = [](std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Tape tape;
    const Tensor a = tape.leaf(random_array({3, 4}, rng), true);
    const Tensor b = tape.leaf(random_array({4, 2}, rng), true);
    const Tensor h = tape.tanh(tape.matmul(a, b));
    const Tensor loss = tape.mse(tape.mean_rows(h), tape.constant({2}, {0.1, -0.2}));
    tape.backward(loss);
    return std::tuple{loss.scalar(), tape.grad(a), tape.grad(b)};
  };
  const auto [l1, ga1, gb1] = run(99);
  const auto [l2, ga2, gb2] = run(99);
  CHECK(l1 == l2);
  CHECK(ga1 == ga2);
  CHECK(gb1 == gb2);
}

TEST_CASE("shape errors carry the kind and shapes") {
  Tape tape;
  const Tensor a = tape.constant({2, 3}, std::vector<double>(6, 1.0));
  const Tensor b = tape.constant({2, 3}, std::vector<double>(6, 1.0));
  CHECK_THROWS_WITH_AS(tape.matmul(a, b), doctest::Contains("matmul"), std::invalid_argument);
  CHECK_THROWS_AS(tape.mean_rows(tape.constant({3}, {1, 2, 3})), std::invalid_argument);
  CHECK_THROWS_AS(tape.backward(a), std::invalid_argument);  // non-scalar root
}

TEST_CASE("mean over zero rows is rejected") {
  Tape tape;
  const Tensor empty = tape.constant({0, 3}, {});
  CHECK_THROWS_AS(tape.mean_rows(empty), std::invalid_argument);
}

TEST_CASE("adam") {
  SUBCASE("zero gradient leaves parameters unchanged and advances the step") {
    Array p({2}, {0.25, -0.75});
    const Array before = p;
    AdamState state({&p}, {});
    CHECK(adam_step({&p}, {{0.0, 0.0}}, state));
    CHECK(p.values == before.values);
    CHECK(state.step_count() == 1);
  }
  SUBCASE("first step moves by about -lr * sign(g)") {
    Array p({3}, {0.5, 0.5, 0.5});
    AdamConfig config;
    AdamState state({&p}, config);
    CHECK(adam_step({&p}, {{0.3, -0.7, 4.0}}, state));
    const std::vector<double> sign = {1.0, -1.0, 1.0};
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(std::abs((p.values[i] - 0.5) + config.lr * sign[i]) < config.lr * 1e-6);
    }
  }
  SUBCASE("three steps on x squared decrease the objective") {
    Array x({1}, {1.0});
    AdamConfig config;
    config.lr = 0.1;
    AdamState state({&x}, config);
    double prev = x.values[0] * x.values[0];
    for (int i = 0; i < 3; ++i) {
      CHECK(adam_step({&x}, {{2.0 * x.values[0]}}, state));
      const double now = x.values[0] * x.values[0];
      CHECK(now < prev);
      prev = now;
    }
  }
  SUBCASE("non-finite gradient rejects the step") {
    Array p({1}, {1.0});
    AdamState state({&p}, {});
    CHECK_FALSE(adam_step({&p}, {{std::numeric_limits<double>::quiet_NaN()}}, state));
    CHECK(p.values[0] == 1.0);
    CHECK(state.step_count() == 0);
  }
}

TEST_CASE("clip_global_norm") {
  std::vector<std::vector<double>> grads = {{3.0}, {4.0}};
  const double norm = clip_global_norm(grads, 1.0);
  CHECK(norm == doctest::Approx(5.0));
  CHECK(grads[0][0] == doctest::Approx(0.6));
  CHECK(grads[1][0] == doctest::Approx(0.8));
  std::vector<std::vector<double>> small = {{0.1}};
  clip_global_norm(small, 1.0);
  CHECK(small[0][0] == 0.1);
}

TEST_CASE("grad_check harness") {
  SUBCASE("sum of sigmoids on a random 4-vector") {
    std::mt19937_64 rng(3);
    const auto fn = [](Tape& t, const std::vector<Tensor>& in) { return t.sum(t.sigmoid(in[0])); };
    const GradCheckReport report = grad_check(fn, {random_array({4}, rng)}, 1e-5, 1e-6);
    CHECK(report.pass);
    CHECK(report.max_rel_err < 1e-6);
  }
  SUBCASE("constant function has zero gradients on both sides") {
    const auto fn = [](Tape& t, const std::vector<Tensor>&) { return t.scalar_constant(4.25); };
    const GradCheckReport report = grad_check(fn, {Array({3}, {1, 2, 3})}, 1e-5, 1e-12);
    CHECK(report.pass);
    CHECK(report.max_rel_err == 0.0);
  }
  SUBCASE("non-finite values are reported, not thrown") {
    const auto fn = [](Tape& t, const std::vector<Tensor>& in) {
      return t.sum(t.scale(in[0], std::numeric_limits<double>::infinity()));
    };
    const GradCheckReport report = grad_check(fn, {Array({1}, {1.0})});
    CHECK_FALSE(report.pass);
    CHECK_FALSE(report.finite);
  }
}

}  // TEST_SUITE
