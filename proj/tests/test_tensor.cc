#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "doctest.h"
#include "scama/tensor.h"

using scama::Graph;
using scama::Reduction;
using scama::Tensor;

namespace {

// Central-difference derivative of `f` with respect to leaf entry (t, i).
double fd_grad(const std::function<double()>& f, Tensor t, std::size_t i,
               double h = 1e-5) {
  double saved = t.value()[i];
  t.value()[i] = saved + h;
  double fp = f();
  t.value()[i] = saved - h;
  double fm = f();
  t.value()[i] = saved;
  return (fp - fm) / (2.0 * h);
}

void check_grads(const std::function<Tensor(Graph&)>& build,
                 const std::vector<Tensor>& leaves, double tol) {
  Graph g;
  Tensor loss = build(g);
  g.backward(loss);
  auto eval = [&]() {
    Graph g2;
    return build(g2).item();
  };
  for (Tensor leaf : leaves) {
    for (std::size_t i = 0; i < leaf.size(); ++i) {
      double num = fd_grad(eval, leaf, i);
      double ana = leaf.grad()[i];
      double denom = std::max({1.0, std::abs(num), std::abs(ana)});
      CHECK(std::abs(num - ana) / denom < tol);
    }
  }
}

Tensor randt(std::vector<std::size_t> shape, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::size_t n = 1;
  for (std::size_t s : shape) n *= s;
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return Tensor::from(std::move(shape), std::move(v));
}

}  // namespace

TEST_CASE("matmul forward hand example") {
  Graph g;
  Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
  Tensor b = Tensor::from({2, 2}, {5, 6, 7, 8});
  Tensor c = g.matmul(a, b);
  CHECK(c.value() == std::vector<double>{19, 22, 43, 50});
  Tensor d = g.matmul_nt(a, b);  // a * b^T
  CHECK(d.value() == std::vector<double>{17, 23, 39, 53});
}

TEST_CASE("softmax rows sum to one and match a hand case") {
  Graph g;
  Tensor x = Tensor::from({1, 3}, {0.0, 0.0, 0.0});
  Tensor s = g.softmax_lastdim(x);
  for (double v : s.value()) CHECK(v == doctest::Approx(1.0 / 3.0));

  Tensor y = Tensor::from({1, 2}, {1.0, 2.0});
  Tensor sy = g.softmax_lastdim(y);
  double e1 = std::exp(1.0), e2 = std::exp(2.0);
  CHECK(sy.value()[0] == doctest::Approx(e1 / (e1 + e2)));
  CHECK(sy.value()[1] == doctest::Approx(e2 / (e1 + e2)));
}

TEST_CASE("layer_norm normalizes rows") {
  Graph g;
  Tensor x = Tensor::from({1, 4}, {1, 2, 3, 4});
  Tensor gain = Tensor::from({4}, {1, 1, 1, 1});
  Tensor bias = Tensor::from({4}, {0, 0, 0, 0});
  Tensor y = g.layer_norm(x, gain, bias);
  double mean = 0, var = 0;
  for (double v : y.value()) mean += v;
  mean /= 4.0;
  for (double v : y.value()) var += (v - mean) * (v - mean);
  var /= 4.0;
  CHECK(mean == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("cross entropy with smoothing matches a hand computation") {
  Graph g;
  Tensor logits = Tensor::from({1, 3}, {1.0, 2.0, 0.5});
  double sm = 0.1;
  Tensor loss = g.cross_entropy_smoothed(logits, {1}, sm, Reduction::kSum);
  // log-softmax by hand, smoothing mass uniform over the two wrong classes.
  double z = std::exp(1.0) + std::exp(2.0) + std::exp(0.5);
  double lp0 = 1.0 - std::log(z), lp1 = 2.0 - std::log(z),
         lp2 = 0.5 - std::log(z);
  double expect = -((1.0 - sm) * lp1 + sm / 2.0 * (lp0 + lp2));
  CHECK(loss.item() == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("fsmn forward hand oracles") {
  Graph g;
  Tensor v = Tensor::from({3, 1}, {1, 2, 3});
  SUBCASE("two look-back taps") {
    Tensor back = Tensor::from({2, 1}, {0.5, 0.5});
    Tensor m = g.fsmn(v, back, Tensor());
    CHECK(m.value()[0] == doctest::Approx(1.5));
    CHECK(m.value()[1] == doctest::Approx(3.5));
    CHECK(m.value()[2] == doctest::Approx(5.5));
  }
  SUBCASE("one look-ahead tap") {
    Tensor back = Tensor::from({1, 1}, {0.0});
    Tensor ahead = Tensor::from({1, 1}, {1.0});
    Tensor m = g.fsmn(v, back, ahead);
    CHECK(m.value()[0] == doctest::Approx(3.0));
    CHECK(m.value()[1] == doctest::Approx(5.0));
    CHECK(m.value()[2] == doctest::Approx(3.0));
  }
  SUBCASE("history rows extend the look-back across a boundary") {
    Tensor back = Tensor::from({2, 1}, {0.0, 1.0});
    Tensor m = g.fsmn(v, back, Tensor(), {10.0}, 1);
    CHECK(m.value()[0] == doctest::Approx(11.0));
    CHECK(m.value()[1] == doctest::Approx(3.0));
    CHECK(m.value()[2] == doctest::Approx(5.0));
  }
}

TEST_CASE("gradients match central differences") {
  std::mt19937_64 rng(42);
  Tensor a = randt({3, 4}, rng);
  Tensor b = randt({4, 3}, rng);
  Tensor gain = randt({4}, rng);
  Tensor bias = randt({4}, rng);
  Tensor back = randt({2, 4}, rng);
  Tensor ahead = randt({1, 4}, rng);

  SUBCASE("matmul + relu + softmax + log + sum") {
    check_grads(
        [&](Graph& g) {
          Tensor h = g.relu(g.matmul(a, b));  // [3x3]
          Tensor s = g.softmax_lastdim(g.matmul(h, h));
          return g.sum(g.log(g.add_const(s, std::vector<double>(9, 0.5))));
        },
        {a, b}, 1e-6);
  }
  SUBCASE("layer_norm") {
    check_grads(
        [&](Graph& g) {
          Tensor y = g.layer_norm(a, gain, bias);
          return g.sum(g.mul(y, y));
        },
        {a, gain, bias}, 1e-6);
  }
  SUBCASE("fsmn with both tap directions") {
    check_grads(
        [&](Graph& g) {
          Tensor m = g.fsmn(a, back, ahead, {1.0, -1.0, 0.5, 2.0}, 1);
          return g.sum(g.mul(m, m));
        },
        {a, back, ahead}, 1e-6);
  }
  SUBCASE("smoothed cross entropy") {
    check_grads(
        [&](Graph& g) {
          Tensor logits = g.matmul(a, b);
          return g.cross_entropy_smoothed(logits, {0, 2, 1}, 0.1,
                                          Reduction::kMean);
        },
        {a, b}, 1e-6);
  }
  SUBCASE("slices, concat, row vectors") {
    Tensor row = randt({4}, rng);
    check_grads(
        [&](Graph& g) {
          Tensor x = g.add_rowvec(a, row);
          Tensor top = g.slice_rows(x, 0, 2);
          Tensor bot = g.slice_rows(x, 1, 3);
          Tensor cat = g.concat_rows({top, bot});
          Tensor cols = g.slice_cols(cat, 1, 3);
          return g.sum(g.mul(cols, cols));
        },
        {a, row}, 1e-6);
  }
}

TEST_CASE("gradients accumulate into a shared leaf across graphs") {
  Tensor a = Tensor::from({1, 2}, {2.0, 3.0});
  {
    Graph g;
    g.backward(g.sum(g.mul(a, a)));
  }
  std::vector<double> first = a.grad();
  CHECK(first[0] == doctest::Approx(4.0));
  CHECK(first[1] == doctest::Approx(6.0));
  {
    Graph g;
    g.backward(g.sum(g.mul(a, a)));
  }
  CHECK(a.grad()[0] == doctest::Approx(2.0 * first[0]));
  CHECK(a.grad()[1] == doctest::Approx(2.0 * first[1]));
}

TEST_CASE("dropout is deterministic per seed and inverted-scaled") {
  Tensor x = Tensor::from({1, 1000}, std::vector<double>(1000, 1.0));
  Graph g1(123, /*training=*/true), g2(123, /*training=*/true);
  Tensor y1 = g1.dropout(x, 0.5);
  Tensor y2 = g2.dropout(x, 0.5);
  CHECK(y1.value() == y2.value());
  double kept = 0.0;
  for (double v : y1.value()) {
    CHECK((v == 0.0 || v == doctest::Approx(2.0)));
    if (v != 0.0) kept += 1.0;
  }
  CHECK(kept / 1000.0 == doctest::Approx(0.5).epsilon(0.15));
  // Eval mode is the identity.
  Graph ge;
  CHECK(ge.dropout(x, 0.5).value() == x.value());
}

TEST_CASE("shape and usage errors") {
  Graph g;
  Tensor a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor b = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK_THROWS_AS(g.matmul(a, b), scama::ShapeError);
  CHECK_THROWS_AS(g.backward(a), scama::UsageError);  // non-scalar loss
  CHECK_THROWS_AS(g.dropout(a, 1.0), scama::ConfigError);
}

TEST_CASE("softmax rejects non-finite input") {
  Graph g;
  Tensor x = Tensor::from({1, 2}, {std::nan(""), 0.0});
  CHECK_THROWS_AS(g.softmax_lastdim(x), scama::NumericError);
}
