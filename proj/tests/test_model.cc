#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "scama/model.h"
#include "scama/scama.h"

using scama::DecoderState;
using scama::Graph;
using scama::Model;
using scama::ModelConfig;
using scama::Tensor;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.n_enc = 2;
  c.m_dec = 1;
  c.k_dec = 1;
  c.d_model = 8;
  c.d_ff = 16;
  c.heads = 2;
  c.d_in = 6;
  c.vocab = 7;
  c.chunk = 3;
  c.l_enc = 4;
  c.l_dec = 3;
  c.c_max = 4;
  c.dropout = 0.0;
  return c;
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

TEST_CASE("encoder and decoder produce the contracted shapes") {
  Model m = Model::init(tiny_config(), 1);
  std::mt19937_64 rng(2);
  Tensor frames = randt({10, 6}, rng);
  Graph g;
  Tensor enc = encode_offline(g, m, frames);
  CHECK(enc.rows() == 10);
  CHECK(enc.cols() == 8);

  std::vector<int> tokens_in = {0, 2, 3, 4};
  Tensor logits = decode_batch(g, m, tokens_in, enc, nullptr);
  CHECK(logits.rows() == 4);
  CHECK(logits.cols() == 7);
}

TEST_CASE("initialization is deterministic per seed") {
  ModelConfig cfg = tiny_config();
  Model a = Model::init(cfg, 5);
  Model b = Model::init(cfg, 5);
  Model c = Model::init(cfg, 6);
  auto pa = a.named_params(), pb = b.named_params(), pc = c.named_params();
  REQUIRE(pa.size() == pb.size());
  bool any_differs = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].first == pb[i].first);
    CHECK(pa[i].second.value() == pb[i].second.value());
    if (pa[i].second.value() != pc[i].second.value()) any_differs = true;
  }
  CHECK(any_differs);
  CHECK(a.param_count() == b.param_count());
  CHECK(a.param_count() > 0);
}

TEST_CASE("batched teacher forcing equals step-by-step decoding") {
  Model m = Model::init(tiny_config(), 7);
  std::mt19937_64 rng(8);
  Tensor frames = randt({9, 6}, rng);
  Graph g;
  Tensor enc = encode_offline(g, m, frames);

  std::vector<int> tokens_in = {0, 2, 5, 3, 6, 2};
  Tensor batch = decode_batch(g, m, tokens_in, enc, nullptr);

  DecoderState state = DecoderState::fresh(m);
  for (std::size_t i = 0; i < tokens_in.size(); ++i) {
    Graph gs;
    Tensor step = decoder_step(gs, m, &state, tokens_in[i], enc);
    for (std::size_t v = 0; v < 7; ++v) {
      CHECK(std::abs(step.value()[v] - batch.value()[i * 7 + v]) < 1e-9);
    }
  }
}

TEST_CASE("teacher-forced logits are strictly autoregressive") {
  Model m = Model::init(tiny_config(), 9);
  std::mt19937_64 rng(10);
  Tensor frames = randt({6, 6}, rng);
  Graph g1, g2;
  Tensor enc1 = encode_offline(g1, m, frames);
  Tensor enc2 = encode_offline(g2, m, frames);

  std::vector<int> a = {0, 2, 3, 4, 5};
  std::vector<int> b = {0, 2, 3, 6, 6};  // diverges at position 3
  Tensor la = decode_batch(g1, m, a, enc1, nullptr);
  Tensor lb = decode_batch(g2, m, b, enc2, nullptr);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t v = 0; v < 7; ++v) {
      CHECK(la.value()[i * 7 + v] == lb.value()[i * 7 + v]);
    }
  }
  bool later_differ = false;
  for (std::size_t v = 0; v < 7; ++v) {
    if (la.value()[3 * 7 + v] != lb.value()[3 * 7 + v]) later_differ = true;
  }
  CHECK(later_differ);
}

TEST_CASE("e2e loss gradients match central differences on a sample") {
  Model m = Model::init(tiny_config(), 11);
  std::mt19937_64 rng(12);
  Tensor frames = randt({6, 6}, rng);
  std::vector<int> targets = {3, 4, 1};  // ends with <eos>=1
  std::vector<std::size_t> gate = {0, 1, 1};

  auto eval = [&]() {
    Graph g;
    return e2e_loss(g, m, frames, targets, gate, 0.1).item();
  };
  m.zero_grads();
  Graph g;
  g.backward(e2e_loss(g, m, frames, targets, gate, 0.1));

  std::mt19937_64 pick(13);
  for (auto& [name, t] : m.named_params()) {
    Tensor leaf = t;
    std::size_t i = pick() % leaf.size();
    double saved = leaf.value()[i];
    const double h = 1e-5;
    leaf.value()[i] = saved + h;
    double fp = eval();
    leaf.value()[i] = saved - h;
    double fm = eval();
    leaf.value()[i] = saved;
    double num = (fp - fm) / (2.0 * h);
    double ana = leaf.grad()[i];
    double denom = std::max({1.0, std::abs(num), std::abs(ana)});
    CHECK_MESSAGE(std::abs(num - ana) / denom < 1e-5, name);
  }
}

TEST_CASE("a few optimizer-free gradient steps reduce the loss") {
  Model m = Model::init(tiny_config(), 14);
  std::mt19937_64 rng(15);
  Tensor frames = randt({6, 6}, rng);
  std::vector<int> targets = {3, 4, 1};
  std::vector<std::size_t> gate = {0, 1, 1};

  double first = 0.0, last = 0.0;
  for (int it = 0; it < 30; ++it) {
    m.zero_grads();
    Graph g;
    Tensor loss = e2e_loss(g, m, frames, targets, gate, 0.0);
    if (it == 0) first = loss.item();
    last = loss.item();
    g.backward(loss);
    for (auto& [name, t] : m.named_params()) {
      Tensor leaf = t;
      for (std::size_t i = 0; i < leaf.size(); ++i) {
        leaf.value()[i] -= 0.05 * leaf.grad()[i];
      }
    }
  }
  CHECK(last < 0.5 * first);
}

TEST_CASE("config validation rejects bad setups") {
  ModelConfig c = tiny_config();
  c.heads = 3;  // 8 % 3 != 0
  CHECK_THROWS_AS(c.validate(), scama::ConfigError);
  c = tiny_config();
  c.sos = c.eos;
  CHECK_THROWS_AS(c.validate(), scama::ConfigError);
  c = tiny_config();
  c.chunk = 0;
  CHECK_THROWS_AS(c.validate(), scama::ConfigError);
}

TEST_CASE("decoder_step rejects a mis-sized state") {
  Model m = Model::init(tiny_config(), 16);
  std::mt19937_64 rng(17);
  Tensor ctx = randt({4, 8}, rng);
  DecoderState bad;
  Graph g;
  CHECK_THROWS_AS(decoder_step(g, m, &bad, 0, ctx), scama::UsageError);
}
