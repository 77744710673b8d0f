#include <cmath>

#include "doctest.h"
#include "gradcheck.hpp"

#include "coep/numerics/errors.hpp"
#include "coep/seq2seq/model.hpp"
#include "coep/special_tokens.hpp"

using namespace coep;

namespace {

ModelConfig small_config(std::size_t vocab = 30) {
  ModelConfig c;
  c.num_layers = 2;
  c.d_model = 16;
  c.num_heads = 4;
  c.ffn_dim = 32;
  c.vocab_size = vocab;
  c.max_positions = 32;
  c.dropout = 0.1f;
  c.init_std = 0.3f;  // larger than the training default so random models are not near-uniform
  return c;
}

std::vector<TokenId> random_tokens(Rng& rng, std::size_t n, std::size_t vocab) {
  std::vector<TokenId> t(n);
  for (auto& id : t) id = static_cast<TokenId>(kNumSpecial + rng.below(vocab - kNumSpecial));
  return t;
}

}  // namespace

TEST_SUITE("seq2seq") {

TEST_CASE("encoder shape, determinism and positional sensitivity") {
  Seq2SeqModel m(small_config(), 1);
  Rng rng(2);
  auto x = random_tokens(rng, 7, 30);
  EncoderState a = m.encode(x), b = m.encode(x);
  CHECK(a.hidden.shape() == Shape{7, 16});
  CHECK(a.hidden.value().bitwise_equal(b.hidden.value()));
  std::swap(x[1], x[4]);
  if (x[1] == x[4]) x[4] = x[4] == 5 ? 6 : 5;
  CHECK_FALSE(m.encode(x).hidden.value().bitwise_equal(a.hidden.value()));
  CHECK_THROWS_AS(m.encode(std::vector<TokenId>{}), ContractError);
}

TEST_CASE("overlong encoder input keeps the last positions") {
  Seq2SeqModel m(small_config(), 1);
  Rng rng(3);
  auto x = random_tokens(rng, 40, 30);
  EncoderState s = m.encode(x);
  CHECK(s.hidden.shape()[0] == 32);
  CHECK(s.tokens == std::vector<TokenId>(x.end() - 32, x.end()));
}

TEST_CASE("parameter count matches the closed form") {
  for (std::size_t v : {30u, 300u}) {
    Seq2SeqModel m(small_config(v), 1);
    CHECK(m.params().scalar_count() == m.config().parameter_count());
    ModelConfig desk;
    desk.vocab_size = v;
    Seq2SeqModel d(desk, 1);
    CHECK(d.params().scalar_count() == desk.parameter_count());
  }
  ModelConfig desk;
  desk.vocab_size = 300;
  CHECK(desk.parameter_count() == 273902);
  CHECK(ModelConfig::reference(50265).parameter_count() > 100'000'000);
}

TEST_CASE("decode logits, causality and incremental equivalence") {
  Seq2SeqModel m(small_config(), 4);
  Rng rng(5);
  Var memory = m.encode(random_tokens(rng, 6, 30)).hidden;
  std::vector<TokenId> y{kBos};
  for (TokenId t : random_tokens(rng, 5, 30)) y.push_back(t);
  Tensor logits = m.decode_logits(std::span(y).first(3), memory);
  CHECK(logits.shape() == Shape{30});

  Var full = m.lm_logits(m.decode_hidden(m.embed(y), memory));
  auto altered = y;
  altered[4] = altered[4] == 7 ? 8 : 7;
  altered[5] = altered[5] == 9 ? 10 : 9;
  Var alt = m.lm_logits(m.decode_hidden(m.embed(altered), memory));
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 30; ++c) CHECK(full.value().at(r, c) == alt.value().at(r, c));
  }

  auto inc = m.start_incremental(memory);
  for (std::size_t t = 0; t < y.size(); ++t) {
    Var row = m.lm_logits(inc.step(m.embed(std::span(y).subspan(t, 1))));
    double worst = 0;
    for (std::size_t c = 0; c < 30; ++c) {
      worst = std::max(worst, std::abs(double(row.value()[c]) - full.value().at(t, c)));
    }
    CHECK(worst <= 1e-5);
  }
  Tensor dl = m.decode_logits(y, memory);
  for (std::size_t c = 0; c < 30; ++c) CHECK(std::abs(dl[c] - full.value().at(5, c)) <= 1e-5);

  CHECK_THROWS_AS(m.decode_logits(std::span(y).subspan(1), memory), ContractError);
  CHECK_THROWS_AS(m.decode_hidden(m.embed(y), Var(Tensor(Shape{0, 16}))), ContractError);
  CHECK_THROWS_AS(m.decode_hidden(m.embed(y), Var(Tensor(Shape{3, 8}))), DimensionError);
}

TEST_CASE("classification head") {
  Seq2SeqModel m(small_config(), 6);
  Rng rng(7);
  auto x = random_tokens(rng, 5, 30);
  Var logits = m.classify(x, random_tokens(rng, 3, 30));
  CHECK(logits.shape() == Shape{1, 2});
  Tensor p = ops::softmax(logits).value();
  CHECK(std::abs(p[0] + p[1] - 1.0) <= 1e-6);
  CHECK_THROWS_AS(m.classify(x, std::vector<TokenId>{}), ContractError);
}

TEST_CASE("attention rows are normalized and causal entries are exactly zero") {
  Seq2SeqModel m(small_config(), 8);
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    AttentionTrace trace;
    Var memory = m.encode(random_tokens(rng, 1 + rng.below(10), 30), &trace).hidden;
    std::vector<TokenId> y{kBos};
    for (TokenId t : random_tokens(rng, rng.below(8), 30)) y.push_back(t);
    m.decode_hidden(m.embed(y), memory, &trace);
    for (const AttentionRecord& rec : trace) {
      const Tensor& w = rec.weights;
      for (std::size_t r = 0; r < w.dim(0); ++r) {
        double total = 0;
        for (std::size_t c = 0; c < w.dim(1); ++c) {
          total += w.at(r, c);
          if (rec.kind == "decoder_self" && c > r) CHECK(w.at(r, c) == 0.0f);
        }
        CHECK(std::abs(total - 1.0) <= 1e-6);
      }
    }
  }
}

TEST_CASE("lm loss reaches every embedding, encoder, decoder and lm head parameter") {
  Seq2SeqModel m(small_config(), 10);
  m.set_training(true);
  Rng rng(11);
  Var memory = m.encode(random_tokens(rng, 8, 30)).hidden;
  std::vector<TokenId> y{kBos};
  for (TokenId t : random_tokens(rng, 6, 30)) y.push_back(t);
  std::vector<TokenId> targets(y.begin() + 1, y.end());
  targets.push_back(kEos);
  backward(ops::cross_entropy(m.lm_logits(m.decode_hidden(m.embed(y), memory)), targets));
  for (Parameter* p : m.params().all()) {
    if (p->name().rfind("cls_head.", 0) == 0) continue;
    INFO(p->name());
    REQUIRE(p->tensor().has_grad());
    CHECK(p->tensor().grad_norm() > 0.0);
  }
}

TEST_CASE("model gradients match finite differences") {
  ModelConfig c = small_config(12);
  c.num_layers = 1;
  c.d_model = 8;
  c.num_heads = 2;
  c.ffn_dim = 16;
  c.dropout = 0.0f;
  Seq2SeqModel m(c, 12);
  Rng rng(13);
  const auto x = random_tokens(rng, 5, 12);
  std::vector<TokenId> y{kBos};
  for (TokenId t : random_tokens(rng, 3, 12)) y.push_back(t);
  std::vector<TokenId> targets(y.begin() + 1, y.end());
  targets.push_back(kEos);
  auto loss = [&]() {
    Var l = ops::cross_entropy(m.lm_logits(m.decode_hidden(m.embed(y), m.encode(x).hidden)), targets);
    Var h = m.decode_hidden(m.embed(y), m.encode(x).hidden);
    Var cls = ops::cross_entropy(m.cls_logits(ops::slice_rows(h, h.shape()[0] - 1, 1)), std::vector<TokenId>{1});
    const Var terms[] = {l, cls};
    return ops::add_n(terms);
  };
  m.params().zero_grad();
  backward(loss());
  // the loss is a float32 scalar; a wider step keeps its rounding out of the quotient
  constexpr float kStep = 1e-2f;
  NoGradGuard guard;
  for (Parameter* p : m.params().all()) {
    Tensor& t = p->tensor();
    INFO(p->name());
    if (p->name().ends_with(".k.bias")) {
      // softmax ignores a per-query shift, so the key bias gets no gradient
      for (float g : t.grad()) CHECK(std::abs(g) <= 1e-5f);
      continue;
    }
    std::vector<double> analytic, numeric;
    for (std::size_t k = 0; k < 6; ++k) {
      const std::size_t i = rng.below(t.numel());
      analytic.push_back(t.grad()[i]);
      const float saved = t[i];
      t[i] = saved + kStep;
      const float up = t[i];
      const double lu = loss().value().item();
      t[i] = saved - kStep;
      const float down = t[i];
      const double ld = loss().value().item();
      t[i] = saved;
      numeric.push_back((lu - ld) / (double(up) - down));
    }
    double diff = 0, na = 0, nn = 0;
    for (std::size_t k = 0; k < analytic.size(); ++k) {
      diff += (analytic[k] - numeric[k]) * (analytic[k] - numeric[k]);
      na += analytic[k] * analytic[k];
      nn += numeric[k] * numeric[k];
    }
    CHECK(std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-4}) <= 1e-2);
  }
}

TEST_CASE("config map round trip") {
  ModelConfig c = small_config(77);
  ModelConfig r = ModelConfig::from_map(c.to_map());
  CHECK(r.to_map() == c.to_map());
  ModelConfig bad = c;
  bad.num_heads = 3;
  CHECK_THROWS(bad.validate());
}

}  // TEST_SUITE
