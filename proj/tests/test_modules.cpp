#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>

#include "doctest.h"
#include "gradcheck.hpp"

#include "coep/corpus/synthetic.hpp"
#include "coep/decode/generate.hpp"
#include "coep/numerics/errors.hpp"
#include "coep/prompting/prompting.hpp"
#include "coep/special_tokens.hpp"

using namespace coep;

namespace {

struct Fixture {
  SyntheticCorpora corpora;
  std::vector<SequentialPair> pairs;
  Vocab vocab;

  Fixture() {
    corpora = generate_synthetic({.seed = 3, .train_stories = 6, .test_stories = 2});
    for (const auto& t : corpora.sequential) {
      if (auto p = sequentialize_triple(t.head, t.relation, t.tail)) pairs.push_back(*p);
    }
    vocab = build_vocab(corpora.inferential, pairs, corpora.train_stories);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

ModelConfig tiny(std::size_t vocab, float init_std = 0.1f) {
  ModelConfig c;
  c.num_layers = 1;
  c.d_model = 16;
  c.num_heads = 2;
  c.ffn_dim = 32;
  c.max_positions = 64;
  c.vocab_size = vocab;
  c.dropout = 0.0f;
  c.init_std = init_std;
  return c;
}

void set_cls_bias(Seq2SeqModel& m, float b0, float b1) {
  for (float& w : m.params().at("cls_head.out.weight").tensor().data()) w = 0.0f;
  Tensor& b = m.params().at("cls_head.out.bias").tensor();
  b[0] = b0;
  b[1] = b1;
}

std::vector<Tensor> snapshot(const Seq2SeqModel& m) {
  std::vector<Tensor> out;
  for (const Parameter* p : m.params().all()) out.push_back(p->tensor());
  return out;
}

bool same_bits(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin(),
                                              [](float x, float y) { return std::memcmp(&x, &y, 4) == 0; });
}

bool has_prefix(const std::string& s, const std::vector<std::string>& prefixes) {
  return std::any_of(prefixes.begin(), prefixes.end(), [&](const std::string& p) { return s.rfind(p, 0) == 0; });
}

bool no_special_words(const std::string& text) {
  for (const char* t : {"<s>", "</s>", "<pad>", "<unk>"}) {
    if (text.find(t) != std::string::npos) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("im") {

TEST_CASE("lm loss is near ln V at a near-uniform init and exact in bookkeeping") {
  const auto& f = fixture();
  ImModel im(tiny(f.vocab.size(), 0.02f), 11);
  const ImExample ex = make_im_example(f.vocab, f.corpora.inferential[0]);
  const double lm = im_lm_loss(im, ex.x, ex.y).value();
  CHECK(lm == doctest::Approx(std::log(static_cast<double>(f.vocab.size()))).epsilon(0.05));
  CHECK(lm >= 0.0);

  const LossValue both = im_example_loss(im, ex);
  CHECK(both.has("loss_lm"));
  CHECK(both.has("loss_disc"));
  CHECK(both.value() == doctest::Approx(both.part("loss_lm") + both.part("loss_disc")).epsilon(1e-6));
  CHECK(std::abs(both.part("loss_lm") - lm) <= 1e-6);

  ImExample neg = ex;
  neg.label = 1;
  const LossValue n = im_example_loss(im, neg);
  CHECK_FALSE(n.has("loss_lm"));
  CHECK(n.has("loss_disc"));
  CHECK_THROWS_AS(im_lm_loss(im, ex.x, {}), ContractError);
  CHECK_THROWS_AS(im_disc_loss(im, ex.x, ex.y, 2), ContractError);
}

TEST_CASE("discriminator loss alone reaches the encoder") {
  const auto& f = fixture();
  ImModel im(tiny(f.vocab.size()), 12);
  const ImExample ex = make_im_example(f.vocab, f.corpora.inferential[1]);
  backward(im_disc_loss(im, ex.x, ex.y, 0).total());
  double enc = 0;
  for (Parameter* p : im.params().with_prefix("encoder.")) {
    if (p->tensor().has_grad()) enc += p->tensor().grad_norm();
  }
  CHECK(enc > 0.0);
  const double lm_head = im.params().at("lm_head.bias").tensor().has_grad()
                             ? im.params().at("lm_head.bias").tensor().grad_norm()
                             : 0.0;
  CHECK(lm_head == 0.0);
}

TEST_CASE("finetune_im logs components and lowers the loss") {
  const auto& f = fixture();
  ImModel im(tiny(f.vocab.size()), 13);
  std::vector<InferentialTriple> few(f.corpora.inferential.begin(), f.corpora.inferential.begin() + 8);
  TrainConfig tc;
  tc.epochs = 40;
  tc.batch_size = 8;
  tc.optimizer.lr = 3e-3;
  tc.seed = 5;
  const TrainLog log = finetune_im(im, f.vocab, few, tc);
  REQUIRE(log.size() == 80);  // 8 positives + 8 negatives per epoch
  for (const auto& r : log) {
    CHECK(r.values.count("loss_lm"));
    CHECK(r.values.count("loss_disc"));
    CHECK(r.values.at("loss_total") == doctest::Approx(r.values.at("loss_lm") + r.values.at("loss_disc")).epsilon(1e-6));
  }
  std::vector<double> lm;
  for (const auto& r : log) lm.push_back(r.values.at("loss_lm"));
  const auto smooth = block_means(lm, 5);
  for (std::size_t i = 1; i < smooth.size(); ++i) CHECK(smooth[i] < smooth[i - 1]);
  for (const Parameter* p : im.params().all()) CHECK_FALSE(p->frozen());
  CHECK_THROWS(finetune_im(im, f.vocab, {}, tc));
}

TEST_CASE("generate_explanation is deterministic and free of special tokens") {
  const auto& f = fixture();
  ImModel im(tiny(f.vocab.size()), 14);
  DecodeConfig dc;
  dc.strategy = Strategy::kGreedy;
  dc.max_len = 6;
  const std::string a = generate_explanation(im, f.vocab, "she was hungry", Relation::kXWant, dc);
  const std::string b = generate_explanation(im, f.vocab, "she was hungry", Relation::kXWant, dc);
  CHECK(a == b);
  CHECK_FALSE(a.empty());
  CHECK(no_special_words(a));
}

}  // TEST_SUITE

TEST_SUITE("gm") {

TEST_CASE("prompt vectors index the final encoder state") {
  const auto& f = fixture();
  ImModel im(tiny(f.vocab.size()), 21);
  const SegmentedSequence x_g = build_gm_input(f.vocab, {"she was hungry"}, "she went to the kitchen");
  for (Relation r : {Relation::kXIntent, Relation::kOEffect}) {
    const Var p = collect_prompt(im, f.vocab, x_g, r);
    REQUIRE(p.shape() == Shape{1, 16});
    const auto tokens = append_relation(f.vocab, x_g, r).flatten();
    const EncoderState enc = im.encode(tokens);
    const std::size_t last = tokens.size() - 1;
    for (std::size_t j = 0; j < 16; ++j) CHECK(p.value()[j] == enc.hidden.value().at(last, j));
  }
  const Var a = collect_prompt(im, f.vocab, x_g, Relation::kXIntent);
  const Var b = collect_prompt(im, f.vocab, x_g, Relation::kXNeed);
  CHECK_FALSE(same_bits(a.value(), b.value()));
}

TEST_CASE("prompt sets and memory layout") {
  const auto& f = fixture();
  ImModel im(tiny(f.vocab.size()), 22);
  GmModel gm(tiny(f.vocab.size()), 23);
  const SegmentedSequence x_g = build_gm_input(f.vocab, {}, "she was hungry");
  const PromptSet set = collect_prompt_set(im, f.vocab, x_g);
  REQUIRE(set.size() == 9);
  const PromptSet again = collect_prompt_set(im, f.vocab, x_g);
  for (std::size_t i = 0; i < 9; ++i) {
    CHECK(set.relations[i] == kAllRelations[i]);
    CHECK(same_bits(set.vectors[i].value(), again.vectors[i].value()));
  }
  const EncoderState enc = encode_context(gm, x_g);
  const std::size_t L = enc.hidden.shape()[0];
  const PromptedMemory m = build_memory(set, enc);
  CHECK(m.memory.shape() == Shape{9 + L, 16});
  CHECK(m.prompt_rows == 9);
  CHECK(m.context_rows == L);
  for (std::size_t j = 0; j < 16; ++j) {
    CHECK(m.memory.value().at(0, j) == set.vectors[0].value()[j]);
    CHECK(m.memory.value().at(9, j) == enc.hidden.value().at(0, j));
  }

  const std::array<Relation, 1> one{Relation::kXReact};
  const PromptSet single = collect_prompt_set(im, f.vocab, x_g, one);
  CHECK(single.size() == 1);
  CHECK(build_memory(single, enc).memory.shape()[0] == 1 + L);

  const PromptedMemory none = build_memory(PromptSet{}, enc);
  CHECK(same_bits(none.memory.value(), enc.hidden.value()));

  ModelConfig wide = tiny(f.vocab.size());
  wide.d_model = 24;
  wide.num_heads = 2;
  GmModel other(wide, 24);
  CHECK_THROWS_AS(build_memory(set, encode_context(other, x_g)), DimensionError);
}

TEST_CASE("cross attention spreads weight over the prompt rows") {
  const auto& f = fixture();
  ImModel im(tiny(f.vocab.size()), 25);
  GmModel gm(tiny(f.vocab.size()), 26);
  const SegmentedSequence x_g = build_gm_input(f.vocab, {"she was hungry"}, "she went to the kitchen");
  const PromptedMemory m = build_memory(collect_prompt_set(im, f.vocab, x_g), encode_context(gm, x_g));
  const auto y = f.vocab.tokenize("she ate a sandwich");
  AttentionTrace trace;
  gm.decode_hidden(gm.embed(decoder_input(y)), m.memory, &trace);
  std::size_t cross = 0;
  for (const auto& rec : trace) {
    if (rec.kind != "decoder_cross") continue;
    ++cross;
    REQUIRE(rec.weights.shape()[1] == m.memory.shape()[0]);
    for (std::size_t q = 0; q < rec.weights.shape()[0]; ++q) {
      double prompt = 0;
      for (std::size_t k = 0; k < 9; ++k) prompt += rec.weights.at(q, k);
      CHECK(prompt > 0.0);
    }
  }
  CHECK(cross > 0);
}

TEST_CASE("feg losses") {
  const auto& f = fixture();
  ImModel im(tiny(f.vocab.size(), 0.02f), 27);
  GmModel gm(tiny(f.vocab.size(), 0.02f), 28);
  const SegmentedSequence x_g = build_gm_input(f.vocab, {"she was hungry"}, "she went to the kitchen");
  const PromptedMemory m = build_memory(collect_prompt_set(im, f.vocab, x_g), encode_context(gm, x_g));
  const auto y = f.vocab.tokenize("she ate a sandwich");
  const double lm = feg_lm_loss(gm, m, y).value();
  CHECK(lm == doctest::Approx(std::log(static_cast<double>(f.vocab.size()))).epsilon(0.05));
  CHECK_THROWS_AS(feg_lm_loss(gm, m, {}), ContractError);

  set_cls_bias(gm, 0.0f, 0.0f);
  CHECK(feg_cls_loss(gm, m, y, 0).value() == doctest::Approx(std::log(2.0)).epsilon(1e-6));
  set_cls_bias(gm, std::log(4.0f), 0.0f);
  CHECK(feg_cls_loss(gm, m, y, 0).value() == doctest::Approx(-std::log(0.8)).epsilon(1e-5));
  set_cls_bias(gm, 30.0f, 0.0f);
  CHECK(feg_cls_loss(gm, m, y, 0).value() < 1e-6);

  const LossValue total = gm_total_loss(gm, m, y, 0, true);
  CHECK(total.value() == doctest::Approx(total.part("loss_lm") + total.part("loss_cls")).epsilon(1e-6));
  CHECK(std::abs(total.part("loss_lm") - lm) <= 1e-6);
  const LossValue lm_only = gm_total_loss(gm, m, y, 0, false);
  CHECK_FALSE(lm_only.has("loss_cls"));
  CHECK(std::abs(lm_only.value() - lm) <= 1e-6);
  const LossValue neg = gm_total_loss(gm, m, y, 1, true);
  CHECK_FALSE(neg.has("loss_lm"));
  CHECK_THROWS_AS(gm_total_loss(gm, m, y, 1, false), ContractError);

  PromptSet zeros;
  for (std::size_t i = 0; i < 9; ++i) zeros.vectors.push_back(ops::constant(Tensor(Shape{1, 16})));
  const double zero_lm = feg_lm_loss(gm, build_memory(zeros, encode_context(gm, x_g)), y).value();
  CHECK(std::isfinite(zero_lm));
  CHECK(zero_lm != lm);
}

TEST_CASE("finetune_gm lowers the sequential loss") {
  const auto& f = fixture();
  GmModel gm(tiny(f.vocab.size()), 29);
  std::vector<SequentialPair> few(f.pairs.begin(), f.pairs.begin() + 8);
  TrainConfig tc;
  tc.epochs = 30;
  tc.batch_size = 8;
  tc.optimizer.lr = 3e-3;
  const TrainLog log = finetune_gm(gm, f.vocab, few, tc);
  std::vector<double> lm;
  for (const auto& r : log) lm.push_back(r.values.at("loss_lm"));
  const auto smooth = block_means(lm, 5);
  for (std::size_t i = 1; i < smooth.size(); ++i) CHECK(smooth[i] < smooth[i - 1]);
  CHECK_THROWS(finetune_gm(gm, f.vocab, {}, tc));
  SequentialPair empty{"she was hungry", "", std::nullopt};
  CHECK_THROWS_AS(gm_seq_loss(gm, f.vocab, empty), ContractError);
}

}  // TEST_SUITE

TEST_SUITE("prompting") {

TEST_CASE("freeze plan partitions the IM") {
  const auto& f = fixture();
  ImModel im(tiny(f.vocab.size()), 31);
  const FreezePlan plan = FreezePlan::im_prompt_training();
  CHECK_NOTHROW(plan.validate(im.params()));
  FreezePlan overlapping = plan;
  overlapping.trainable.push_back("decoder.");
  CHECK_THROWS_AS(overlapping.validate(im.params()), ContractError);
  FreezePlan gap = plan;
  gap.frozen.pop_back();
  CHECK_THROWS_AS(gap.validate(im.params()), ContractError);
}

TEST_CASE("straight-through explanation decode") {
  const auto& f = fixture();
  ImModel im(tiny(f.vocab.size(), 0.3f), 32);
  FreezePlan::im_prompt_training().apply(im.params());
  const auto x = build_im_input(f.vocab, "she was hungry", Relation::kXWant).flatten();
  StDecodeConfig sc;
  sc.max_len = 5;
  Rng rng(4);
  const StDecodeResult r = st_decode_explanation(im, x, sc, rng);
  CHECK(r.ids.size() <= sc.max_len);
  CHECK(r.inputs.size() == r.ids.size());
  for (std::size_t t = 0; t < r.ids.size(); ++t) {
    CHECK(static_cast<std::size_t>(r.ids[t]) == ops::argmax(r.logits[t].data()));
    const Tensor row = ops::embedding(im.token_table(), std::span<const TokenId>(&r.ids[t], 1)).value();
    for (std::size_t j = 0; j < 16; ++j) CHECK(r.inputs[t].value()[j] == doctest::Approx(row[j]).epsilon(1e-5));
  }
  REQUIRE_FALSE(r.ids.empty());

  Rng rng2(4);
  const StDecodeResult again = st_decode_explanation(im, x, sc, rng2);
  CHECK(again.ids == r.ids);

  backward(semantic_coherence_loss(im, r).total());
  double enc = 0, frozen = 0;
  for (Parameter* p : im.params().all()) {
    const double g = p->tensor().has_grad() ? p->tensor().grad_norm() : 0.0;
    (p->frozen() ? frozen : enc) += g;
  }
  CHECK(enc > 0.0);
  CHECK(frozen == 0.0);

  StDecodeConfig bad;
  bad.max_len = 0;
  CHECK_THROWS_AS(st_decode_explanation(im, x, bad, rng), ParameterError);
  bad.max_len = 3;
  bad.temperature = 0.0f;
  CHECK_THROWS_AS(st_decode_explanation(im, x, bad, rng), ParameterError);
}

TEST_CASE("semantic coherence loss closed forms") {
  const auto& f = fixture();
  ImModel im(tiny(f.vocab.size()), 33);
  const auto x = build_im_input(f.vocab, "she was hungry", Relation::kXWant).flatten();
  Rng rng(5);
  const StDecodeResult r = st_decode_explanation(im, x, StDecodeConfig{}, rng);
  set_cls_bias(im, 0.0f, 0.0f);
  CHECK(semantic_coherence_loss(im, r).value() == doctest::Approx(std::log(2.0)).epsilon(1e-6));
  set_cls_bias(im, 0.0f, std::log(3.0f));
  CHECK(semantic_coherence_loss(im, r).value() == doctest::Approx(std::log(4.0)).epsilon(1e-5));
  set_cls_bias(im, 40.0f, 0.0f);
  CHECK(semantic_coherence_loss(im, r).value() < 1e-6);

  const SegmentedSequence x_g = build_gm_input(f.vocab, {}, "she was hungry");
  GmModel gm(tiny(f.vocab.size()), 34);
  const PromptedMemory m = build_memory(collect_prompt_set(im, f.vocab, x_g), encode_context(gm, x_g));
  const LossValue g = gm_total_loss(gm, m, f.vocab.tokenize("she went to the kitchen"), 0);
  const LossValue sc = semantic_coherence_loss(im, r);
  const LossValue total = coep_total_loss(g, &sc);
  CHECK(total.value() ==
        doctest::Approx(total.part("loss_lm") + total.part("loss_cls") + total.part("loss_sc")).epsilon(1e-6));
  CHECK_FALSE(coep_total_loss(g, nullptr).has("loss_sc"));
}

TEST_CASE("train_coep keeps frozen parameters bitwise and moves the rest") {
  const auto& f = fixture();
  ImModel im(tiny(f.vocab.size()), 35);
  GmModel gm(tiny(f.vocab.size()), 36);
  const auto im0 = snapshot(im), gm0 = snapshot(gm);
  CoepConfig cc;
  cc.epochs = 100;
  cc.max_steps = 10;
  cc.batch_size = 2;
  cc.st.max_len = 3;
  cc.seed = 2;
  std::size_t memories = 0;
  cc.on_memory = [&](const PromptedMemory& m) {
    CHECK(m.prompt_rows == 9);
    CHECK(m.memory.shape()[0] == 9 + m.context_rows);
    ++memories;
  };
  const FreezePlan plan = FreezePlan::im_prompt_training();
  const CoepResult res = train_coep(im, gm, f.vocab, f.corpora.train_stories, plan, cc);
  CHECK(res.log.size() == 10);
  CHECK(memories == 20);
  CHECK(res.audits >= 10);
  CHECK(res.im_encoder_drift > 0.0);
  for (const auto& r : res.log) {
    for (const char* k : {"loss_lm", "loss_cls", "loss_sc", "loss_total"}) CHECK(r.values.count(k));
  }
  const auto ps = im.params().all();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    INFO(ps[i]->name());
    if (has_prefix(ps[i]->name(), plan.frozen)) {
      CHECK(same_bits(ps[i]->tensor(), im0[i]));
    } else if (ps[i]->name().size() < 7 || ps[i]->name().substr(ps[i]->name().size() - 7) != ".k.bias") {
      CHECK_FALSE(same_bits(ps[i]->tensor(), im0[i]));
    }
  }
  const auto gs = gm.params().all();
  for (std::size_t i = 0; i < gs.size(); ++i) {
    INFO(gs[i]->name());
    if (gs[i]->name().size() < 7 || gs[i]->name().substr(gs[i]->name().size() - 7) != ".k.bias") {
      CHECK_FALSE(same_bits(gs[i]->tensor(), gm0[i]));
    }
  }
}

TEST_CASE("train_coep ablation switches") {
  const auto& f = fixture();
  CoepConfig cc;
  cc.max_steps = 3;
  cc.batch_size = 2;
  cc.st.max_len = 3;

  SUBCASE("skip_pt leaves the whole IM untouched and drops loss_sc") {
    ImModel im(tiny(f.vocab.size()), 41);
    GmModel gm(tiny(f.vocab.size()), 42);
    const auto im0 = snapshot(im);
    cc.skip_pt = true;
    const CoepResult res = train_coep(im, gm, f.vocab, f.corpora.train_stories, FreezePlan::im_prompt_training(), cc);
    for (const auto& r : res.log) CHECK_FALSE(r.values.count("loss_sc"));
    const auto ps = im.params().all();
    for (std::size_t i = 0; i < ps.size(); ++i) CHECK(same_bits(ps[i]->tensor(), im0[i]));
  }
  SUBCASE("skip_cls drops loss_cls") {
    ImModel im(tiny(f.vocab.size()), 43);
    GmModel gm(tiny(f.vocab.size()), 44);
    cc.skip_cls = true;
    const CoepResult res = train_coep(im, gm, f.vocab, f.corpora.train_stories, FreezePlan::im_prompt_training(), cc);
    for (const auto& r : res.log) CHECK_FALSE(r.values.count("loss_cls"));
  }
  SUBCASE("one relation gives 1 + L memory rows") {
    ImModel im(tiny(f.vocab.size()), 45);
    GmModel gm(tiny(f.vocab.size()), 46);
    cc.relations = {Relation::kXAttr};
    cc.on_memory = [](const PromptedMemory& m) {
      CHECK(m.prompt_rows == 1);
      CHECK(m.memory.shape()[0] == 1 + m.context_rows);
    };
    train_coep(im, gm, f.vocab, f.corpora.train_stories, FreezePlan::im_prompt_training(), cc);
  }
  SUBCASE("without prompts the memory is the context alone") {
    ImModel im(tiny(f.vocab.size()), 47);
    GmModel gm(tiny(f.vocab.size()), 48);
    cc.use_prompts = false;
    cc.on_memory = [](const PromptedMemory& m) {
      CHECK(m.prompt_rows == 0);
      CHECK(m.memory.shape()[0] == m.context_rows);
    };
    const CoepResult res = train_coep(im, gm, f.vocab, f.corpora.train_stories, FreezePlan::im_prompt_training(), cc);
    for (const auto& r : res.log) CHECK_FALSE(r.values.count("loss_sc"));
  }
  SUBCASE("a write to a frozen parameter aborts") {
    ImModel im(tiny(f.vocab.size()), 49);
    GmModel gm(tiny(f.vocab.size()), 50);
    cc.on_step = [](std::size_t step, ImModel& m, GmModel&) {
      if (step == 2) m.params().at("lm_head.bias").tensor()[0] += 1.0f;
    };
    CHECK_THROWS_AS(train_coep(im, gm, f.vocab, f.corpora.train_stories, FreezePlan::im_prompt_training(), cc),
                    FreezeViolation);
  }
}

}  // TEST_SUITE

TEST_SUITE("decode") {

TEST_CASE("top-k decoding contracts") {
  const auto& f = fixture();
  GmModel gm(tiny(f.vocab.size(), 0.3f), 61);
  const auto x = f.vocab.tokenize("she was hungry");
  const EncoderState enc = gm.encode(x);
  DecodeConfig greedy;
  greedy.strategy = Strategy::kGreedy;
  greedy.max_len = 7;
  const auto g = decode(gm, enc.hidden, greedy);
  CHECK(g == decode(gm, enc.hidden, greedy));
  CHECK(g.size() <= 7);
  CHECK_FALSE(g.empty());

  for (std::uint64_t seed : {1u, 2u, 3u}) {
    DecodeConfig k1 = greedy;
    k1.strategy = Strategy::kTopK;
    k1.k = 1;
    k1.seed = seed;
    CHECK(decode(gm, enc.hidden, k1) == g);
  }

  DecodeConfig topk;
  topk.k = 4;
  topk.max_len = 7;
  topk.seed = 9;
  std::vector<DecodeStep> trace;
  const auto a = decode(gm, enc.hidden, topk, &trace);
  CHECK(a == decode(gm, enc.hidden, topk));
  CHECK(a.size() <= 7);
  std::vector<TokenId> prefix{kBos};
  for (const auto& step : trace) {
    CHECK(step.candidates.size() == 4);
    double total = 0;
    for (double p : step.probabilities) total += p;
    CHECK(std::abs(total - 1.0) <= 1e-6);
    CHECK(std::find(step.candidates.begin(), step.candidates.end(), step.chosen) != step.candidates.end());
    Tensor logits = gm.decode_logits(prefix, enc.hidden);
    for (TokenId s : {kBos, kPad, kUnk}) logits[static_cast<std::size_t>(s)] = -1e30f;
    std::vector<std::size_t> order(logits.numel());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return logits[i] > logits[j]; });
    CHECK(std::set<std::size_t>(order.begin(), order.begin() + 4) ==
          std::set<std::size_t>(step.candidates.begin(), step.candidates.end()));
    prefix.push_back(static_cast<TokenId>(step.chosen));
  }
  for (TokenId t : a) CHECK(t >= static_cast<TokenId>(kNumSpecial));

  DecodeConfig huge = topk;
  huge.k = 100000;
  CHECK_NOTHROW(decode(gm, enc.hidden, huge));
  DecodeConfig bad = topk;
  bad.k = 0;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
  bad = topk;
  bad.max_len = 0;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
}

TEST_CASE("future event generation and storytelling") {
  const auto& f = fixture();
  ImModel im(tiny(f.vocab.size(), 0.3f), 62);
  GmModel gm(tiny(f.vocab.size(), 0.3f), 63);
  CoepModels models{&im, &gm, &f.vocab};
  DecodeConfig dc;
  dc.strategy = Strategy::kGreedy;
  dc.max_len = 6;
  const std::string e = generate_future_event(models, {"she was hungry"}, "she went to the kitchen", dc);
  CHECK_FALSE(e.empty());
  CHECK(no_special_words(e));
  CHECK(e == generate_future_event(models, {"she was hungry"}, "she went to the kitchen", dc));

  std::vector<std::vector<std::string>> histories;
  const auto story = tell_story(models, "she was hungry", 4, dc, &histories);
  REQUIRE(story.size() == 5);
  REQUIRE(histories.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(histories[i] == std::vector<std::string>(story.begin(), story.begin() + static_cast<long>(i)));
  }
  CHECK(story == tell_story(models, "she was hungry", 4, dc));
  CHECK_THROWS(tell_story(models, "she was hungry", 0, dc));

  CoepModels plain{nullptr, &gm, &f.vocab, false};
  CHECK_FALSE(generate_future_event(plain, {}, "she was hungry", dc).empty());
}

}  // TEST_SUITE
