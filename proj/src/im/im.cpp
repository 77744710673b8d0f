#include "coep/im/im.hpp"

#include <stdexcept>

#include "coep/numerics/errors.hpp"
#include "coep/special_tokens.hpp"

namespace coep {

std::vector<TokenId> decoder_input(std::span<const TokenId> y) {
  std::vector<TokenId> d{kBos};
  d.insert(d.end(), y.begin(), y.end());
  d.push_back(kEos);
  return d;
}

std::vector<TokenId> lm_targets(std::span<const TokenId> y) {
  std::vector<TokenId> t(y.begin(), y.end());
  t.push_back(kEos);
  return t;
}

namespace {

struct PairPass {
  Var lm_logits;   // [|y|+1 x V]
  Var cls_logits;  // [1 x 2]
};

// One decoder pass over <s> y </s>: rows 0..|y| predict y </s>, the final
// row feeds the classification head.
PairPass run_pair(ImModel& model, const SegmentedSequence& x, std::span<const TokenId> y, bool need_lm) {
  SegmentedSequence fitted = x;
  fitted.truncate_front(model.config().max_positions);
  const Var memory = model.encode(fitted.flatten()).hidden;
  const auto input = decoder_input(y);
  const Var h = model.decode_hidden(model.embed(input), memory);
  PairPass p;
  if (need_lm) p.lm_logits = model.lm_logits(ops::slice_rows(h, 0, y.size() + 1));
  p.cls_logits = model.cls_logits(ops::slice_rows(h, y.size() + 1, 1));
  return p;
}

Var label_loss(const Var& cls_logits, int label) {
  if (label != 0 && label != 1) throw ContractError("label must be 0 or 1");
  const TokenId t = label;
  return ops::cross_entropy(cls_logits, std::span<const TokenId>(&t, 1));
}

}  // namespace

LossValue im_lm_loss(ImModel& model, const SegmentedSequence& x, std::span<const TokenId> y) {
  if (y.empty()) throw ContractError("im_lm_loss: empty target");
  const PairPass p = run_pair(model, x, y, true);
  return LossValue("loss_lm", ops::cross_entropy(p.lm_logits, lm_targets(y)));
}

LossValue im_disc_loss(ImModel& model, const SegmentedSequence& x, std::span<const TokenId> y, int label) {
  const PairPass p = run_pair(model, x, y, false);
  return LossValue("loss_disc", label_loss(p.cls_logits, label));
}

double discriminator_score(ImModel& model, const SegmentedSequence& x, std::span<const TokenId> y) {
  NoGradGuard guard;
  const PairPass p = run_pair(model, x, y, false);
  return ops::softmax(p.cls_logits).value()[0];
}

LossValue im_example_loss(ImModel& model, const ImExample& example) {
  const bool positive = example.label == 0;
  if (positive && example.y.empty()) throw ContractError("im_example_loss: empty target");
  const PairPass p = run_pair(model, example.x, example.y, positive);
  LossValue loss;
  if (positive) loss.add("loss_lm", ops::cross_entropy(p.lm_logits, lm_targets(example.y)));
  loss.add("loss_disc", label_loss(p.cls_logits, example.label));
  return loss;
}

TrainLog finetune_im(ImModel& model, const Vocab& vocab, const std::vector<InferentialTriple>& triples,
                     const TrainConfig& config) {
  if (triples.empty()) throw std::invalid_argument("finetune_im: empty corpus");
  if (config.batch_size == 0) throw std::invalid_argument("finetune_im: batch size must be > 0");
  for (Parameter* p : model.params().all()) p->set_frozen(false);
  AdamW opt(config.optimizer);
  const auto params = model.params().all();
  model.set_training(true);
  model.reseed_dropout(Rng::derive_seed(config.seed, 0x1D));
  TrainLog log;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto corpus = build_im_corpus(vocab, triples, Rng::derive_seed(config.seed, 1000 + epoch));
    const auto order = shuffled_indices(corpus.size(), Rng::derive_seed(config.seed, 2000 + epoch));
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<Var> lm, disc;
      for (std::size_t i = start; i < end; ++i) {
        const LossValue l = im_example_loss(model, corpus[order[i]]);
        for (const auto& [name, term] : l.terms()) (name == "loss_lm" ? lm : disc).push_back(term);
      }
      LossValue batch;
      if (!lm.empty()) batch.add("loss_lm", mean_of(lm));
      batch.add("loss_disc", mean_of(disc));
      model.params().zero_grad();
      const Var total = batch.total();
      TrainRecord rec;
      rec.step = ++step;
      rec.epoch = epoch;
      rec.values = batch.parts();
      if (!rec.values.count("loss_lm")) rec.values["loss_lm"] = 0.0;
      rec.values["loss_total"] = total.value().item();
      backward(total);
      opt.step(params);
      log.push_back(rec);
      if (config.on_record) config.on_record(rec);
      if (config.max_steps && step >= config.max_steps) break;
    }
    if (config.max_steps && step >= config.max_steps) break;
  }
  model.set_training(false);
  return log;
}

std::string generate_explanation(ImModel& model, const Vocab& vocab, const std::string& event, Relation r,
                                 const DecodeConfig& config) {
  NoGradGuard guard;
  SegmentedSequence x = build_im_input(vocab, event, r);
  x.truncate_front(model.config().max_positions);
  const Var memory = model.encode(x.flatten()).hidden;
  return vocab.detokenize(decode(model, memory, config));
}

}  // namespace coep
