#include "coep/gm/gm.hpp"

#include <stdexcept>

#include "coep/numerics/errors.hpp"
#include "coep/special_tokens.hpp"

namespace coep {

namespace {

std::vector<TokenId> wrap(const Vocab& vocab, const std::string& text) {
  std::vector<TokenId> t{kBos};
  for (TokenId id : vocab.tokenize(text)) t.push_back(id);
  t.push_back(kEos);
  return t;
}

TokenId as_target(int label) {
  if (label != 0 && label != 1) throw ContractError("label must be 0 or 1");
  return label;
}

}  // namespace

LossValue gm_seq_loss(GmModel& model, const Vocab& vocab, const SequentialPair& pair) {
  const auto y = vocab.tokenize(pair.future);
  if (y.empty()) throw ContractError("gm_seq_loss: empty future event");
  const Var memory = model.encode(wrap(vocab, pair.preceding)).hidden;
  const Var h = model.decode_hidden(model.embed(decoder_input(y)), memory);
  return LossValue("loss_lm",
                   ops::cross_entropy(model.lm_logits(ops::slice_rows(h, 0, y.size() + 1)), lm_targets(y)));
}

TrainLog finetune_gm(GmModel& model, const Vocab& vocab, const std::vector<SequentialPair>& pairs,
                     const TrainConfig& config) {
  if (pairs.empty()) throw std::invalid_argument("finetune_gm: empty corpus");
  if (config.batch_size == 0) throw std::invalid_argument("finetune_gm: batch size must be > 0");
  for (Parameter* p : model.params().all()) p->set_frozen(false);
  AdamW opt(config.optimizer);
  const auto params = model.params().all();
  model.set_training(true);
  model.reseed_dropout(Rng::derive_seed(config.seed, 0x2D));
  TrainLog log;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = shuffled_indices(pairs.size(), Rng::derive_seed(config.seed, 3000 + epoch));
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<Var> lm;
      for (std::size_t i = start; i < end; ++i) lm.push_back(gm_seq_loss(model, vocab, pairs[order[i]]).total());
      model.params().zero_grad();
      const Var total = mean_of(lm);
      TrainRecord rec;
      rec.step = ++step;
      rec.epoch = epoch;
      rec.values["loss_lm"] = total.value().item();
      rec.values["loss_total"] = rec.values["loss_lm"];
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

std::vector<TokenId> prompt_input(const ImModel& im, const Vocab& vocab, const SegmentedSequence& x_g,
                                  Relation r) {
  SegmentedSequence x = append_relation(vocab, x_g, r);
  x.truncate_front(im.config().max_positions);
  return x.flatten();
}

Var collect_prompt(ImModel& im, const Vocab& vocab, const SegmentedSequence& x_g, Relation r) {
  const EncoderState enc = im.encode(prompt_input(im, vocab, x_g, r));
  return ops::slice_rows(enc.hidden, enc.hidden.shape()[0] - 1, 1);
}

PromptSet collect_prompt_set(ImModel& im, const Vocab& vocab, const SegmentedSequence& x_g,
                             std::span<const Relation> relations) {
  PromptSet set;
  for (Relation r : relations) {
    set.relations.push_back(r);
    set.vectors.push_back(collect_prompt(im, vocab, x_g, r));
  }
  return set;
}

PromptedMemory build_memory(const PromptSet& prompts, const EncoderState& enc) {
  const std::size_t d = enc.hidden.shape().at(1);
  std::vector<Var> rows;
  for (const Var& p : prompts.vectors) {
    if (p.value().rank() != 2 || p.shape()[0] != 1 || p.shape()[1] != d) {
      throw DimensionError("build_memory: prompt " + shape_str(p.shape()) + " does not match width " +
                           std::to_string(d));
    }
    rows.push_back(p);
  }
  rows.push_back(enc.hidden);
  PromptedMemory m;
  m.memory = rows.size() == 1 ? enc.hidden : ops::concat_rows(rows);
  m.prompt_rows = prompts.size();
  m.context_rows = enc.hidden.shape()[0];
  return m;
}

EncoderState encode_context(GmModel& gm, const SegmentedSequence& x_g) {
  SegmentedSequence x = x_g;
  x.truncate_front(gm.config().max_positions);
  return gm.encode(x.flatten());
}

LossValue feg_lm_loss(GmModel& gm, const PromptedMemory& memory, std::span<const TokenId> y) {
  if (y.empty()) throw ContractError("feg_lm_loss: empty target");
  const Var h = gm.decode_hidden(gm.embed(decoder_input(y)), memory.memory);
  return LossValue("loss_lm", ops::cross_entropy(gm.lm_logits(ops::slice_rows(h, 0, y.size() + 1)), lm_targets(y)));
}

LossValue feg_cls_loss(GmModel& gm, const PromptedMemory& memory, std::span<const TokenId> y, int label) {
  const TokenId t = as_target(label);
  const Var h = gm.decode_hidden(gm.embed(decoder_input(y)), memory.memory);
  const Var logits = gm.cls_logits(ops::slice_rows(h, y.size() + 1, 1));
  return LossValue("loss_cls", ops::cross_entropy(logits, std::span<const TokenId>(&t, 1)));
}

LossValue gm_total_loss(GmModel& gm, const PromptedMemory& memory, std::span<const TokenId> y, int label,
                        bool use_cls) {
  const TokenId t = as_target(label);
  if (y.empty()) throw ContractError("gm_total_loss: empty target");
  if (label == 1 && !use_cls) throw ContractError("gm_total_loss: a negative example needs the cls term");
  const Var h = gm.decode_hidden(gm.embed(decoder_input(y)), memory.memory);
  LossValue loss;
  if (label == 0) {
    loss.add("loss_lm", ops::cross_entropy(gm.lm_logits(ops::slice_rows(h, 0, y.size() + 1)), lm_targets(y)));
  }
  if (use_cls) {
    const Var logits = gm.cls_logits(ops::slice_rows(h, y.size() + 1, 1));
    loss.add("loss_cls", ops::cross_entropy(logits, std::span<const TokenId>(&t, 1)));
  }
  return loss;
}

}  // namespace coep
