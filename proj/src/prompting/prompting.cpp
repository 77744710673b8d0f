#include "coep/prompting/prompting.hpp"

#include <cmath>
#include <limits>

#include "coep/numerics/errors.hpp"
#include "coep/special_tokens.hpp"

namespace coep {

namespace {

bool has_prefix(const std::string& name, const std::vector<std::string>& prefixes) {
  for (const auto& p : prefixes) {
    if (name.rfind(p, 0) == 0) return true;
  }
  return false;
}

Tensor special_mask(std::size_t vocab) {
  Tensor m(Shape{1, vocab});
  const float ninf = -std::numeric_limits<float>::infinity();
  m[kBos] = ninf;
  m[kPad] = ninf;
  m[kUnk] = ninf;
  return m;
}

StDecodeResult st_decode_from(ImModel& im, const Var& memory, const StDecodeConfig& config, Rng& rng) {
  if (config.max_len < 1) throw ParameterError("st_decode: max_len must be >= 1");
  if (!(config.temperature > 0.0f)) throw ParameterError("st_decode: temperature must be > 0");
  StDecodeResult out;
  out.memory = memory;
  const Var mask = ops::constant(special_mask(im.config().vocab_size));
  auto inc = im.start_incremental(memory);
  const TokenId bos = kBos;
  Var input = im.embed(std::span<const TokenId>(&bos, 1));
  for (std::size_t t = 0; t < config.max_len; ++t) {
    const Var logits = ops::add(im.lm_logits(inc.step(input)), mask);
    const std::size_t id = ops::argmax(logits.value().data());
    out.logits.push_back(logits.value());
    if (id == static_cast<std::size_t>(kEos)) break;
    ops::GumbelOptions opts;
    opts.temperature = config.temperature;
    opts.straight_through = true;
    opts.hard_index = std::vector<std::size_t>{id};
    const Var sample = ops::gumbel_softmax_with_noise(logits, ops::gumbel_noise(logits.shape(), rng), opts);
    input = ops::matmul(sample, im.token_table());
    out.ids.push_back(static_cast<TokenId>(id));
    out.inputs.push_back(input);
  }
  return out;
}

}  // namespace

FreezePlan FreezePlan::im_prompt_training() {
  FreezePlan p;
  p.frozen = {"embed.tokens", "decoder.", "lm_head.", "cls_head."};
  p.trainable = {"encoder."};
  return p;
}

void FreezePlan::validate(const ParameterSet& params) const {
  for (const Parameter* p : params.all()) {
    const bool f = has_prefix(p->name(), frozen), t = has_prefix(p->name(), trainable);
    if (f == t) {
      throw ContractError("freeze plan: parameter '" + p->name() + "' is " +
                          (f ? "both frozen and trainable" : "in neither set"));
    }
  }
}

void FreezePlan::apply(ParameterSet& params) const {
  validate(params);
  for (Parameter* p : params.all()) p->set_frozen(has_prefix(p->name(), frozen));
}

FreezeAudit::FreezeAudit(const ParameterSet& params) {
  for (const Parameter* p : params.all()) {
    if (p->frozen()) snapshot_.emplace_back(p->name(), Tensor(p->tensor().shape(), std::vector<float>(
                                                                  p->tensor().data().begin(), p->tensor().data().end())));
  }
}

std::vector<std::string> FreezeAudit::changed(const ParameterSet& params) const {
  std::vector<std::string> out;
  for (const auto& [name, saved] : snapshot_) {
    const Parameter* p = params.find(name);
    if (!p || !p->tensor().bitwise_equal(saved)) out.push_back(name);
  }
  return out;
}

StDecodeResult st_decode_explanation(ImModel& im, std::span<const TokenId> x_i, const StDecodeConfig& config,
                                     Rng& rng) {
  return st_decode_from(im, im.encode(x_i).hidden, config, rng);
}

LossValue semantic_coherence_loss(ImModel& im, const StDecodeResult& decoded) {
  const TokenId bos = kBos, eos = kEos;
  std::vector<Var> rows{im.embed(std::span<const TokenId>(&bos, 1))};
  rows.insert(rows.end(), decoded.inputs.begin(), decoded.inputs.end());
  rows.push_back(im.embed(std::span<const TokenId>(&eos, 1)));
  const Var h = im.decode_hidden(ops::concat_rows(rows), decoded.memory);
  const Var logits = im.cls_logits(ops::slice_rows(h, h.shape()[0] - 1, 1));
  const TokenId consistent = 0;
  return LossValue("loss_sc", ops::cross_entropy(logits, std::span<const TokenId>(&consistent, 1)));
}

LossValue coep_total_loss(const LossValue& gm_loss, const LossValue* sc_loss) {
  LossValue total = gm_loss;
  if (sc_loss) total.merge(*sc_loss);
  return total;
}

CoepResult train_coep(ImModel& im, GmModel& gm, const Vocab& vocab, const std::vector<Story>& stories,
                      const FreezePlan& plan, const CoepConfig& config) {
  if (config.batch_size == 0) throw std::invalid_argument("train_coep: batch size must be > 0");
  std::vector<FegExample> positives;
  for (const Story& s : stories) {
    for (FegExample& e : unfold_story(s)) positives.push_back(std::move(e));
  }
  if (positives.empty()) throw std::invalid_argument("train_coep: no story examples");
  const bool pt = !config.skip_pt && config.use_prompts && !config.relations.empty();

  plan.apply(im.params());
  if (!pt) {
    for (Parameter* p : im.params().all()) p->set_frozen(true);
  }
  for (Parameter* p : gm.params().all()) p->set_frozen(false);
  const FreezeAudit audit(im.params());
  std::vector<Tensor> encoder_before;
  for (Parameter* p : im.params().with_prefix("encoder.")) encoder_before.push_back(p->tensor());

  AdamW im_opt(config.im_optimizer), gm_opt(config.gm_optimizer);
  const auto im_params = im.params().all();
  const auto gm_params = gm.params().all();
  im.set_training(false);
  gm.set_training(true);
  gm.reseed_dropout(Rng::derive_seed(config.seed, 0x3D));

  const std::size_t steps_per_epoch = (positives.size() + config.batch_size - 1) / config.batch_size;
  const std::size_t planned = config.max_steps ? std::min(config.max_steps, steps_per_epoch * config.epochs)
                                               : steps_per_epoch * config.epochs;
  CoepResult result;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto feg = build_feg_corpus(positives, Rng::derive_seed(config.seed, 4000 + epoch));
    const auto order = shuffled_indices(positives.size(), Rng::derive_seed(config.seed, 5000 + epoch));
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      StDecodeConfig st = config.st;
      if (config.anneal_temperature && planned > 1) {
        st.temperature = config.st.temperature +
                         (0.5f - config.st.temperature) * static_cast<float>(step) / static_cast<float>(planned - 1);
      }
      std::vector<Var> lm, cls, sc;
      double explanation_tokens = 0;
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t i = order[b];
        const FegExample& pos = feg[2 * i];
        const FegExample& neg = feg[2 * i + 1];
        const SegmentedSequence x_g = build_gm_input(vocab, pos.history, pos.current);
        PromptSet prompts;
        std::vector<Var> sc_terms;
        if (config.use_prompts) {
          for (std::size_t k = 0; k < config.relations.size(); ++k) {
            const Relation r = config.relations[k];
            const auto x_i = prompt_input(im, vocab, x_g, r);
            prompts.relations.push_back(r);
            if (pt) {
              const Var enc = im.encode(x_i).hidden;
              prompts.vectors.push_back(ops::detach(ops::slice_rows(enc, enc.shape()[0] - 1, 1)));
              Rng rng(Rng::derive_seed(Rng::derive_seed(config.seed, step), b * 64 + k));
              const StDecodeResult decoded = st_decode_from(im, enc, st, rng);
              explanation_tokens += static_cast<double>(decoded.ids.size());
              sc_terms.push_back(semantic_coherence_loss(im, decoded).total());
            } else {
              NoGradGuard guard;
              const Var enc = im.encode(x_i).hidden;
              prompts.vectors.push_back(ops::slice_rows(enc, enc.shape()[0] - 1, 1));
            }
          }
        }
        const PromptedMemory memory = build_memory(prompts, encode_context(gm, x_g));
        if (config.on_memory) config.on_memory(memory);
        const LossValue l_pos = gm_total_loss(gm, memory, vocab.tokenize(pos.target), 0, !config.skip_cls);
        lm.push_back(l_pos.terms().front().second);
        if (!config.skip_cls) {
          cls.push_back(l_pos.terms().back().second);
          const LossValue l_neg = gm_total_loss(gm, memory, vocab.tokenize(neg.target), 1, true);
          cls.push_back(l_neg.terms().front().second);
        }
        if (!sc_terms.empty()) sc.push_back(mean_of(sc_terms));
      }
      LossValue g("loss_lm", mean_of(lm));
      if (!cls.empty()) g.add("loss_cls", mean_of(cls));
      LossValue sc_loss;
      if (!sc.empty()) sc_loss.add("loss_sc", mean_of(sc));
      const LossValue total = coep_total_loss(g, sc.empty() ? nullptr : &sc_loss);

      im.params().zero_grad();
      gm.params().zero_grad();
      const Var t = total.total();
      TrainRecord rec;
      rec.step = ++step;
      rec.epoch = epoch;
      rec.values = total.parts();
      rec.values["loss_total"] = t.value().item();
      if (pt) rec.values["explanation_len"] = explanation_tokens / static_cast<double>((end - start) * config.relations.size());
      backward(t);
      if (pt) im_opt.step(im_params);
      gm_opt.step(gm_params);
      if (config.on_step) config.on_step(step, im, gm);
      const auto broken = audit.changed(im.params());
      ++result.audits;
      if (!broken.empty()) {
        throw FreezeViolation("frozen parameter '" + broken.front() + "' changed at step " + std::to_string(step));
      }
      result.log.push_back(rec);
      if (config.on_record) config.on_record(rec);
      if (config.max_steps && step >= config.max_steps) break;
    }
    if (config.max_steps && step >= config.max_steps) break;
  }
  gm.set_training(false);
  double drift = 0;
  const auto enc_params = im.params().with_prefix("encoder.");
  for (std::size_t i = 0; i < enc_params.size(); ++i) {
    const auto now = enc_params[i]->tensor().data();
    const auto was = encoder_before[i].data();
    for (std::size_t k = 0; k < now.size(); ++k) drift += (double(now[k]) - was[k]) * (double(now[k]) - was[k]);
  }
  result.im_encoder_drift = std::sqrt(drift);
  return result;
}

}  // namespace coep
