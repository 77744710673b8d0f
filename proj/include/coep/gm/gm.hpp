#pragma once

#include <span>
#include <vector>

#include "coep/corpus/dataset.hpp"
#include "coep/im/im.hpp"
#include "coep/seq2seq/model.hpp"
#include "coep/training.hpp"

namespace coep {

/// The generation module. Its decoder cross-attends over the prompted
/// memory, which is longer than its own encoder input.
using GmModel = Seq2SeqModel;

/// Teacher-forced NLL of e_f given ENC_G(<s> e_p </s>) ("loss_lm").
LossValue gm_seq_loss(GmModel& model, const Vocab& vocab, const SequentialPair& pair);

/// Sequential fine-tuning on event pairs; logs loss_lm and loss_total.
TrainLog finetune_gm(GmModel& model, const Vocab& vocab, const std::vector<SequentialPair>& pairs,
                     const TrainConfig& config);

/// Encoder input for prompt collection: x_G followed by the relation phrase,
/// with the history trimmed from the front to fit max_positions.
std::vector<TokenId> prompt_input(const ImModel& im, const Vocab& vocab, const SegmentedSequence& x_g,
                                  Relation r);

/// ENC_I(x_G + r) at the final </s> position, as a [1 x d] row.
Var collect_prompt(ImModel& im, const Vocab& vocab, const SegmentedSequence& x_g, Relation r);

/// Relation-conditioned prompt rows, in the order of `relations`.
struct PromptSet {
  std::vector<Relation> relations;
  std::vector<Var> vectors;  // each [1 x d]

  std::size_t size() const { return vectors.size(); }
};

PromptSet collect_prompt_set(ImModel& im, const Vocab& vocab, const SegmentedSequence& x_g,
                             std::span<const Relation> relations = kAllRelations);

/// H = [prompts ; ENC_G(x_G)].
struct PromptedMemory {
  Var memory;  // [(k + L) x d]
  std::size_t prompt_rows = 0;
  std::size_t context_rows = 0;
};

PromptedMemory build_memory(const PromptSet& prompts, const EncoderState& enc);

/// GM encoder state of x_G, trimmed from the front of the history.
EncoderState encode_context(GmModel& gm, const SegmentedSequence& x_g);

/// Teacher-forced NLL of the future event over the prompted memory ("loss_lm").
LossValue feg_lm_loss(GmModel& gm, const PromptedMemory& memory, std::span<const TokenId> y);

/// Cross entropy of the GM classification head on <s> y </s> ("loss_cls").
LossValue feg_cls_loss(GmModel& gm, const PromptedMemory& memory, std::span<const TokenId> y, int label);

/// L_G for one example from a single decoder pass: loss_lm on label-0
/// examples and loss_cls (unless disabled) on both labels.
LossValue gm_total_loss(GmModel& gm, const PromptedMemory& memory, std::span<const TokenId> y, int label,
                        bool use_cls = true);

}  // namespace coep
