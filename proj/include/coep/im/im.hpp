#pragma once

#include <span>
#include <string>
#include <vector>

#include "coep/corpus/dataset.hpp"
#include "coep/decode/decode.hpp"
#include "coep/seq2seq/model.hpp"
#include "coep/training.hpp"

namespace coep {

/// The inference module: one encoder-decoder whose classification head is
/// the contrastive discriminator.
using ImModel = Seq2SeqModel;

/// Decoder input <s> y </s> and the LM targets y </s>.
std::vector<TokenId> decoder_input(std::span<const TokenId> y);
std::vector<TokenId> lm_targets(std::span<const TokenId> y);

/// Teacher-forced mean NLL over the target tokens and the closing </s>
/// ("loss_lm").
LossValue im_lm_loss(ImModel& model, const SegmentedSequence& x, std::span<const TokenId> y);

/// Binary cross entropy of the discriminator against `label` ("loss_disc").
LossValue im_disc_loss(ImModel& model, const SegmentedSequence& x, std::span<const TokenId> y, int label);

/// P(label 0 | x, y): the probability that y is a consistent inference.
double discriminator_score(ImModel& model, const SegmentedSequence& x, std::span<const TokenId> y);

/// Both objectives from one encoder and one decoder pass. Label-1 examples
/// contribute no LM term.
LossValue im_example_loss(ImModel& model, const ImExample& example);

/// Joint LM + discriminator fine-tuning. Negatives are resampled every
/// epoch. Each step averages the LM loss over the batch positives and the
/// discriminator loss over the whole batch; the log records loss_lm,
/// loss_disc and loss_total.
TrainLog finetune_im(ImModel& model, const Vocab& vocab, const std::vector<InferentialTriple>& triples,
                     const TrainConfig& config);

/// Decodes the tail for (event, relation) and detokenizes it.
std::string generate_explanation(ImModel& model, const Vocab& vocab, const std::string& event, Relation r,
                                 const DecodeConfig& config);

}  // namespace coep
