#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "coep/corpus/io.hpp"
#include "coep/gm/gm.hpp"
#include "coep/im/im.hpp"
#include "coep/training.hpp"

namespace coep {

/// Raised when a frozen parameter changed during training.
class FreezeViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Which IM parameters are frozen during prompt training. Every parameter
/// must match exactly one prefix list.
struct FreezePlan {
  std::vector<std::string> frozen;
  std::vector<std::string> trainable;

  /// IM decoder, LM head, discriminator and the shared token table frozen;
  /// the IM encoder trainable.
  static FreezePlan im_prompt_training();

  /// Throws ContractError if a parameter matches neither or both lists.
  void validate(const ParameterSet& params) const;
  void apply(ParameterSet& params) const;
};

/// Bitwise copy of the frozen parameters, checked after each step.
class FreezeAudit {
 public:
  explicit FreezeAudit(const ParameterSet& params);
  /// Names of frozen parameters whose values changed.
  std::vector<std::string> changed(const ParameterSet& params) const;
  std::size_t size() const { return snapshot_.size(); }

 private:
  std::vector<std::pair<std::string, Tensor>> snapshot_;
};

struct StDecodeConfig {
  std::size_t max_len = 8;
  float temperature = 1.0f;
};

/// Differentiable explanation decode.
struct StDecodeResult {
  Var memory;                    // ENC_I(x_I), shared with the discriminator pass
  std::vector<TokenId> ids;      // argmax path, closing </s> excluded
  std::vector<Var> inputs;       // GS(P) E_V rows fed to the decoder, one per id
  std::vector<Tensor> logits;    // per-step logits after masking <s>, <pad>, <unk>
};

/// Greedy decode from ENC_I(x_I) where each next decoder input is the
/// straight-through Gumbel-softmax sample times E_V. The forward one-hot
/// selects the argmax of the step's logits; the backward pass uses the
/// relaxed sample. Stops at </s> or max_len.
StDecodeResult st_decode_explanation(ImModel& im, std::span<const TokenId> x_i, const StDecodeConfig& config,
                                     Rng& rng);

/// -log P(label 0 | x_I, u^p) from the discriminator run on
/// <s> inputs </s> ("loss_sc").
LossValue semantic_coherence_loss(ImModel& im, const StDecodeResult& decoded);

/// L = L_G^lm + L_G^cls + L_sc over present components.
LossValue coep_total_loss(const LossValue& gm_loss, const LossValue* sc_loss);

struct CoepConfig {
  std::size_t epochs = 3;
  /// Contexts per step; each brings its positive and one sampled negative.
  std::size_t batch_size = 8;
  std::size_t max_steps = 0;
  AdamWConfig im_optimizer;
  AdamWConfig gm_optimizer;
  std::uint64_t seed = 7;
  bool skip_pt = false;    // no L_sc; the IM encoder is not updated
  bool skip_cls = false;   // no L_G^cls; negatives are not used
  bool use_prompts = true; // false trains the GM alone on ENC_G(x_G)
  std::vector<Relation> relations{kAllRelations.begin(), kAllRelations.end()};
  StDecodeConfig st;
  /// Linear temperature schedule from st.temperature to 0.5 over the run.
  bool anneal_temperature = false;
  /// Called after every optimizer step and before the freeze audit.
  std::function<void(std::size_t step, ImModel&, GmModel&)> on_step;
  std::function<void(const PromptedMemory&)> on_memory;
  std::function<void(const TrainRecord&)> on_record;
};

struct CoepResult {
  TrainLog log;
  /// L2 distance between the IM encoder parameters before and after.
  double im_encoder_drift = 0.0;
  std::size_t audits = 0;
};

/// Joint FEG + prompt training. The plan is applied to the IM; the GM is
/// fully trainable. Throws FreezeViolation when an audit fails.
CoepResult train_coep(ImModel& im, GmModel& gm, const Vocab& vocab, const std::vector<Story>& stories,
                      const FreezePlan& plan, const CoepConfig& config);

}  // namespace coep
