#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "coep/seq2seq/model.hpp"

namespace coep {

enum class Strategy { kGreedy, kTopK };

std::string strategy_name(Strategy s);
std::optional<Strategy> parse_strategy(const std::string& name);

struct DecodeConfig {
  Strategy strategy = Strategy::kTopK;
  std::size_t k = 4;
  std::size_t max_len = 24;
  std::uint64_t seed = 7;
  float temperature = 1.0f;  // logits are divided by this before sampling

  void validate() const;
};

/// Per-step view of a decode, for inspection.
struct DecodeStep {
  std::vector<std::size_t> candidates;  // the top-k ids, best first
  std::vector<double> probabilities;    // renormalized over candidates
  std::size_t chosen = 0;
};

/// Autoregressive decode from `memory`. <s>, <pad> and <unk> are never
/// emitted. Stops at </s> (not included) or after max_len tokens. An empty
/// result is replaced by the best non-special token of the first step.
/// Greedy picks the highest logit (lowest id on ties); top-k keeps the k
/// highest logits in that order, renormalizes and samples.
std::vector<TokenId> decode(Seq2SeqModel& model, const Var& memory, const DecodeConfig& config,
                            std::vector<DecodeStep>* trace = nullptr);

}  // namespace coep
