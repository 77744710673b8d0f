#include "coep/decode/decode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "coep/numerics/errors.hpp"
#include "coep/special_tokens.hpp"

namespace coep {

std::string strategy_name(Strategy s) { return s == Strategy::kGreedy ? "greedy" : "topk"; }

std::optional<Strategy> parse_strategy(const std::string& name) {
  if (name == "greedy") return Strategy::kGreedy;
  if (name == "topk") return Strategy::kTopK;
  return std::nullopt;
}

void DecodeConfig::validate() const {
  if (k < 1) throw ParameterError("decode: k must be >= 1");
  if (max_len < 1) throw ParameterError("decode: max_len must be >= 1");
  if (!(temperature > 0.0f)) throw ParameterError("decode: temperature must be > 0");
}

namespace {

bool emittable(std::size_t id) { return id != kBos && id != kPad && id != kUnk; }

// Emittable ids ordered by (logit desc, id asc).
std::vector<std::size_t> ranked(std::span<const float> logits) {
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (emittable(i)) ids.push_back(i);
  }
  std::stable_sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) { return logits[a] > logits[b]; });
  return ids;
}

}  // namespace

std::vector<TokenId> decode(Seq2SeqModel& model, const Var& memory, const DecodeConfig& config,
                            std::vector<DecodeStep>* trace) {
  config.validate();
  NoGradGuard no_grad;
  Rng rng(config.seed);
  auto inc = model.start_incremental(memory);
  std::vector<TokenId> out;
  TokenId prev = kBos;
  std::optional<TokenId> fallback;
  for (std::size_t t = 0; t < config.max_len && t < model.config().max_positions; ++t) {
    const Var row = model.lm_logits(inc.step(model.embed(std::span<const TokenId>(&prev, 1))));
    const auto logits = row.value().data();
    const auto order = ranked(logits);
    if (!fallback) {
      for (std::size_t id : order) {
        if (!is_special(static_cast<TokenId>(id))) {
          fallback = static_cast<TokenId>(id);
          break;
        }
      }
    }
    DecodeStep step;
    const std::size_t k = config.strategy == Strategy::kGreedy ? 1 : std::min(config.k, order.size());
    step.candidates.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    const double top = logits[step.candidates.front()] / config.temperature;
    double z = 0;
    for (std::size_t id : step.candidates) {
      const double p = std::exp(logits[id] / config.temperature - top);
      step.probabilities.push_back(p);
      z += p;
    }
    for (double& p : step.probabilities) p /= z;
    std::size_t pick = 0;
    if (k > 1) {
      const double u = rng.uniform();
      double c = 0;
      pick = k - 1;
      for (std::size_t i = 0; i < k; ++i) {
        c += step.probabilities[i];
        if (u < c) {
          pick = i;
          break;
        }
      }
    }
    step.chosen = step.candidates[pick];
    if (trace) trace->push_back(step);
    const TokenId id = static_cast<TokenId>(step.chosen);
    if (id == kEos) break;
    out.push_back(id);
    prev = id;
  }
  if (out.empty() && fallback) out.push_back(*fallback);
  return out;
}

}  // namespace coep
