#pragma once

#include <string>
#include <vector>

#include "coep/decode/decode.hpp"
#include "coep/gm/gm.hpp"

namespace coep {

/// A trained IM/GM pair. Without prompts the GM decodes over ENC_G(x_G)
/// alone.
struct CoepModels {
  ImModel* im = nullptr;
  GmModel* gm = nullptr;
  const Vocab* vocab = nullptr;
  bool use_prompts = true;
  std::vector<Relation> relations{kAllRelations.begin(), kAllRelations.end()};
};

/// Prompted memory for (history, current) under the models' settings.
PromptedMemory context_memory(const CoepModels& models, const std::vector<std::string>& history,
                              const std::string& current);

std::string generate_future_event(const CoepModels& models, const std::vector<std::string>& history,
                                  const std::string& current, const DecodeConfig& config);

/// Starts from `first_event` and appends `steps` generated events, each
/// conditioned on every event so far (generated text is re-tokenized).
/// Step i decodes with a seed derived from config.seed and i. When
/// `histories` is given it receives the history used at each step.
std::vector<std::string> tell_story(const CoepModels& models, const std::string& first_event, std::size_t steps,
                                    const DecodeConfig& config,
                                    std::vector<std::vector<std::string>>* histories = nullptr);

}  // namespace coep
