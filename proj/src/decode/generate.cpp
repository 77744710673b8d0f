#include "coep/decode/generate.hpp"

#include <stdexcept>

namespace coep {

PromptedMemory context_memory(const CoepModels& models, const std::vector<std::string>& history,
                              const std::string& current) {
  if (!models.gm || !models.vocab) throw std::invalid_argument("generation needs a GM and a vocabulary");
  const SegmentedSequence x_g = build_gm_input(*models.vocab, history, current);
  PromptSet prompts;
  if (models.use_prompts) {
    if (!models.im) throw std::invalid_argument("prompted generation needs an IM");
    prompts = collect_prompt_set(*models.im, *models.vocab, x_g, models.relations);
  }
  return build_memory(prompts, encode_context(*models.gm, x_g));
}

std::string generate_future_event(const CoepModels& models, const std::vector<std::string>& history,
                                  const std::string& current, const DecodeConfig& config) {
  NoGradGuard guard;
  const PromptedMemory memory = context_memory(models, history, current);
  return models.vocab->detokenize(decode(*models.gm, memory.memory, config));
}

std::vector<std::string> tell_story(const CoepModels& models, const std::string& first_event, std::size_t steps,
                                    const DecodeConfig& config, std::vector<std::vector<std::string>>* histories) {
  if (steps < 1) throw std::invalid_argument("tell_story: steps must be >= 1");
  std::vector<std::string> story{first_event};
  for (std::size_t i = 0; i < steps; ++i) {
    const std::vector<std::string> history(story.begin(), story.end() - 1);
    if (histories) histories->push_back(history);
    DecodeConfig step = config;
    step.seed = Rng::derive_seed(config.seed, i);
    story.push_back(generate_future_event(models, history, story.back(), step));
  }
  return story;
}

}  // namespace coep
