#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "coep/cli/checkpoint.hpp"
#include "coep/cli/config.hpp"
#include "coep/corpus/io.hpp"
#include "coep/decode/generate.hpp"
#include "coep/metrics/report.hpp"

namespace coep {

/// Corpora as read from a data directory.
struct Corpora {
  std::vector<InferentialTriple> inferential;
  std::vector<SequentialPair> sequential;
  std::vector<Story> train_stories;
  std::vector<Story> test_stories;
  Vocab vocab;
  SkipCounter skipped;
};

/// Writes the bundled synthetic corpora to `out`.
void make_data(const RunConfig& config, const std::filesystem::path& out);
/// Reads inferential.jsonl, sequential.jsonl, stories.jsonl,
/// stories_test.jsonl and vocab.txt; throws DataError on anything missing.
Corpora load_corpora(const std::filesystem::path& dir);

/// Each stage writes its checkpoint, a JSONL training log and the resolved
/// config into `out`, and returns the checkpoint path.
std::filesystem::path stage_finetune_im(const RunConfig& config, const Corpora& data, const std::filesystem::path& out);
std::filesystem::path stage_finetune_gm(const RunConfig& config, const Corpora& data, const std::filesystem::path& out);

/// Test-only hook run after every FEG step, before the freeze audit.
using StepHook = std::function<void(std::size_t step, ImModel&, GmModel&)>;
std::filesystem::path stage_train_feg(const RunConfig& config, const Corpora& data,
                                      const std::filesystem::path& im_ckpt, const std::filesystem::path& gm_ckpt,
                                      const std::filesystem::path& out, const StepHook& hook = {});

/// Loaded IM/GM pair from a train-feg checkpoint.
struct LoadedModels {
  std::unique_ptr<ImModel> im;
  std::unique_ptr<GmModel> gm;
  Vocab vocab;
  bool use_prompts = true;
  std::vector<Relation> relations;
  CoepModels view();
};
LoadedModels load_coep(const std::filesystem::path& ckpt);

/// Next-event predictions for every unfolded test example: writes
/// predictions.txt and references.txt (one line each), plus stories.jsonl
/// with a generated continuation of each test story's first event.
void stage_predict(const RunConfig& config, const Corpora& data, const std::filesystem::path& coep_ckpt,
                   const std::filesystem::path& out);

/// Reads one prediction per line and one tab-separated reference list per
/// line. The optional story JSONL and ranking JSON add story and ranking
/// metrics; a checkpoint plus data directory adds test perplexity.
struct EvalInputs {
  std::filesystem::path pred;
  std::filesystem::path ref;
  std::optional<std::filesystem::path> stories;
  std::optional<std::filesystem::path> rankings;
  std::optional<std::filesystem::path> ckpt;
  std::optional<std::filesystem::path> data;
  std::optional<std::uint64_t> seed;
};
EvalReport stage_eval(const EvalInputs& in);

/// Teacher-forced perplexity of the test next events under the GM.
double test_perplexity(LoadedModels& models, const Corpora& data);

/// Greedy exact-match accuracy over the unfolded test examples.
double exact_match_accuracy(const CoepModels& models, const std::vector<Story>& stories, const DecodeConfig& config);

}  // namespace coep
