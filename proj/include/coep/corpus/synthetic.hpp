#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "coep/corpus/io.hpp"

namespace coep {

/// Bundled stand-in corpora from a small story grammar.
///
/// Every story follows one "need arc": a character states a need (hungry,
/// tired, lonely ...), then takes four steps that resolve it. Several arcs
/// share their second event ("went to the kitchen" serves both hunger and
/// thirst), so the third event is only predictable from the history. The
/// inferential triples describe each arc step under the nine relations
/// (xWant names the next step, xNeed the previous one), and the sequential
/// triples link arc steps with the six event-event relations.
struct SyntheticCorpora {
  std::vector<InferentialTriple> inferential;
  std::vector<RawTriple> sequential;
  std::vector<Story> train_stories;
  std::vector<Story> test_stories;
};

struct SyntheticOptions {
  std::uint64_t seed = 7;
  std::size_t train_stories = 100;
  std::size_t test_stories = 20;
};

SyntheticCorpora generate_synthetic(const SyntheticOptions& options);

/// Vocabulary over all three training corpora plus the relation phrases.
Vocab build_vocab(const std::vector<InferentialTriple>& inferential,
                  const std::vector<SequentialPair>& sequential,
                  const std::vector<Story>& stories);

/// Writes inferential.jsonl, sequential.jsonl, stories.jsonl,
/// stories_test.jsonl and vocab.txt into `dir`.
void write_synthetic(const std::filesystem::path& dir, const SyntheticCorpora& corpora);

}  // namespace coep
