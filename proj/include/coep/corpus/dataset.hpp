#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "coep/corpus/relations.hpp"
#include "coep/corpus/vocab.hpp"
#include "coep/numerics/rng.hpp"

namespace coep {

struct InferentialTriple {
  std::string head;
  Relation relation;
  std::string tail;
};

struct SequentialPair {
  std::string preceding;
  std::string future;
  std::optional<SequentialRelation> source;
};

struct FegExample {
  std::vector<std::string> history;
  std::string current;
  std::string target;
  int label = 0;  // 0 = true continuation, 1 = sampled negative
};

/// Token sequence made of segments, each rendered as <s> tokens </s>.
struct SegmentedSequence {
  std::vector<std::vector<TokenId>> segments;

  std::vector<TokenId> flatten() const;
  std::size_t length() const;
  /// Drops tokens from the front of the first segment until the flattened
  /// length fits `max_tokens` (later segments stay intact). Returns the
  /// number of tokens removed.
  std::size_t truncate_front(std::size_t max_tokens);
};

struct ImExample {
  SegmentedSequence x;
  std::vector<TokenId> y;
  Relation relation = Relation::kXIntent;
  int label = 0;  // 0 = consistent, 1 = mismatched tail
};

/// x_I: <s> event </s> <s> relation phrase </s>
SegmentedSequence build_im_input(const Vocab& vocab, const std::string& event, Relation r);

/// x_G: <s> history joined by spaces </s> <s> current </s>. Empty history
/// gives an empty first segment.
SegmentedSequence build_gm_input(const Vocab& vocab, const std::vector<std::string>& history,
                                 const std::string& current);

/// x_G followed by the relation phrase segment (the prompt-collection input).
SegmentedSequence append_relation(const Vocab& vocab, SegmentedSequence x, Relation r);

/// Counts raw triples dropped during normalization, by relation name.
struct SkipCounter {
  std::map<std::string, std::size_t> by_relation;
  std::size_t total() const;
};

/// Orders a raw event-event triple temporally. Forward relations keep
/// (head -> tail); HasPrerequisite / HasLastSubevent are reversed. Other
/// relations are skipped and counted.
std::optional<SequentialPair> sequentialize_triple(const std::string& head,
                                                   const std::string& relation,
                                                   const std::string& tail,
                                                   SkipCounter* skipped = nullptr);

/// An n-event story unfolds to n-1 examples: history = events before the
/// current one, current = event i-1, target = event i.
std::vector<FegExample> unfold_story(const std::vector<std::string>& events);

/// Distinct tails per relation, in first-seen order.
class TailIndex {
 public:
  explicit TailIndex(const std::vector<InferentialTriple>& triples);
  const std::vector<std::string>& tails(Relation r) const;
  const std::vector<std::string>& all_tails() const { return all_; }
  /// True the first time it is called for `r` (used to warn once).
  bool first_fallback(Relation r) const;

 private:
  mutable std::vector<bool> warned_;
  std::vector<std::vector<std::string>> by_relation_;
  std::vector<std::string> all_;
};

ImExample make_im_example(const Vocab& vocab, const InferentialTriple& t, int label = 0);

/// Negative pair for an inferential triple: same x_I, tail drawn uniformly
/// from the other tails of the same relation. When none exists the tail is
/// drawn from every relation and a warning is logged (once per relation
/// and index).
ImExample negative_sample_im(const Vocab& vocab, const InferentialTriple& t,
                             const TailIndex& index, Rng& rng);

/// Negative FEG pair: the target replaced by a different event from `pool`.
FegExample negative_sample_feg(const FegExample& example, const std::vector<std::string>& pool,
                               Rng& rng);

/// Positive/negative IM corpus, interleaved (pos, neg, pos, neg ...). Each
/// record uses its own stream derived from `seed` and its index.
std::vector<ImExample> build_im_corpus(const Vocab& vocab,
                                       const std::vector<InferentialTriple>& triples,
                                       std::uint64_t seed);

/// All targets of a story set, in order, deduplicated.
std::vector<std::string> event_pool(const std::vector<FegExample>& examples);

std::vector<FegExample> build_feg_corpus(const std::vector<FegExample>& positives,
                                         std::uint64_t seed);

}  // namespace coep
