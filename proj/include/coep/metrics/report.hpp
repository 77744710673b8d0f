#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "coep/metrics/metrics.hpp"

namespace coep {

struct ExampleScore {
  std::string prediction;
  bool exact = false;
  double bleu_1 = 0;
  double rouge_l = 0;
};

/// Human-evaluation style rankings: 1-based ranks of one system, plus two
/// score series to correlate.
struct RankingInput {
  std::vector<std::size_t> ranks;
  std::vector<std::size_t> ks{1, 3};
  std::vector<double> scores_a;
  std::vector<double> scores_b;
};

struct EvalReport {
  std::map<std::string, double> metrics;
  std::vector<std::string> unavailable{"meteor", "bertscore"};
  std::vector<ExampleScore> per_example;
  std::map<std::string, std::string> metadata;

  /// Throws std::logic_error when a metric leaves its documented range.
  void check_ranges() const;
  /// Single JSON document; keys sorted, numbers printed round-trip.
  std::string to_json() const;
};

/// Scores predictions against per-example reference lists. Texts are
/// tokenized with the corpus tokenizer. Generated stories, when given,
/// add story-level repetition and distinct scores.
EvalReport evaluate(const std::vector<std::string>& predictions,
                    const std::vector<std::vector<std::string>>& references,
                    const std::vector<std::vector<std::string>>* stories = nullptr,
                    const RankingInput* rankings = nullptr);

}  // namespace coep
