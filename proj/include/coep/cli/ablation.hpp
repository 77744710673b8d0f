#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "coep/cli/config.hpp"

namespace coep {

/// One row of the ablation table: which stages are switched off.
struct AblationVariant {
  std::string name;  // full, -PT, -SKG, -CLS, GM-only
  bool skip_pt = false;
  bool skip_skg = false;
  bool skip_cls = false;
  bool use_prompts = true;

  /// Directory-safe form of the name.
  std::string slug() const;
};

/// Throws UsageError on an unknown name. "all" expands to every variant.
std::vector<AblationVariant> ablation_variants(const std::vector<std::string>& names);

struct AblationCell {
  std::string variant;
  std::uint64_t seed = 0;
  double exact_match = 0;
  double bleu_1 = 0;
  double bleu_2 = 0;
  double rouge_l = 0;
  double perplexity = 0;
  std::size_t steps = 0;
  double seconds = 0;
};

struct AblationResult {
  std::vector<std::string> variants;
  std::vector<std::uint64_t> seeds;
  std::vector<AblationCell> cells;

  double mean(const std::string& variant, double AblationCell::*metric) const;
  double stddev(const std::string& variant, double AblationCell::*metric) const;
  std::string to_json(const RunConfig& config) const;
  std::string to_markdown() const;
};

/// For each seed: fresh synthetic data and one IM/GM fine-tuning shared by
/// every variant, then a train-feg run per variant with the same step
/// budget, scored with greedy decoding on the test stories.
AblationResult run_ablation(const RunConfig& base, const std::vector<std::uint64_t>& seeds,
                            const std::vector<AblationVariant>& variants, const std::filesystem::path& out);

}  // namespace coep
