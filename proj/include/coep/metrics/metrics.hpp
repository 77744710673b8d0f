#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace coep {

using Tokens = std::vector<std::string>;

/// exp(mean NLL). Throws on empty input or non-finite values.
double perplexity(std::span<const double> token_nlls);

/// Corpus BLEU up to order n with uniform weights. Clipped n-gram counts
/// and lengths are summed over the corpus before the geometric mean; a
/// zero precision is replaced by 1e-9. The brevity penalty uses the
/// reference length closest to each candidate (shorter on ties). Returns 0
/// when every candidate is empty.
double corpus_bleu(const std::vector<Tokens>& candidates, const std::vector<std::vector<Tokens>>& references,
                   std::size_t n);
double bleu_n(const Tokens& candidate, const std::vector<Tokens>& references, std::size_t n);

/// LCS F-measure with beta = 1.2: (1 + b^2) P R / (R + b^2 P).
double rouge_l(const Tokens& candidate, const Tokens& reference);
/// Per-candidate max over references, averaged.
double corpus_rouge_l(const std::vector<Tokens>& candidates, const std::vector<std::vector<Tokens>>& references);

/// CIDEr-D: n = 1..4 TF-IDF vectors with document frequencies over the
/// reference sets, clipped candidate counts, Gaussian length penalty
/// (sigma 6), averaged over references and n, times 10. idf is
/// log(N) - log(max(1, df)), so a single-document corpus scores 0.
double cider(const std::vector<Tokens>& candidates, const std::vector<std::vector<Tokens>>& references);

/// Distinct n-grams over all n-grams across texts; 0 when there are none.
double distinct_n(const std::vector<Tokens>& texts, std::size_t n);

/// Per story, the share of n-gram occurrences that repeat an earlier one
/// in the same story (0 with no n-grams); averaged over stories.
double repetition_n(const std::vector<Tokens>& stories, std::size_t n);

/// Percentage of 1-based ranks that are <= k.
double hit_at_k(std::span<const std::size_t> ranks, std::size_t k);

/// Average ranks (1-based, ties share the mean rank).
std::vector<double> average_ranks(std::span<const double> values);
/// Pearson correlation of average ranks.
double spearman_rho(std::span<const double> a, std::span<const double> b);
/// Kendall tau-b.
double kendall_tau(std::span<const double> a, std::span<const double> b);

}  // namespace coep
