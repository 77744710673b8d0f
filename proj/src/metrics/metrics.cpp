#include "coep/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace coep {

namespace {

using Counts = std::map<std::vector<std::string>, std::size_t>;

Counts ngram_counts(const Tokens& t, std::size_t n) {
  Counts c;
  if (n == 0) return c;
  for (std::size_t i = 0; i + n <= t.size(); ++i) ++c[Tokens(t.begin() + i, t.begin() + i + n)];
  return c;
}

std::size_t ngram_total(const Tokens& t, std::size_t n) { return t.size() >= n ? t.size() - n + 1 : 0; }

void check_corpus(std::size_t cands, std::size_t refs) {
  if (cands != refs) throw std::invalid_argument("metric: candidate and reference counts differ");
}

}  // namespace

double perplexity(std::span<const double> token_nlls) {
  if (token_nlls.empty()) throw std::invalid_argument("perplexity of an empty sequence");
  double s = 0;
  for (double v : token_nlls) {
    if (!std::isfinite(v)) throw std::invalid_argument("perplexity: non-finite NLL");
    s += v;
  }
  return std::exp(s / static_cast<double>(token_nlls.size()));
}

double corpus_bleu(const std::vector<Tokens>& candidates, const std::vector<std::vector<Tokens>>& references,
                   std::size_t n) {
  if (n == 0) throw std::invalid_argument("bleu: n must be >= 1");
  check_corpus(candidates.size(), references.size());
  std::vector<double> matches(n, 0.0), totals(n, 0.0);
  double cand_len = 0, ref_len = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const Tokens& c = candidates[i];
    cand_len += static_cast<double>(c.size());
    std::size_t best = 0;
    bool have = false;
    for (const Tokens& r : references[i]) {
      const auto diff = [&](std::size_t len) { return std::abs(static_cast<long>(len) - static_cast<long>(c.size())); };
      if (!have || diff(r.size()) < diff(best) || (diff(r.size()) == diff(best) && r.size() < best)) {
        best = r.size();
        have = true;
      }
    }
    ref_len += static_cast<double>(best);
    for (std::size_t k = 1; k <= n; ++k) {
      const Counts cc = ngram_counts(c, k);
      Counts max_ref;
      for (const Tokens& r : references[i]) {
        for (const auto& [g, cnt] : ngram_counts(r, k)) max_ref[g] = std::max(max_ref[g], cnt);
      }
      for (const auto& [g, cnt] : cc) {
        auto it = max_ref.find(g);
        if (it != max_ref.end()) matches[k - 1] += static_cast<double>(std::min(cnt, it->second));
      }
      totals[k - 1] += static_cast<double>(ngram_total(c, k));
    }
  }
  if (cand_len == 0) return 0.0;
  double prod = 1;
  for (std::size_t k = 0; k < n; ++k) {
    prod *= (matches[k] > 0 && totals[k] > 0) ? matches[k] / totals[k] : 1e-9;
  }
  const double bp = cand_len > ref_len ? 1.0 : std::exp(1.0 - ref_len / cand_len);
  return bp * std::pow(prod, 1.0 / static_cast<double>(n));
}

double bleu_n(const Tokens& candidate, const std::vector<Tokens>& references, std::size_t n) {
  return corpus_bleu({candidate}, {references}, n);
}

double rouge_l(const Tokens& candidate, const Tokens& reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  std::vector<std::size_t> prev(reference.size() + 1, 0), cur(reference.size() + 1, 0);
  for (std::size_t i = 1; i <= candidate.size(); ++i) {
    for (std::size_t j = 1; j <= reference.size(); ++j) {
      cur[j] = candidate[i - 1] == reference[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  const double lcs = static_cast<double>(prev[reference.size()]);
  if (lcs == 0) return 0.0;
  const double p = lcs / static_cast<double>(candidate.size());
  const double r = lcs / static_cast<double>(reference.size());
  const double b2 = 1.2 * 1.2;
  return (1 + b2) * p * r / (r + b2 * p);
}

double corpus_rouge_l(const std::vector<Tokens>& candidates, const std::vector<std::vector<Tokens>>& references) {
  check_corpus(candidates.size(), references.size());
  if (candidates.empty()) return 0.0;
  double s = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    double best = 0;
    for (const Tokens& r : references[i]) best = std::max(best, rouge_l(candidates[i], r));
    s += best;
  }
  return s / static_cast<double>(candidates.size());
}

double cider(const std::vector<Tokens>& candidates, const std::vector<std::vector<Tokens>>& references) {
  check_corpus(candidates.size(), references.size());
  if (candidates.empty()) return 0.0;
  constexpr std::size_t kMaxN = 4;
  constexpr double kSigma = 6.0;
  std::map<Tokens, double> df;
  for (const auto& refs : references) {
    std::map<Tokens, bool> seen;
    for (const Tokens& r : refs) {
      for (std::size_t k = 1; k <= kMaxN; ++k) {
        for (const auto& kv : ngram_counts(r, k)) seen[kv.first] = true;
      }
    }
    for (const auto& kv : seen) df[kv.first] += 1.0;
  }
  const double log_n = std::log(static_cast<double>(references.size()));
  struct Vec {
    std::vector<std::map<Tokens, double>> w{kMaxN};
    std::vector<double> norm = std::vector<double>(kMaxN, 0.0);
    double length = 0;
  };
  const auto vectorize = [&](const Tokens& t) {
    Vec v;
    for (std::size_t k = 1; k <= kMaxN; ++k) {
      for (const auto& [g, cnt] : ngram_counts(t, k)) {
        auto it = df.find(g);
        const double d = it == df.end() ? 0.0 : it->second;
        const double w = static_cast<double>(cnt) * (log_n - std::log(std::max(1.0, d)));
        v.w[k - 1][g] = w;
        v.norm[k - 1] += w * w;
      }
      v.norm[k - 1] = std::sqrt(v.norm[k - 1]);
    }
    v.length = static_cast<double>(t.size());
    return v;
  };
  double total = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const Vec c = vectorize(candidates[i]);
    std::vector<double> score(kMaxN, 0.0);
    for (const Tokens& r : references[i]) {
      const Vec rv = vectorize(r);
      const double delta = c.length - rv.length;
      for (std::size_t k = 0; k < kMaxN; ++k) {
        double val = 0;
        for (const auto& [g, w] : c.w[k]) {
          auto it = rv.w[k].find(g);
          if (it != rv.w[k].end()) val += std::min(w, it->second) * it->second;
        }
        if (c.norm[k] != 0 && rv.norm[k] != 0) val /= c.norm[k] * rv.norm[k];
        val *= std::exp(-(delta * delta) / (2 * kSigma * kSigma));
        score[k] += val;
      }
    }
    double mean_n = 0;
    for (double s : score) mean_n += s / static_cast<double>(std::max<std::size_t>(1, references[i].size()));
    total += mean_n / kMaxN * 10.0;
  }
  return total / static_cast<double>(candidates.size());
}

double distinct_n(const std::vector<Tokens>& texts, std::size_t n) {
  if (n == 0) throw std::invalid_argument("distinct_n: n must be >= 1");
  std::map<Tokens, std::size_t> all;
  std::size_t total = 0;
  for (const Tokens& t : texts) {
    for (const auto& [g, cnt] : ngram_counts(t, n)) all[g] += cnt;
    total += ngram_total(t, n);
  }
  return total == 0 ? 0.0 : static_cast<double>(all.size()) / static_cast<double>(total);
}

double repetition_n(const std::vector<Tokens>& stories, std::size_t n) {
  if (n == 0) throw std::invalid_argument("repetition_n: n must be >= 1");
  if (stories.empty()) return 0.0;
  double s = 0;
  for (const Tokens& t : stories) {
    const std::size_t total = ngram_total(t, n);
    if (total == 0) continue;
    std::size_t repeated = 0;
    for (const auto& kv : ngram_counts(t, n)) repeated += kv.second - 1;
    s += static_cast<double>(repeated) / static_cast<double>(total);
  }
  return s / static_cast<double>(stories.size());
}

double hit_at_k(std::span<const std::size_t> ranks, std::size_t k) {
  if (ranks.empty()) throw std::invalid_argument("hit_at_k: no rankings");
  std::size_t hits = 0;
  for (std::size_t r : ranks) {
    if (r == 0) throw std::invalid_argument("hit_at_k: ranks are 1-based");
    hits += r <= k;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(ranks.size());
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && values[idx[j + 1]] == values[idx[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman_rho(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("spearman_rho: need two equal-length series");
  const auto ra = average_ranks(a), rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0 || sbb == 0) throw std::invalid_argument("spearman_rho: a series is constant");
  return sab / std::sqrt(saa * sbb);
}

double kendall_tau(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("kendall_tau: need two equal-length series");
  double concordant = 0, discordant = 0, ties_a = 0, ties_b = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const double da = a[i] - a[j], db = b[i] - b[j];
      if (da == 0 && db == 0) continue;
      if (da == 0) {
        ++ties_a;
      } else if (db == 0) {
        ++ties_b;
      } else if ((da > 0) == (db > 0)) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  }
  const double denom = std::sqrt((concordant + discordant + ties_a) * (concordant + discordant + ties_b));
  if (denom == 0) throw std::invalid_argument("kendall_tau: a series is constant");
  return (concordant - discordant) / denom;
}

}  // namespace coep
