#include "coep/metrics/report.hpp"

#include <stdexcept>

#include "coep/corpus/vocab.hpp"
#include "json.hpp"

namespace coep {

namespace {

std::pair<double, double> range_of(const std::string& name) {
  if (name == "cider") return {0.0, 1e300};
  if (name == "perplexity") return {1.0, 1e300};
  if (name.starts_with("hit_at_")) return {0.0, 100.0};
  if (name == "spearman_rho" || name == "kendall_tau") return {-1.0, 1.0};
  return {0.0, 1.0};
}

}  // namespace

void EvalReport::check_ranges() const {
  for (const auto& [name, v] : metrics) {
    const auto [lo, hi] = range_of(name);
    // float rounding may land a hair outside a closed bound
    if (!(v >= lo - 1e-12 && v <= hi + 1e-12)) {
      throw std::logic_error("metric " + name + " = " + std::to_string(v) + " is out of range");
    }
  }
}

std::string EvalReport::to_json() const {
  using json = nlohmann::json;
  json j;
  j["metrics"] = json::object();
  for (const auto& [k, v] : metrics) j["metrics"][k] = v;
  j["unavailable"] = unavailable;
  j["per_example"] = json::array();
  for (std::size_t i = 0; i < per_example.size(); ++i) {
    const auto& e = per_example[i];
    j["per_example"].push_back(
        {{"index", i}, {"prediction", e.prediction}, {"exact", e.exact}, {"bleu_1", e.bleu_1}, {"rouge_l", e.rouge_l}});
  }
  j["metadata"] = metadata;
  return j.dump(2) + "\n";
}

EvalReport evaluate(const std::vector<std::string>& predictions,
                    const std::vector<std::vector<std::string>>& references,
                    const std::vector<std::vector<std::string>>* stories, const RankingInput* rankings) {
  if (predictions.size() != references.size()) {
    throw std::invalid_argument("evaluate: " + std::to_string(predictions.size()) + " predictions for " +
                                std::to_string(references.size()) + " references");
  }
  if (predictions.empty()) throw std::invalid_argument("evaluate: nothing to score");
  std::vector<Tokens> cands;
  std::vector<std::vector<Tokens>> refs;
  EvalReport rep;
  double exact = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (references[i].empty()) throw std::invalid_argument("evaluate: example " + std::to_string(i) + " has no reference");
    cands.push_back(tokenize_words(predictions[i]));
    refs.emplace_back();
    ExampleScore s;
    s.prediction = predictions[i];
    for (const auto& r : references[i]) {
      refs.back().push_back(tokenize_words(r));
      s.exact = s.exact || refs.back().back() == cands.back();
      s.rouge_l = std::max(s.rouge_l, rouge_l(cands.back(), refs.back().back()));
    }
    s.bleu_1 = bleu_n(cands.back(), refs.back(), 1);
    exact += s.exact;
    rep.per_example.push_back(std::move(s));
  }
  rep.metrics["bleu_1"] = corpus_bleu(cands, refs, 1);
  rep.metrics["bleu_2"] = corpus_bleu(cands, refs, 2);
  rep.metrics["bleu_4"] = corpus_bleu(cands, refs, 4);
  rep.metrics["rouge_l"] = corpus_rouge_l(cands, refs);
  rep.metrics["cider"] = cider(cands, refs);
  rep.metrics["distinct_1"] = distinct_n(cands, 1);
  rep.metrics["distinct_2"] = distinct_n(cands, 2);
  rep.metrics["exact_match"] = exact / static_cast<double>(cands.size());
  rep.metadata["examples"] = std::to_string(cands.size());

  if (stories && !stories->empty()) {
    std::vector<Tokens> flat;
    for (const auto& story : *stories) {
      Tokens t;
      for (const auto& e : story) {
        const auto w = tokenize_words(e);
        t.insert(t.end(), w.begin(), w.end());
      }
      flat.push_back(std::move(t));
    }
    for (std::size_t n : {2u, 3u, 4u}) rep.metrics["story_repetition_" + std::to_string(n)] = repetition_n(flat, n);
    rep.metrics["story_distinct_2"] = distinct_n(flat, 2);
    rep.metadata["stories"] = std::to_string(flat.size());
  }
  if (rankings) {
    if (!rankings->ranks.empty()) {
      for (std::size_t k : rankings->ks) rep.metrics["hit_at_" + std::to_string(k)] = hit_at_k(rankings->ranks, k);
    }
    if (!rankings->scores_a.empty()) {
      rep.metrics["spearman_rho"] = spearman_rho(rankings->scores_a, rankings->scores_b);
      rep.metrics["kendall_tau"] = kendall_tau(rankings->scores_a, rankings->scores_b);
    }
  }
  rep.check_ranges();
  return rep;
}

}  // namespace coep
