#include "coep/corpus/dataset.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

#include "coep/log.hpp"

namespace coep {

std::vector<TokenId> SegmentedSequence::flatten() const {
  std::vector<TokenId> out;
  out.reserve(length());
  for (const auto& seg : segments) {
    out.push_back(kBos);
    out.insert(out.end(), seg.begin(), seg.end());
    out.push_back(kEos);
  }
  return out;
}

std::size_t SegmentedSequence::length() const {
  std::size_t n = 0;
  for (const auto& seg : segments) n += seg.size() + 2;
  return n;
}

std::size_t SegmentedSequence::truncate_front(std::size_t max_tokens) {
  const std::size_t len = length();
  if (len <= max_tokens || segments.empty()) return 0;
  auto& first = segments.front();
  const std::size_t drop = std::min(len - max_tokens, first.size());
  first.erase(first.begin(), first.begin() + static_cast<std::ptrdiff_t>(drop));
  return drop;
}

SegmentedSequence build_im_input(const Vocab& vocab, const std::string& event, Relation r) {
  if (event.empty()) throw std::invalid_argument("build_im_input: empty event");
  SegmentedSequence x;
  x.segments.push_back(vocab.tokenize(event));
  x.segments.push_back(vocab.tokenize(reformulate_relation(r)));
  return x;
}

SegmentedSequence build_gm_input(const Vocab& vocab, const std::vector<std::string>& history,
                                 const std::string& current) {
  if (current.empty()) throw std::invalid_argument("build_gm_input: empty current event");
  std::string joined;
  for (const std::string& h : history) {
    if (!joined.empty()) joined += ' ';
    joined += h;
  }
  SegmentedSequence x;
  x.segments.push_back(vocab.tokenize(joined));
  x.segments.push_back(vocab.tokenize(current));
  return x;
}

SegmentedSequence append_relation(const Vocab& vocab, SegmentedSequence x, Relation r) {
  x.segments.push_back(vocab.tokenize(reformulate_relation(r)));
  return x;
}

std::size_t SkipCounter::total() const {
  std::size_t n = 0;
  for (const auto& [_, c] : by_relation) n += c;
  return n;
}

std::optional<SequentialPair> sequentialize_triple(const std::string& head,
                                                   const std::string& relation,
                                                   const std::string& tail,
                                                   SkipCounter* skipped) {
  const auto rel = parse_sequential_relation(relation);
  if (!rel) {
    if (skipped) ++skipped->by_relation[relation];
    return std::nullopt;
  }
  if (is_forward(*rel)) return SequentialPair{head, tail, rel};
  return SequentialPair{tail, head, rel};
}

std::vector<FegExample> unfold_story(const std::vector<std::string>& events) {
  std::vector<FegExample> out;
  if (events.size() < 2) return out;
  for (std::size_t i = 1; i < events.size(); ++i) {
    FegExample ex;
    ex.history.assign(events.begin(), events.begin() + static_cast<std::ptrdiff_t>(i - 1));
    ex.current = events[i - 1];
    ex.target = events[i];
    out.push_back(std::move(ex));
  }
  return out;
}

TailIndex::TailIndex(const std::vector<InferentialTriple>& triples)
    : warned_(kNumRelations, false), by_relation_(kNumRelations) {
  std::vector<std::unordered_set<std::string>> seen(kNumRelations);
  std::unordered_set<std::string> seen_all;
  for (const auto& t : triples) {
    const std::size_t r = relation_index(t.relation);
    if (seen[r].insert(t.tail).second) by_relation_[r].push_back(t.tail);
    if (seen_all.insert(t.tail).second) all_.push_back(t.tail);
  }
}

bool TailIndex::first_fallback(Relation r) const {
  const std::size_t i = relation_index(r);
  if (warned_[i]) return false;
  warned_[i] = true;
  return true;
}

const std::vector<std::string>& TailIndex::tails(Relation r) const {
  return by_relation_[relation_index(r)];
}

ImExample make_im_example(const Vocab& vocab, const InferentialTriple& t, int label) {
  ImExample ex;
  ex.x = build_im_input(vocab, t.head, t.relation);
  ex.y = vocab.tokenize(t.tail);
  ex.relation = t.relation;
  ex.label = label;
  return ex;
}

namespace {

const std::string& draw_other(const std::vector<std::string>& pool, const std::string& avoid,
                              Rng& rng) {
  std::size_t others = 0;
  for (const auto& s : pool) others += (s != avoid);
  std::uint64_t k = rng.below(others);
  for (const auto& s : pool) {
    if (s == avoid) continue;
    if (k-- == 0) return s;
  }
  throw std::logic_error("draw_other: unreachable");
}

bool has_other(const std::vector<std::string>& pool, const std::string& avoid) {
  return std::any_of(pool.begin(), pool.end(), [&](const std::string& s) { return s != avoid; });
}

}  // namespace

ImExample negative_sample_im(const Vocab& vocab, const InferentialTriple& t,
                             const TailIndex& index, Rng& rng) {
  const auto& same = index.tails(t.relation);
  const std::vector<std::string>* pool = &same;
  if (!has_other(same, t.tail)) {
    if (index.first_fallback(t.relation)) {
      log::warn("no alternative tail for relation " + std::string(relation_name(t.relation)) +
                "; sampling from all relations");
    }
    pool = &index.all_tails();
    if (!has_other(*pool, t.tail)) {
      throw std::invalid_argument("negative_sample_im: corpus has a single distinct tail");
    }
  }
  InferentialTriple neg = t;
  neg.tail = draw_other(*pool, t.tail, rng);
  return make_im_example(vocab, neg, 1);
}

FegExample negative_sample_feg(const FegExample& example, const std::vector<std::string>& pool,
                               Rng& rng) {
  if (!has_other(pool, example.target)) {
    throw std::invalid_argument("negative_sample_feg: event pool has no alternative target");
  }
  FegExample neg = example;
  neg.target = draw_other(pool, example.target, rng);
  neg.label = 1;
  return neg;
}

std::vector<ImExample> build_im_corpus(const Vocab& vocab,
                                       const std::vector<InferentialTriple>& triples,
                                       std::uint64_t seed) {
  const TailIndex index(triples);
  std::vector<ImExample> out;
  out.reserve(triples.size() * 2);
  for (std::size_t i = 0; i < triples.size(); ++i) {
    Rng rng(Rng::derive_seed(seed, i));
    out.push_back(make_im_example(vocab, triples[i], 0));
    out.push_back(negative_sample_im(vocab, triples[i], index, rng));
  }
  return out;
}

std::vector<std::string> event_pool(const std::vector<FegExample>& examples) {
  std::vector<std::string> pool;
  std::unordered_set<std::string> seen;
  for (const auto& ex : examples) {
    if (seen.insert(ex.target).second) pool.push_back(ex.target);
  }
  return pool;
}

std::vector<FegExample> build_feg_corpus(const std::vector<FegExample>& positives,
                                         std::uint64_t seed) {
  const auto pool = event_pool(positives);
  std::vector<FegExample> out;
  out.reserve(positives.size() * 2);
  for (std::size_t i = 0; i < positives.size(); ++i) {
    Rng rng(Rng::derive_seed(seed, i));
    out.push_back(positives[i]);
    out.back().label = 0;
    out.push_back(negative_sample_feg(positives[i], pool, rng));
  }
  return out;
}

}  // namespace coep
