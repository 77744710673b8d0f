#include "coep/corpus/synthetic.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <string_view>

namespace coep {

namespace {

struct ArcStep {
  std::string_view sentence;  // "{X}" marks the character
  std::string_view head;      // PersonX form
  std::string_view phrase;    // bare verb phrase
};

struct NeedArc {
  std::string_view attr;
  std::string_view goal;
  std::string_view feel_before;
  std::string_view feel_after;
  std::string_view other_react;
  std::string_view other_want;
  std::array<ArcStep, 5> steps;
};

// clang-format off
constexpr NeedArc kArcs[] = {
    {"hungry", "to eat food", "hungry", "full", "happy", "to share the food",
     {{{"{X} was hungry.", "PersonX was hungry", "be hungry"},
       {"{X} went to the kitchen.", "PersonX went to the kitchen", "go to the kitchen"},
       {"{X} cooked some pasta.", "PersonX cooked some pasta", "cook some pasta"},
       {"{X} ate the pasta.", "PersonX ate the pasta", "eat the pasta"},
       {"{X} felt full.", "PersonX felt full", "feel full"}}}},
    {"thirsty", "to drink water", "thirsty", "refreshed", "relieved", "to get a drink",
     {{{"{X} was thirsty.", "PersonX was thirsty", "be thirsty"},
       {"{X} went to the kitchen.", "PersonX went to the kitchen", "go to the kitchen"},
       {"{X} poured a glass of water.", "PersonX poured a glass of water", "pour a glass of water"},
       {"{X} drank the water.", "PersonX drank the water", "drink the water"},
       {"{X} felt refreshed.", "PersonX felt refreshed", "feel refreshed"}}}},
    {"tired", "to get some rest", "tired", "rested", "calm", "to keep quiet",
     {{{"{X} was tired.", "PersonX was tired", "be tired"},
       {"{X} went to the bedroom.", "PersonX went to the bedroom", "go to the bedroom"},
       {"{X} lay down on the bed.", "PersonX lay down on the bed", "lie down on the bed"},
       {"{X} fell asleep quickly.", "PersonX fell asleep quickly", "fall asleep"},
       {"{X} woke up rested.", "PersonX woke up rested", "wake up rested"}}}},
    {"bored", "to have fun", "bored", "excited", "curious", "to play too",
     {{{"{X} was bored.", "PersonX was bored", "be bored"},
       {"{X} went to the bedroom.", "PersonX went to the bedroom", "go to the bedroom"},
       {"{X} turned on the video game.", "PersonX turned on the video game", "turn on the video game"},
       {"{X} played for hours.", "PersonX played for hours", "play for hours"},
       {"{X} felt excited.", "PersonX felt excited", "feel excited"}}}},
    {"cold", "to stay warm", "cold", "warm", "worried", "to lend a scarf",
     {{{"{X} was cold.", "PersonX was cold", "be cold"},
       {"{X} went to the closet.", "PersonX went to the closet", "go to the closet"},
       {"{X} put on a warm coat.", "PersonX put on a warm coat", "put on a warm coat"},
       {"{X} went outside.", "PersonX went outside", "go outside"},
       {"{X} felt warm.", "PersonX felt warm", "feel warm"}}}},
    {"dirty", "to get clean", "dirty", "clean", "disgusted", "to open a window",
     {{{"{X} was dirty.", "PersonX was dirty", "be dirty"},
       {"{X} went to the bathroom.", "PersonX went to the bathroom", "go to the bathroom"},
       {"{X} took a long shower.", "PersonX took a long shower", "take a long shower"},
       {"{X} dried off with a towel.", "PersonX dried off with a towel", "dry off with a towel"},
       {"{X} felt clean.", "PersonX felt clean", "feel clean"}}}},
    {"sick", "to get better", "sick", "healthy", "concerned", "to help personx",
     {{{"{X} was sick.", "PersonX was sick", "be sick"},
       {"{X} went to the doctor.", "PersonX went to the doctor", "go to the doctor"},
       {"{X} got some medicine.", "PersonX got some medicine", "get some medicine"},
       {"{X} took the medicine.", "PersonX took the medicine", "take the medicine"},
       {"{X} felt better.", "PersonX felt better", "feel better"}}}},
    {"lonely", "to see a friend", "lonely", "loved", "glad", "to meet personx",
     {{{"{X} was lonely.", "PersonX was lonely", "be lonely"},
       {"{X} called a friend.", "PersonX called a friend", "call a friend"},
       {"{X} met the friend at the park.", "PersonX met the friend at the park", "meet the friend at the park"},
       {"{X} talked for hours.", "PersonX talked for hours", "talk for hours"},
       {"{X} felt loved.", "PersonX felt loved", "feel loved"}}}},
    {"broke", "to earn money", "poor", "proud", "hopeful", "to hire personx",
     {{{"{X} was broke.", "PersonX was broke", "be broke"},
       {"{X} looked for a job.", "PersonX looked for a job", "look for a job"},
       {"{X} got a job at the store.", "PersonX got a job at the store", "get a job at the store"},
       {"{X} worked very hard.", "PersonX worked very hard", "work very hard"},
       {"{X} earned some money.", "PersonX earned some money", "earn some money"}}}},
    {"late", "to get to work", "rushed", "relieved", "impatient", "to start the meeting",
     {{{"{X} was late for work.", "PersonX was late for work", "be late for work"},
       {"{X} ran to the bus stop.", "PersonX ran to the bus stop", "run to the bus stop"},
       {"{X} caught the bus.", "PersonX caught the bus", "catch the bus"},
       {"{X} arrived at work.", "PersonX arrived at work", "arrive at work"},
       {"{X} felt relieved.", "PersonX felt relieved", "feel relieved"}}}},
    {"tidy", "to clean the room", "annoyed", "proud", "thankful", "to help clean",
     {{{"{X} saw a messy room.", "PersonX saw a messy room", "see a messy room"},
       {"{X} went to the closet.", "PersonX went to the closet", "go to the closet"},
       {"{X} got a broom.", "PersonX got a broom", "get a broom"},
       {"{X} swept the floor.", "PersonX swept the floor", "sweep the floor"},
       {"{X} felt proud.", "PersonX felt proud", "feel proud"}}}},
    {"sad", "to feel better", "sad", "cheerful", "sympathetic", "to cheer personx up",
     {{{"{X} was sad.", "PersonX was sad", "be sad"},
       {"{X} called a friend.", "PersonX called a friend", "call a friend"},
       {"{X} watched a funny movie.", "PersonX watched a funny movie", "watch a funny movie"},
       {"{X} laughed a lot.", "PersonX laughed a lot", "laugh a lot"},
       {"{X} felt cheerful.", "PersonX felt cheerful", "feel cheerful"}}}},
};

constexpr std::string_view kNames[] = {"Ron", "Leah", "Tom", "Amy", "Jake",
                                       "Mia", "Sam",  "Kate", "Ben", "Lily"};

// The six example rows of the sequential relation table, kept verbatim.
constexpr std::array<std::array<std::string_view, 3>, 6> kSequentialExamples = {{
    {"riding bike", "Causes", "falling down"},
    {"get check up", "CausesDesire", "know if is healthy"},
    {"playing chess", "HasSubevent", "capture queen"},
    {"apply for job", "HasFirstSubevent", "fill out application"},
    {"get weapon", "HasPrerequisite", "advance into battle"},
    {"say ah ha", "HasLastSubevent", "create idea"},
}};
// clang-format on

constexpr std::string_view kForward[] = {"Causes", "CausesDesire", "HasSubevent", "HasFirstSubevent"};
constexpr std::string_view kReversed[] = {"HasPrerequisite", "HasLastSubevent"};

std::string fill(std::string_view tmpl, std::string_view name) {
  std::string s(tmpl);
  const auto pos = s.find("{X}");
  if (pos != std::string::npos) s.replace(pos, 3, name);
  return s;
}

std::string to(std::string_view phrase) { return "to " + std::string(phrase); }

}  // namespace

SyntheticCorpora generate_synthetic(const SyntheticOptions& options) {
  SyntheticCorpora out;
  Rng rng(options.seed);

  std::set<std::tuple<std::string, int, std::string>> seen;
  auto add_triple = [&](std::string_view head, Relation r, std::string tail) {
    if (seen.emplace(std::string(head), static_cast<int>(r), tail).second) {
      out.inferential.push_back({std::string(head), r, std::move(tail)});
    }
  };
  for (const NeedArc& arc : kArcs) {
    for (std::size_t k = 0; k < arc.steps.size(); ++k) {
      const ArcStep& s = arc.steps[k];
      const bool last = k + 1 == arc.steps.size();
      add_triple(s.head, Relation::kXIntent, std::string(arc.goal));
      add_triple(s.head, Relation::kXNeed, k == 0 ? std::string("none") : to(arc.steps[k - 1].phrase));
      add_triple(s.head, Relation::kXAttr, std::string(arc.attr));
      add_triple(s.head, Relation::kXEffect, last ? std::string("rests") : std::string(arc.steps[k + 1].phrase));
      add_triple(s.head, Relation::kXReact, std::string(last ? arc.feel_after : arc.feel_before));
      add_triple(s.head, Relation::kXWant, last ? std::string("to relax") : to(arc.steps[k + 1].phrase));
      add_triple(s.head, Relation::kOReact, std::string(arc.other_react));
      add_triple(s.head, Relation::kOWant, std::string(arc.other_want));
      add_triple(s.head, Relation::kOEffect, "none");
    }
  }

  for (const auto& row : kSequentialExamples) {
    out.sequential.push_back({std::string(row[0]), std::string(row[1]), std::string(row[2])});
  }
  for (const NeedArc& arc : kArcs) {
    for (std::size_t k = 0; k + 1 < arc.steps.size(); ++k) {
      for (std::size_t j = k + 1; j < arc.steps.size() && j <= k + 3; ++j) {
        const std::string before(arc.steps[k].phrase), after(arc.steps[j].phrase);
        out.sequential.push_back({before, std::string(kForward[rng.below(4)]), after});
        out.sequential.push_back({after, std::string(kReversed[rng.below(2)]), before});
      }
    }
    out.sequential.push_back({std::string(arc.steps[0].phrase), "SimilarTo", std::string(arc.attr)});
    out.sequential.push_back({std::string(arc.steps[1].phrase), "AtLocation", "home"});
    out.sequential.push_back({std::string(arc.steps[2].phrase), "IsA", "activity"});
  }

  std::vector<std::pair<std::size_t, std::size_t>> combos;
  for (std::size_t a = 0; a < std::size(kArcs); ++a) {
    for (std::size_t n = 0; n < std::size(kNames); ++n) combos.emplace_back(a, n);
  }
  for (std::size_t i = combos.size(); i > 1; --i) std::swap(combos[i - 1], combos[rng.below(i)]);
  auto story = [&](std::size_t i) {
    const auto [a, n] = combos[i % combos.size()];
    Story s;
    for (const ArcStep& step : kArcs[a].steps) s.push_back(fill(step.sentence, kNames[n]));
    return s;
  };
  // Test stories come first in the shuffled order so that they stay fixed
  // when the training set size changes.
  for (std::size_t i = 0; i < options.test_stories; ++i) out.test_stories.push_back(story(i));
  for (std::size_t i = 0; i < options.train_stories; ++i) {
    out.train_stories.push_back(story(options.test_stories + i));
  }
  return out;
}

Vocab build_vocab(const std::vector<InferentialTriple>& inferential,
                  const std::vector<SequentialPair>& sequential, const std::vector<Story>& stories) {
  std::vector<std::string> texts;
  for (Relation r : kAllRelations) texts.emplace_back(reformulate_relation(r));
  for (const auto& t : inferential) {
    texts.push_back(t.head);
    texts.push_back(t.tail);
  }
  for (const auto& p : sequential) {
    texts.push_back(p.preceding);
    texts.push_back(p.future);
  }
  for (const auto& s : stories) texts.insert(texts.end(), s.begin(), s.end());
  return Vocab::build(texts);
}

void write_synthetic(const std::filesystem::path& dir, const SyntheticCorpora& corpora) {
  std::filesystem::create_directories(dir);
  write_inferential(dir / "inferential.jsonl", corpora.inferential);
  write_sequential_raw(dir / "sequential.jsonl", corpora.sequential);
  write_stories(dir / "stories.jsonl", corpora.train_stories);
  write_stories(dir / "stories_test.jsonl", corpora.test_stories);
  const auto pairs = read_sequential(dir / "sequential.jsonl");
  build_vocab(corpora.inferential, pairs, corpora.train_stories).save(dir / "vocab.txt");
}

}  // namespace coep
