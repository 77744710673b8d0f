#include "coep/cli/stages.hpp"

#include <fstream>
#include <sstream>

#include "coep/corpus/synthetic.hpp"
#include "coep/im/im.hpp"
#include "coep/prompting/prompting.hpp"
#include "coep/log.hpp"
#include "coep/numerics/errors.hpp"
#include "json.hpp"

namespace coep {

namespace fs = std::filesystem;

namespace {

using json = nlohmann::json;

// derive_seed keys for model initialization
constexpr std::uint64_t kImInit = 1, kGmInit = 2;

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
}

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& l : lines) out << l << '\n';
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(line);
  }
  return out;
}

void write_log(const fs::path& path, const std::vector<std::string>& records) { write_lines(path, records); }

ModelConfig model_config(const RunConfig& config, const Vocab& vocab) {
  ModelConfig m = config.model;
  m.vocab_size = vocab.size();
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return m;
}

Checkpoint base_checkpoint(const RunConfig& config, const Vocab& vocab, const std::string& kind) {
  Checkpoint ck;
  ck.config["kind"] = kind;
  ck.config["seed"] = std::to_string(config.require_seed());
  store_vocab(ck, vocab);
  return ck;
}

std::unique_ptr<Seq2SeqModel> load_single(const fs::path& path, const std::string& kind, const Vocab& vocab) {
  const Checkpoint ck = Checkpoint::load(path);
  if (ck.get("kind") != kind) {
    throw CheckpointError(path.string() + ": expected kind '" + kind + "', found '" + ck.get("kind") + "'");
  }
  if (!(restore_vocab(ck) == vocab)) throw CheckpointError(path.string() + ": vocabulary differs from the data");
  return restore_model(ck, "");
}

std::vector<Relation> parse_relation_list(const std::string& s) {
  std::vector<Relation> out;
  if (s.empty() || s == "none") return out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto r = parse_relation(item);
    if (!r) throw CheckpointError("unknown relation '" + item + "' in checkpoint");
    out.push_back(*r);
  }
  return out;
}

std::string relation_list(const std::vector<Relation>& rs) {
  if (rs.empty()) return "none";
  std::string s;
  for (Relation r : rs) s += (s.empty() ? "" : ",") + std::string(relation_name(r));
  return s;
}

}  // namespace

void make_data(const RunConfig& config, const fs::path& out) {
  ensure_dir(out);
  SyntheticOptions opts;
  opts.seed = config.require_seed();
  opts.train_stories = config.train_stories;
  opts.test_stories = config.test_stories;
  write_synthetic(out, generate_synthetic(opts));
  config.write(out / "config.txt");
}

Corpora load_corpora(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("data directory " + dir.string() + " does not exist");
  Corpora c;
  c.inferential = read_inferential(dir / "inferential.jsonl");
  c.sequential = read_sequential(dir / "sequential.jsonl", &c.skipped);
  c.train_stories = read_stories(dir / "stories.jsonl");
  c.test_stories = read_stories(dir / "stories_test.jsonl");
  if (!fs::exists(dir / "vocab.txt")) throw DataError("missing " + (dir / "vocab.txt").string());
  c.vocab = Vocab::load(dir / "vocab.txt");
  if (c.skipped.total() > 0) {
    log::info("sequential: skipped " + std::to_string(c.skipped.total()) + " rows with non-event relations");
  }
  return c;
}

fs::path stage_finetune_im(const RunConfig& config, const Corpora& data, const fs::path& out) {
  ensure_dir(out);
  ImModel im(model_config(config, data.vocab), Rng::derive_seed(config.require_seed(), kImInit));
  std::vector<std::string> log;
  TrainConfig tc = config.im_train();
  tc.on_record = [&](const TrainRecord& r) { log.push_back(r.to_json()); };
  finetune_im(im, data.vocab, data.inferential, tc);
  Checkpoint ck = base_checkpoint(config, data.vocab, "im");
  store_model(ck, "", im);
  const fs::path path = out / "im.ckpt";
  ck.save(path);
  write_log(out / "im_log.jsonl", log);
  config.write(out / "config.txt");
  return path;
}

fs::path stage_finetune_gm(const RunConfig& config, const Corpora& data, const fs::path& out) {
  ensure_dir(out);
  GmModel gm(model_config(config, data.vocab), Rng::derive_seed(config.require_seed(), kGmInit));
  std::vector<std::string> log;
  if (!config.skip_skg) {
    TrainConfig tc = config.gm_train();
    tc.on_record = [&](const TrainRecord& r) { log.push_back(r.to_json()); };
    finetune_gm(gm, data.vocab, data.sequential, tc);
  }
  Checkpoint ck = base_checkpoint(config, data.vocab, "gm");
  ck.config["skg"] = config.skip_skg ? "false" : "true";
  store_model(ck, "", gm);
  const fs::path path = out / "gm.ckpt";
  ck.save(path);
  write_log(out / "gm_log.jsonl", log);
  config.write(out / "config.txt");
  return path;
}

fs::path stage_train_feg(const RunConfig& config, const Corpora& data, const fs::path& im_ckpt,
                         const fs::path& gm_ckpt, const fs::path& out, const StepHook& hook) {
  ensure_dir(out);
  const bool prompts = config.use_prompts && !config.relations.empty();
  auto gm = load_single(gm_ckpt, "gm", data.vocab);
  std::unique_ptr<ImModel> im = prompts ? load_single(im_ckpt, "im", data.vocab) : nullptr;
  if (!im) im = std::make_unique<ImModel>(gm->config(), Rng::derive_seed(config.require_seed(), kImInit));

  CoepConfig cc = config.coep();
  cc.use_prompts = prompts;
  std::vector<std::string> log;
  std::size_t prompt_rows = 0, checked = 0;
  cc.on_memory = [&](const PromptedMemory& m) {
    prompt_rows = m.prompt_rows;
    ++checked;
    const std::size_t memory_rows = m.memory.shape()[0];
    if (m.prompt_rows != cc.relations.size() * (prompts ? 1 : 0) || memory_rows != m.prompt_rows + m.context_rows) {
      throw ContractError("prompted memory has " + std::to_string(memory_rows) + " rows for " +
                          std::to_string(m.prompt_rows) + " prompts and " + std::to_string(m.context_rows) +
                          " context rows");
    }
  };
  cc.on_record = [&](const TrainRecord& r) {
    TrainRecord with_rows = r;
    with_rows.values["prompt_rows"] = static_cast<double>(prompt_rows);
    with_rows.values["memories_checked"] = static_cast<double>(checked);
    checked = 0;
    log.push_back(with_rows.to_json());
  };
  if (hook) cc.on_step = hook;
  try {
    train_coep(*im, *gm, data.vocab, data.train_stories, FreezePlan::im_prompt_training(), cc);
  } catch (...) {
    write_log(out / "feg_log.jsonl", log);
    throw;
  }

  Checkpoint ck = base_checkpoint(config, data.vocab, "coep");
  ck.config["use_prompts"] = prompts ? "true" : "false";
  ck.config["relations"] = relation_list(prompts ? config.relations : std::vector<Relation>{});
  if (prompts) store_model(ck, "im.", *im);
  store_model(ck, "gm.", *gm);
  const fs::path path = out / "coep.ckpt";
  ck.save(path);
  write_log(out / "feg_log.jsonl", log);
  config.write(out / "config.txt");
  return path;
}

CoepModels LoadedModels::view() {
  CoepModels m;
  m.im = im.get();
  m.gm = gm.get();
  m.vocab = &vocab;
  m.use_prompts = use_prompts;
  m.relations = relations;
  return m;
}

LoadedModels load_coep(const fs::path& path) {
  const Checkpoint ck = Checkpoint::load(path);
  if (ck.get("kind") != "coep") throw CheckpointError(path.string() + ": expected a coep checkpoint");
  LoadedModels m;
  m.vocab = restore_vocab(ck);
  m.use_prompts = ck.get("use_prompts") == "true";
  m.relations = parse_relation_list(ck.get("relations"));
  m.gm = restore_model(ck, "gm.");
  if (m.use_prompts) m.im = restore_model(ck, "im.");
  m.gm->set_training(false);
  if (m.im) m.im->set_training(false);
  return m;
}

void stage_predict(const RunConfig& config, const Corpora& data, const fs::path& coep_ckpt, const fs::path& out) {
  ensure_dir(out);
  LoadedModels models = load_coep(coep_ckpt);
  if (!(models.vocab == data.vocab)) throw CheckpointError(coep_ckpt.string() + ": vocabulary differs from the data");
  const CoepModels view = models.view();
  std::vector<std::string> preds, refs;
  std::size_t index = 0;
  for (const Story& s : data.test_stories) {
    for (const FegExample& e : unfold_story(s)) {
      DecodeConfig dc = config.decode;
      dc.seed = Rng::derive_seed(config.decode.seed, index++);
      preds.push_back(generate_future_event(view, e.history, e.current, dc));
      refs.push_back(e.target);
    }
  }
  write_lines(out / "predictions.txt", preds);
  write_lines(out / "references.txt", refs);
  std::vector<Story> stories;
  for (std::size_t i = 0; i < data.test_stories.size(); ++i) {
    const Story& s = data.test_stories[i];
    if (s.size() < 2) continue;
    DecodeConfig dc = config.decode;
    dc.seed = Rng::derive_seed(config.decode.seed, 0x5700 + i);
    stories.push_back(tell_story(view, s.front(), s.size() - 1, dc));
  }
  write_stories(out / "stories.jsonl", stories);
}

double test_perplexity(LoadedModels& models, const Corpora& data) {
  NoGradGuard guard;
  const CoepModels view = models.view();
  std::vector<double> nll;
  for (const Story& s : data.test_stories) {
    for (const FegExample& e : unfold_story(s)) {
      const PromptedMemory memory = context_memory(view, e.history, e.current);
      const auto y = models.vocab.tokenize(e.target);
      if (y.empty()) continue;
      const Var h = models.gm->decode_hidden(models.gm->embed(decoder_input(y)), memory.memory);
      const Var lp = ops::log_softmax(models.gm->lm_logits(ops::slice_rows(h, 0, y.size() + 1)));
      const auto targets = lm_targets(y);
      const std::size_t v = lp.shape()[1];
      for (std::size_t t = 0; t < targets.size(); ++t) {
        nll.push_back(-static_cast<double>(lp.value()[t * v + static_cast<std::size_t>(targets[t])]));
      }
    }
  }
  return perplexity(nll);
}

double exact_match_accuracy(const CoepModels& models, const std::vector<Story>& stories, const DecodeConfig& config) {
  std::size_t hit = 0, n = 0;
  for (const Story& s : stories) {
    for (const FegExample& e : unfold_story(s)) {
      hit += generate_future_event(models, e.history, e.current, config) == normalize_text(e.target);
      ++n;
    }
  }
  if (n == 0) throw std::invalid_argument("exact_match_accuracy: no examples");
  return static_cast<double>(hit) / static_cast<double>(n);
}

EvalReport stage_eval(const EvalInputs& in) {
  const auto preds = read_lines(in.pred);
  const auto ref_lines = read_lines(in.ref);
  std::vector<std::vector<std::string>> refs;
  for (const auto& line : ref_lines) {
    std::vector<std::string> r;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, '\t')) {
      if (!item.empty()) r.push_back(item);
    }
    if (r.empty()) throw DataError(in.ref.string() + ": empty reference line");
    refs.push_back(std::move(r));
  }
  if (preds.size() != refs.size()) {
    throw DataError(in.pred.string() + " has " + std::to_string(preds.size()) + " lines, " + in.ref.string() +
                    " has " + std::to_string(refs.size()));
  }
  std::vector<Story> stories;
  if (in.stories) stories = read_stories(*in.stories);
  RankingInput rankings;
  if (in.rankings) {
    std::ifstream f(*in.rankings);
    if (!f) throw DataError("cannot open " + in.rankings->string());
    try {
      const json j = json::parse(f);
      rankings.ranks = j.value("ranks", std::vector<std::size_t>{});
      rankings.ks = j.value("ks", rankings.ks);
      rankings.scores_a = j.value("scores_a", std::vector<double>{});
      rankings.scores_b = j.value("scores_b", std::vector<double>{});
    } catch (const json::exception& e) {
      throw DataError(in.rankings->string() + ": " + e.what());
    }
  }
  EvalReport rep;
  try {
    rep = evaluate(preds, refs, in.stories ? &stories : nullptr, in.rankings ? &rankings : nullptr);
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
  rep.metadata["pred"] = in.pred.filename().string();
  rep.metadata["ref"] = in.ref.filename().string();
  if (in.seed) rep.metadata["seed"] = std::to_string(*in.seed);
  if (in.ckpt && in.data) {
    LoadedModels models = load_coep(*in.ckpt);
    const Corpora data = load_corpora(*in.data);
    rep.metrics["perplexity"] = test_perplexity(models, data);
  }
  rep.check_ranges();
  return rep;
}

}  // namespace coep
