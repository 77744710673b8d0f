#include "coep/cli/commands.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "coep/cli/ablation.hpp"
#include "coep/cli/stages.hpp"
#include "coep/log.hpp"
#include "coep/numerics/errors.hpp"
#include "json.hpp"

namespace coep {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Common {
  std::string config_file;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::string data;
  std::string out;
  bool skip_skg = false, skip_pt = false, skip_cls = false;
  bool as_json = false;
};

RunConfig resolve(const Common& c) {
  RunConfig r;
  if (!c.config_file.empty()) r.load_file(c.config_file);
  if (c.seed) r.seed = *c.seed;
  if (!c.data.empty()) r.data_dir = c.data;
  for (const auto& s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
    r.set(s.substr(0, eq), s.substr(eq + 1));
  }
  r.skip_skg = r.skip_skg || c.skip_skg;
  r.skip_pt = r.skip_pt || c.skip_pt;
  r.skip_cls = r.skip_cls || c.skip_cls;
  r.validate();
  return r;
}

fs::path need_out(const Common& c) {
  if (c.out.empty()) throw UsageError("--out is required");
  return c.out;
}

fs::path existing(const std::string& path, const std::string& what) {
  if (path.empty()) throw UsageError(what + " is required");
  if (!fs::exists(path)) throw DataError(what + " " + path + " does not exist");
  return path;
}

Corpora data_of(const RunConfig& r) { return load_corpora(existing(r.data_dir.string(), "data directory")); }

void emit(std::ostream& out, bool as_json, const json& j, const std::string& text) {
  if (as_json) {
    out << j.dump() << "\n";
  } else {
    out << text;
  }
}

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("--seeds: bad seed '" + item + "'");
    }
  }
  if (out.empty()) throw UsageError("--seeds: empty list");
  return out;
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(item);
  return out;
}

std::vector<std::pair<Relation, std::string>> explain(LoadedModels& models, const std::vector<std::string>& history,
                                                      const std::string& current) {
  std::vector<std::pair<Relation, std::string>> out;
  if (!models.im) return out;
  NoGradGuard guard;
  const SegmentedSequence x_g = build_gm_input(models.vocab, history, current);
  DecodeConfig dc;
  dc.strategy = Strategy::kGreedy;
  for (Relation r : kAllRelations) {
    const EncoderState enc = models.im->encode(prompt_input(*models.im, models.vocab, x_g, r));
    out.emplace_back(r, models.vocab.detokenize(decode(*models.im, enc.hidden, dc)));
  }
  return out;
}

void tamper(ImModel& im) {
  auto ps = im.params().with_prefix("decoder.");
  if (ps.empty()) throw std::logic_error("no decoder parameters to tamper with");
  ps.front()->tensor()[0] += 1.0f;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Future event generation with commonsense prompts", "coep"};
  app.require_subcommand(1);
  Common c;
  app.add_option("--config", c.config_file, "key=value config file");
  app.add_option("--set", c.sets, "override one config key (key=value), repeatable");
  app.add_option("--seed", c.seed, "run seed");
  app.add_option("--data", c.data, "data directory");
  app.add_option("--out", c.out, "output directory or file");
  app.add_flag("--skip-skg", c.skip_skg, "no sequential fine-tuning of the GM");
  app.add_flag("--skip-pt", c.skip_pt, "no prompt training of the IM encoder");
  app.add_flag("--skip-cls", c.skip_cls, "no classification loss on the GM");
  app.add_flag("--json", c.as_json, "machine-readable output");
  bool quiet = false;
  app.add_flag("--quiet", quiet, "only warnings and errors on stderr");

  auto* make_data_cmd = app.add_subcommand("make-data", "write the bundled synthetic corpora");
  auto* im_cmd = app.add_subcommand("finetune-im", "inferential fine-tuning of the IM");
  auto* gm_cmd = app.add_subcommand("finetune-gm", "sequential fine-tuning of the GM");

  auto* feg_cmd = app.add_subcommand("train-feg", "joint future event generation and prompt training");
  std::string im_ckpt, gm_ckpt;
  std::optional<std::size_t> tamper_step;
  feg_cmd->add_option("--im", im_ckpt, "IM checkpoint");
  feg_cmd->add_option("--gm", gm_ckpt, "GM checkpoint");
  feg_cmd->add_option("--tamper-step", tamper_step)->group("");

  std::string ckpt;
  auto* predict_cmd = app.add_subcommand("predict", "decode every test example");
  predict_cmd->add_option("--ckpt", ckpt, "coep checkpoint")->required();

  auto* gen_cmd = app.add_subcommand("generate", "generate the next event");
  std::vector<std::string> history;
  std::string current, strategy;
  std::optional<std::size_t> k, max_len;
  std::optional<std::uint64_t> decode_seed;
  bool want_explain = false;
  gen_cmd->add_option("--ckpt", ckpt, "coep checkpoint")->required();
  gen_cmd->add_option("--history", history, "a preceding event, repeatable, oldest first");
  gen_cmd->add_option("--current", current, "current event")->required();
  gen_cmd->add_flag("--explain", want_explain, "also print the IM explanation for every relation");

  auto* story_cmd = app.add_subcommand("tell-story", "continue a story event by event");
  std::string first;
  std::size_t steps = 4;
  story_cmd->add_option("--ckpt", ckpt, "coep checkpoint")->required();
  story_cmd->add_option("--first", first, "first event")->required();
  story_cmd->add_option("--steps", steps, "events to generate")->check(CLI::Range(std::size_t{1}, std::size_t{64}));
  for (auto* sub : {gen_cmd, story_cmd}) {
    sub->add_option("--strategy", strategy, "greedy or topk");
    sub->add_option("--k", k, "top-k size");
    sub->add_option("--max-len", max_len, "maximum tokens per event");
    sub->add_option("--decode-seed", decode_seed, "sampling seed");
  }

  auto* eval_cmd = app.add_subcommand("eval", "score predictions against references");
  EvalInputs ev;
  std::string pred, ref, stories, rankings, eval_ckpt;
  eval_cmd->add_option("--pred", pred, "one prediction per line")->required();
  eval_cmd->add_option("--ref", ref, "tab-separated references per line")->required();
  eval_cmd->add_option("--stories", stories, "generated stories (JSONL)");
  eval_cmd->add_option("--rankings", rankings, "ranking JSON");
  eval_cmd->add_option("--ckpt", eval_ckpt, "coep checkpoint, with --data adds perplexity");

  auto* pipe_cmd = app.add_subcommand("pipeline", "make-data, finetune-im, finetune-gm, train-feg, predict, eval");

  auto* abl_cmd = app.add_subcommand("ablation", "train and score ablation variants over several seeds");
  std::string seeds = "7,8,9", variants = "full,-PT,GM-only";
  abl_cmd->add_option("--seeds", seeds, "comma-separated seeds");
  abl_cmd->add_option("--variants", variants, "comma-separated: full,-PT,-SKG,-CLS,GM-only or all");

  for (auto* sub : app.get_subcommands([](CLI::App*) { return true; })) sub->fallthrough();

  bool as_json = false;
  for (int i = 1; i < argc; ++i) as_json = as_json || std::string(argv[i]) == "--json";
  auto fail = [&](int code, const std::string& msg) {
    if (as_json) {
      err << json{{"error", {{"code", code}, {"message", msg}}}}.dump() << "\n";
    } else {
      err << "error[code=" << code << "]: " << msg << "\n";
    }
    return code;
  };

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    return fail(kExitUsage, e.what());
  }
  if (quiet) log::set_level(log::Level::kWarn);

  try {
    if (make_data_cmd->parsed()) {
      const RunConfig r = resolve(c);
      const fs::path dir = need_out(c);
      make_data(r, dir);
      emit(out, c.as_json, {{"data", dir.string()}}, "wrote synthetic corpora to " + dir.string() + "\n");
    } else if (im_cmd->parsed() || gm_cmd->parsed()) {
      const RunConfig r = resolve(c);
      const Corpora data = data_of(r);
      const fs::path p = im_cmd->parsed() ? stage_finetune_im(r, data, need_out(c)) : stage_finetune_gm(r, data, need_out(c));
      emit(out, c.as_json, {{"checkpoint", p.string()}}, "wrote " + p.string() + "\n");
    } else if (feg_cmd->parsed()) {
      const RunConfig r = resolve(c);
      const Corpora data = data_of(r);
      const bool prompts = r.use_prompts && !r.relations.empty();
      const fs::path im = prompts ? existing(im_ckpt, "--im") : fs::path(im_ckpt);
      const fs::path gm = existing(gm_ckpt, "--gm");
      StepHook hook;
      if (tamper_step) {
        hook = [s = *tamper_step](std::size_t step, ImModel& m, GmModel&) {
          if (step == s) tamper(m);
        };
      }
      const fs::path p = stage_train_feg(r, data, im, gm, need_out(c), hook);
      emit(out, c.as_json, {{"checkpoint", p.string()}}, "wrote " + p.string() + "\n");
    } else if (predict_cmd->parsed()) {
      const RunConfig r = resolve(c);
      const Corpora data = data_of(r);
      stage_predict(r, data, existing(ckpt, "--ckpt"), need_out(c));
      emit(out, c.as_json, {{"out", c.out}}, "wrote predictions to " + c.out + "\n");
    } else if (gen_cmd->parsed() || story_cmd->parsed()) {
      RunConfig r;
      if (!c.config_file.empty()) r.load_file(c.config_file);
      for (const auto& s : c.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
        r.set(s.substr(0, eq), s.substr(eq + 1));
      }
      DecodeConfig dc = r.decode;
      if (!strategy.empty()) {
        const auto s = parse_strategy(strategy);
        if (!s) throw UsageError("unknown strategy '" + strategy + "' (greedy, topk)");
        dc.strategy = *s;
      }
      if (k) dc.k = *k;
      if (max_len) dc.max_len = *max_len;
      if (decode_seed) dc.seed = *decode_seed;
      try {
        dc.validate();
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      LoadedModels models = load_coep(existing(ckpt, "--ckpt"));
      const CoepModels view = models.view();
      if (gen_cmd->parsed()) {
        if (normalize_text(current).empty()) throw UsageError("--current is empty");
        const std::string event = generate_future_event(view, history, current, dc);
        json j{{"event", event}};
        std::string text = event + "\n";
        if (want_explain) {
          if (!models.im) throw UsageError("--explain needs a checkpoint trained with prompts");
          j["explanations"] = json::array();
          for (const auto& [rel, e] : explain(models, history, current)) {
            j["explanations"].push_back({{"relation", relation_name(rel)}, {"text", e}});
            text += std::string(relation_name(rel)) + "\t" + e + "\n";
          }
        }
        emit(out, c.as_json, j, text);
      } else {
        if (normalize_text(first).empty()) throw UsageError("--first is empty");
        const auto story = tell_story(view, first, steps, dc);
        std::string text;
        for (const auto& e : story) text += e + "\n";
        emit(out, c.as_json, {{"story", story}}, text);
      }
    } else if (eval_cmd->parsed()) {
      ev.pred = existing(pred, "--pred");
      ev.ref = existing(ref, "--ref");
      if (!stories.empty()) ev.stories = existing(stories, "--stories");
      if (!rankings.empty()) ev.rankings = existing(rankings, "--rankings");
      if (!eval_ckpt.empty()) {
        ev.ckpt = existing(eval_ckpt, "--ckpt");
        ev.data = existing(c.data, "--data");
      }
      ev.seed = c.seed;
      const EvalReport rep = stage_eval(ev);
      const std::string doc = rep.to_json();
      if (!c.out.empty()) {
        std::ofstream f(c.out, std::ios::binary);
        if (!f) throw DataError("cannot write " + c.out);
        f << doc;
      }
      std::ostringstream text;
      for (const auto& [name, v] : rep.metrics) text << name << "\t" << v << "\n";
      if (c.as_json) {
        out << doc;
      } else {
        out << text.str();
      }
    } else if (pipe_cmd->parsed()) {
      const RunConfig r = resolve(c);
      const fs::path root = need_out(c);
      make_data(r, root / "data");
      RunConfig rd = r;
      rd.data_dir = root / "data";
      const Corpora data = load_corpora(rd.data_dir);
      const fs::path im = stage_finetune_im(rd, data, root / "im");
      const fs::path gm = stage_finetune_gm(rd, data, root / "gm");
      const fs::path coep = stage_train_feg(rd, data, im, gm, root / "feg");
      stage_predict(rd, data, coep, root / "predict");
      EvalInputs in;
      in.pred = root / "predict" / "predictions.txt";
      in.ref = root / "predict" / "references.txt";
      in.stories = root / "predict" / "stories.jsonl";
      in.ckpt = coep;
      in.data = rd.data_dir;
      in.seed = r.seed;
      const EvalReport rep = stage_eval(in);
      {
        std::ofstream f(root / "report.json", std::ios::binary);
        if (!f) throw DataError("cannot write " + (root / "report.json").string());
        f << rep.to_json();
      }
      rd.write(root / "config.txt");
      json j{{"im", im.string()}, {"gm", gm.string()}, {"coep", coep.string()}, {"report", (root / "report.json").string()}};
      std::ostringstream text;
      text << "checkpoints: " << im.string() << " " << gm.string() << " " << coep.string() << "\n";
      for (const auto& [name, v] : rep.metrics) text << name << "\t" << v << "\n";
      emit(out, c.as_json, j, text.str());
    } else if (abl_cmd->parsed()) {
      const auto seed_list = parse_seeds(seeds);
      Common with_seed = c;
      if (!with_seed.seed) with_seed.seed = seed_list.front();  // each run overrides it
      const RunConfig r = resolve(with_seed);
      const fs::path root = need_out(c);
      fs::create_directories(root);
      const auto result = run_ablation(r, seed_list, ablation_variants(split_commas(variants)), root);
      {
        std::ofstream f(root / "ablation.json", std::ios::binary);
        f << result.to_json(r);
        std::ofstream m(root / "ablation.md", std::ios::binary);
        m << result.to_markdown();
        if (!f || !m) throw DataError("cannot write ablation results to " + root.string());
      }
      emit(out, c.as_json, json::parse(result.to_json(r)), result.to_markdown());
    }
  } catch (const UsageError& e) {
    return fail(kExitUsage, e.what());
  } catch (const DataError& e) {
    return fail(kExitData, e.what());
  } catch (const CheckpointError& e) {
    return fail(kExitCheckpoint, e.what());
  } catch (const FreezeViolation& e) {
    return fail(kExitContract, e.what());
  } catch (const ContractError& e) {
    return fail(kExitContract, e.what());
  } catch (const std::exception& e) {
    return fail(kExitInternal, e.what());
  }
  return kExitOk;
}

}  // namespace coep
