#include "coep/cli/ablation.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "coep/cli/stages.hpp"
#include "coep/log.hpp"
#include "json.hpp"

namespace coep {

namespace fs = std::filesystem;

std::string AblationVariant::slug() const {
  if (name == "full") return "full";
  if (name == "GM-only") return "gm_only";
  std::string s = "no_";
  for (char c : name.substr(1)) s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::vector<AblationVariant> ablation_variants(const std::vector<std::string>& names) {
  static const std::vector<AblationVariant> known = {
      {"full"},
      {"-PT", true},
      {"-SKG", false, true},
      {"-CLS", false, false, true},
      {"GM-only", false, false, false, false},
  };
  std::vector<AblationVariant> out;
  for (const auto& n : names) {
    if (n == "all") {
      out.insert(out.end(), known.begin(), known.end());
      continue;
    }
    bool found = false;
    for (const auto& v : known) {
      if (v.name == n) {
        out.push_back(v);
        found = true;
      }
    }
    if (!found) throw UsageError("ablation: unknown variant '" + n + "' (full, -PT, -SKG, -CLS, GM-only, all)");
  }
  if (out.empty()) throw UsageError("ablation: no variants");
  return out;
}

double AblationResult::mean(const std::string& variant, double AblationCell::*metric) const {
  double s = 0;
  std::size_t n = 0;
  for (const auto& c : cells) {
    if (c.variant == variant) {
      s += c.*metric;
      ++n;
    }
  }
  return n ? s / static_cast<double>(n) : std::nan("");
}

double AblationResult::stddev(const std::string& variant, double AblationCell::*metric) const {
  const double m = mean(variant, metric);
  double s = 0;
  std::size_t n = 0;
  for (const auto& c : cells) {
    if (c.variant == variant) {
      s += (c.*metric - m) * (c.*metric - m);
      ++n;
    }
  }
  return n > 1 ? std::sqrt(s / static_cast<double>(n - 1)) : 0.0;
}

std::string AblationResult::to_json(const RunConfig& config) const {
  using json = nlohmann::json;
  json j;
  j["seeds"] = seeds;
  j["variants"] = variants;
  j["config"] = config.to_map();
  j["cells"] = json::array();
  for (const auto& c : cells) {
    j["cells"].push_back({{"variant", c.variant},
                          {"seed", c.seed},
                          {"exact_match", c.exact_match},
                          {"bleu_1", c.bleu_1},
                          {"bleu_2", c.bleu_2},
                          {"rouge_l", c.rouge_l},
                          {"perplexity", c.perplexity},
                          {"steps", c.steps},
                          {"seconds", c.seconds}});
  }
  j["mean"] = json::object();
  for (const auto& v : variants) {
    j["mean"][v] = {{"exact_match", mean(v, &AblationCell::exact_match)},
                    {"bleu_1", mean(v, &AblationCell::bleu_1)},
                    {"bleu_2", mean(v, &AblationCell::bleu_2)},
                    {"rouge_l", mean(v, &AblationCell::rouge_l)},
                    {"perplexity", mean(v, &AblationCell::perplexity)}};
  }
  return j.dump(2) + "\n";
}

std::string AblationResult::to_markdown() const {
  std::ostringstream o;
  o.setf(std::ios::fixed);
  o.precision(3);
  o << "| Variant | Exact match | BLEU-1 | BLEU-2 | ROUGE-L | PPL |";
  for (auto s : seeds) o << " EM seed " << s << " |";
  o << "\n|---|---|---|---|---|---|";
  for (std::size_t i = 0; i < seeds.size(); ++i) o << "---|";
  o << "\n";
  for (const auto& v : variants) {
    o << "| " << v;
    for (auto m : {&AblationCell::exact_match, &AblationCell::bleu_1, &AblationCell::bleu_2, &AblationCell::rouge_l,
                   &AblationCell::perplexity}) {
      o << " | " << mean(v, m) << " ± " << stddev(v, m);
    }
    o << " |";
    for (auto s : seeds) {
      for (const auto& c : cells) {
        if (c.variant == v && c.seed == s) o << " " << c.exact_match << " |";
      }
    }
    o << "\n";
  }
  return o.str();
}

AblationResult run_ablation(const RunConfig& base, const std::vector<std::uint64_t>& seeds,
                            const std::vector<AblationVariant>& variants, const fs::path& out) {
  using clock = std::chrono::steady_clock;
  AblationResult result;
  result.seeds = seeds;
  for (const auto& v : variants) result.variants.push_back(v.name);
  bool need_plain_gm = false, need_raw_gm = false;
  for (const auto& v : variants) (v.skip_skg ? need_raw_gm : need_plain_gm) = true;

  for (std::uint64_t seed : seeds) {
    RunConfig config = base;
    config.seed = seed;
    const fs::path root = out / ("seed_" + std::to_string(seed));
    make_data(config, root / "data");
    const Corpora data = load_corpora(root / "data");
    log::info("ablation seed " + std::to_string(seed) + ": fine-tuning IM and GM");
    const fs::path im = stage_finetune_im(config, data, root / "im");
    fs::path gm, gm_raw;
    if (need_plain_gm) {
      RunConfig c = config;
      c.skip_skg = false;
      gm = stage_finetune_gm(c, data, root / "gm");
    }
    if (need_raw_gm) {
      RunConfig c = config;
      c.skip_skg = true;
      gm_raw = stage_finetune_gm(c, data, root / "gm_no_skg");
    }
    for (const auto& v : variants) {
      RunConfig c = config;
      c.skip_pt = v.skip_pt;
      c.skip_skg = v.skip_skg;
      c.skip_cls = v.skip_cls;
      c.use_prompts = v.use_prompts;
      const auto t0 = clock::now();
      const fs::path ckpt = stage_train_feg(c, data, im, v.skip_skg ? gm_raw : gm, root / v.slug());
      const double seconds = std::chrono::duration<double>(clock::now() - t0).count();

      LoadedModels models = load_coep(ckpt);
      const CoepModels view = models.view();
      DecodeConfig dc = c.decode;
      dc.strategy = Strategy::kGreedy;
      std::vector<std::string> preds;
      std::vector<std::vector<std::string>> refs;
      for (const Story& s : data.test_stories) {
        for (const FegExample& e : unfold_story(s)) {
          preds.push_back(generate_future_event(view, e.history, e.current, dc));
          refs.push_back({e.target});
        }
      }
      const EvalReport rep = evaluate(preds, refs);
      AblationCell cell;
      cell.variant = v.name;
      cell.seed = seed;
      cell.exact_match = rep.metrics.at("exact_match");
      cell.bleu_1 = rep.metrics.at("bleu_1");
      cell.bleu_2 = rep.metrics.at("bleu_2");
      cell.rouge_l = rep.metrics.at("rouge_l");
      cell.perplexity = test_perplexity(models, data);
      cell.steps = c.feg_steps;
      cell.seconds = seconds;
      log::info("ablation seed " + std::to_string(seed) + " " + v.name +
                ": exact_match=" + std::to_string(cell.exact_match));
      result.cells.push_back(cell);
    }
  }
  return result;
}

}  // namespace coep
