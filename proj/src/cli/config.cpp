#include "coep/cli/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace coep {

namespace {

template <typename T>
std::string fmt(T v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

template <typename T>
T parse_num(const std::string& key, const std::string& v) {
  T out{};
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    throw UsageError("config: bad value '" + v + "' for " + key);
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw UsageError("config: bad boolean '" + v + "' for " + key);
}

std::vector<Relation> parse_relations(const std::string& key, const std::string& v) {
  std::vector<Relation> out;
  if (v == "none") return out;
  std::stringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto r = parse_relation(trim(item));
    if (!r) throw UsageError("config: unknown relation '" + item + "' in " + key);
    out.push_back(*r);
  }
  if (out.empty()) throw UsageError("config: empty relation list (use 'none')");
  return out;
}

struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string& key, const std::string&)> set;
};

template <typename T>
Field num(T RunConfig::*m) {
  return {[m](const RunConfig& c) { return fmt(c.*m); },
          [m](RunConfig& c, const std::string& k, const std::string& v) { c.*m = parse_num<T>(k, v); }};
}

template <typename S, typename T>
Field nested(S RunConfig::*outer, T S::*inner) {
  return {[=](const RunConfig& c) { return fmt((c.*outer).*inner); },
          [=](RunConfig& c, const std::string& k, const std::string& v) { (c.*outer).*inner = parse_num<T>(k, v); }};
}

Field flag(bool RunConfig::*m) {
  return {[m](const RunConfig& c) { return fmt_bool(c.*m); },
          [m](RunConfig& c, const std::string& k, const std::string& v) { c.*m = parse_bool(k, v); }};
}

void add_optimizer(std::map<std::string, Field>& f, const std::string& prefix, AdamWConfig RunConfig::*m) {
  f[prefix + "lr"] = nested(m, &AdamWConfig::lr);
  f[prefix + "weight_decay"] = nested(m, &AdamWConfig::weight_decay);
  f[prefix + "beta1"] = nested(m, &AdamWConfig::beta1);
  f[prefix + "beta2"] = nested(m, &AdamWConfig::beta2);
  f[prefix + "eps"] = nested(m, &AdamWConfig::eps);
  f[prefix + "clip_norm"] = nested(m, &AdamWConfig::clip_norm);
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> f = [] {
    std::map<std::string, Field> f;
    f["seed"] = {[](const RunConfig& c) { return c.seed ? fmt(*c.seed) : std::string(); },
                 [](RunConfig& c, const std::string& k, const std::string& v) {
                   c.seed = parse_num<std::uint64_t>(k, v);
                 }};
    f["data_dir"] = {[](const RunConfig& c) { return c.data_dir.string(); },
                     [](RunConfig& c, const std::string&, const std::string& v) { c.data_dir = v; }};
    f["model.num_layers"] = nested(&RunConfig::model, &ModelConfig::num_layers);
    f["model.d_model"] = nested(&RunConfig::model, &ModelConfig::d_model);
    f["model.num_heads"] = nested(&RunConfig::model, &ModelConfig::num_heads);
    f["model.ffn_dim"] = nested(&RunConfig::model, &ModelConfig::ffn_dim);
    f["model.max_positions"] = nested(&RunConfig::model, &ModelConfig::max_positions);
    f["model.dropout"] = nested(&RunConfig::model, &ModelConfig::dropout);
    f["model.init_std"] = nested(&RunConfig::model, &ModelConfig::init_std);
    f["im.epochs"] = num(&RunConfig::im_epochs);
    f["im.batch_size"] = num(&RunConfig::im_batch_size);
    add_optimizer(f, "im.", &RunConfig::im_optimizer);
    f["gm.epochs"] = num(&RunConfig::gm_epochs);
    f["gm.batch_size"] = num(&RunConfig::gm_batch_size);
    add_optimizer(f, "gm.", &RunConfig::gm_optimizer);
    f["feg.epochs"] = num(&RunConfig::feg_epochs);
    f["feg.steps"] = num(&RunConfig::feg_steps);
    f["feg.batch_size"] = num(&RunConfig::feg_batch_size);
    add_optimizer(f, "feg.im.", &RunConfig::feg_im_optimizer);
    add_optimizer(f, "feg.gm.", &RunConfig::feg_gm_optimizer);
    f["feg.st_max_len"] = nested(&RunConfig::st, &StDecodeConfig::max_len);
    f["feg.st_temperature"] = nested(&RunConfig::st, &StDecodeConfig::temperature);
    f["feg.anneal_temperature"] = flag(&RunConfig::anneal_temperature);
    f["feg.relations"] = {[](const RunConfig& c) {
                            if (c.relations.empty()) return std::string("none");
                            std::string s;
                            for (Relation r : c.relations) s += (s.empty() ? "" : ",") + std::string(relation_name(r));
                            return s;
                          },
                          [](RunConfig& c, const std::string& k, const std::string& v) {
                            c.relations = parse_relations(k, v);
                          }};
    f["skip_skg"] = flag(&RunConfig::skip_skg);
    f["skip_pt"] = flag(&RunConfig::skip_pt);
    f["skip_cls"] = flag(&RunConfig::skip_cls);
    f["use_prompts"] = flag(&RunConfig::use_prompts);
    f["decode.strategy"] = {[](const RunConfig& c) { return strategy_name(c.decode.strategy); },
                            [](RunConfig& c, const std::string& k, const std::string& v) {
                              const auto s = parse_strategy(v);
                              if (!s) throw UsageError("config: unknown strategy '" + v + "' for " + k);
                              c.decode.strategy = *s;
                            }};
    f["decode.k"] = nested(&RunConfig::decode, &DecodeConfig::k);
    f["decode.max_len"] = nested(&RunConfig::decode, &DecodeConfig::max_len);
    f["decode.seed"] = nested(&RunConfig::decode, &DecodeConfig::seed);
    f["decode.temperature"] = nested(&RunConfig::decode, &DecodeConfig::temperature);
    f["data.train_stories"] = num(&RunConfig::train_stories);
    f["data.test_stories"] = num(&RunConfig::test_stories);
    return f;
  }();
  return f;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = fields().find(key);
  if (it == fields().end()) throw UsageError("config: unknown key '" + key + "'");
  it->second.set(*this, key, value);
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("config: cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    }
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

std::map<std::string, std::string> RunConfig::to_map() const {
  std::map<std::string, std::string> out;
  for (const auto& [k, f] : fields()) out[k] = f.get(*this);
  return out;
}

std::string RunConfig::to_text() const {
  std::string s;
  for (const auto& [k, v] : to_map()) s += k + "=" + v + "\n";
  return s;
}

void RunConfig::write(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw UsageError("config: cannot write " + path.string());
  out << to_text();
}

void RunConfig::validate() const {
  if (!seed) throw UsageError("config: seed is required");
  if (im_batch_size == 0 || gm_batch_size == 0 || feg_batch_size == 0) {
    throw UsageError("config: batch sizes must be > 0");
  }
  if (st.max_len == 0) throw UsageError("config: feg.st_max_len must be >= 1");
  if (!(st.temperature > 0)) throw UsageError("config: feg.st_temperature must be > 0");
  try {
    decode.validate();
  } catch (const std::exception& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  if (model.num_heads == 0 || model.d_model % model.num_heads != 0) {
    throw UsageError("config: model.d_model must be a positive multiple of model.num_heads");
  }
  if (model.dropout < 0 || model.dropout >= 1) throw UsageError("config: model.dropout must be in [0,1)");
}

std::uint64_t RunConfig::require_seed() const {
  if (!seed) throw UsageError("config: seed is required");
  return *seed;
}

TrainConfig RunConfig::im_train() const {
  TrainConfig t;
  t.epochs = im_epochs;
  t.batch_size = im_batch_size;
  t.optimizer = im_optimizer;
  t.seed = require_seed();
  return t;
}

TrainConfig RunConfig::gm_train() const {
  TrainConfig t;
  t.epochs = gm_epochs;
  t.batch_size = gm_batch_size;
  t.optimizer = gm_optimizer;
  t.seed = require_seed();
  return t;
}

CoepConfig RunConfig::coep() const {
  CoepConfig c;
  c.epochs = feg_epochs;
  c.max_steps = feg_steps;
  c.batch_size = feg_batch_size;
  c.im_optimizer = feg_im_optimizer;
  c.gm_optimizer = feg_gm_optimizer;
  c.seed = require_seed();
  c.skip_pt = skip_pt;
  c.skip_cls = skip_cls;
  c.use_prompts = use_prompts;
  c.relations = relations;
  c.st = st;
  c.anneal_temperature = anneal_temperature;
  return c;
}

}  // namespace coep
