#include "coep/cli/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace coep {

namespace {

constexpr char kMagic[4] = {'C', 'O', 'E', 'P'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename T>
  void le(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void str(const std::string& s) {
    le(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::vector<std::uint8_t>& data() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& in, std::size_t end) : in_(in), end_(end) {}
  const std::uint8_t* take(std::size_t n) {
    if (end_ - pos_ < n) throw CheckpointError("checkpoint truncated");
    const std::uint8_t* p = in_.data() + pos_;
    pos_ += n;
    return p;
  }
  template <typename T>
  T le() {
    const std::uint8_t* p = take(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(p[i]) << (8 * i);
    return v;
  }
  std::string str() {
    const auto n = le<std::uint32_t>();
    const auto* p = take(n);
    return std::string(reinterpret_cast<const char*>(p), n);
  }
  bool done() const { return pos_ == end_; }

 private:
  const std::vector<std::uint8_t>& in_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

std::uint32_t float_bits(float f) {
  std::uint32_t u;
  static_assert(sizeof(u) == sizeof(f));
  std::memcpy(&u, &f, sizeof(f));
  return u;
}

float bits_float(std::uint32_t u) {
  float f;
  std::memcpy(&f, &u, sizeof(f));
  return f;
}

}  // namespace

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::uint8_t> Checkpoint::serialize() const {
  Writer w;
  w.bytes(kMagic, 4);
  w.le(kVersion);
  std::string text;
  for (const auto& [k, v] : config) {
    if (k.find('=') != std::string::npos || k.find('\n') != std::string::npos || v.find('\n') != std::string::npos) {
      throw CheckpointError("config entry '" + k + "' cannot be stored");
    }
    text += k + "=" + v + "\n";
  }
  w.str(text);
  w.le(static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    w.str(name);
    w.le(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) w.le(static_cast<std::uint64_t>(d));
    for (float f : t.data()) w.le(float_bits(f));
  }
  const std::uint64_t sum = fnv1a64(w.data().data(), w.data().size());
  w.le(sum);
  return std::move(w.data());
}

Checkpoint Checkpoint::deserialize(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 + 4 + 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CheckpointError("not a checkpoint (bad magic)");
  }
  const std::size_t body = bytes.size() - 8;
  Reader tail(bytes, bytes.size());
  tail.take(body);
  if (tail.le<std::uint64_t>() != fnv1a64(bytes.data(), body)) throw CheckpointError("checkpoint checksum mismatch");

  Reader r(bytes, body);
  r.take(4);
  const auto version = r.le<std::uint32_t>();
  if (version != kVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  std::istringstream text(r.str());
  std::string line;
  while (std::getline(text, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw CheckpointError("malformed config line '" + line + "'");
    ck.config[line.substr(0, eq)] = line.substr(eq + 1);
  }
  const auto count = r.le<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str();
    const auto ndim = r.le<std::uint32_t>();
    Shape shape;
    std::size_t numel = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      shape.push_back(static_cast<std::size_t>(r.le<std::uint64_t>()));
      numel *= shape.back();
    }
    std::vector<float> data(numel);
    for (float& f : data) f = bits_float(r.le<std::uint32_t>());
    ck.params.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  if (!r.done()) throw CheckpointError("trailing bytes after parameters");
  return ck;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("write failed for " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return deserialize(bytes);
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

const std::string& Checkpoint::get(const std::string& key) const {
  auto it = config.find(key);
  if (it == config.end()) throw CheckpointError("checkpoint has no '" + key + "' entry");
  return it->second;
}

void store_model(Checkpoint& ckpt, const std::string& prefix, const Seq2SeqModel& model) {
  for (const auto& [k, v] : model.config().to_map()) ckpt.config[prefix + "model." + k] = v;
  for (const Parameter* p : model.params().all()) ckpt.params.emplace_back(prefix + p->name(), p->tensor());
}

std::unique_ptr<Seq2SeqModel> restore_model(const Checkpoint& ckpt, const std::string& prefix) {
  std::map<std::string, std::string> kv;
  const std::string key_prefix = prefix + "model.";
  for (const auto& [k, v] : ckpt.config) {
    if (k.starts_with(key_prefix)) kv[k.substr(key_prefix.size())] = v;
  }
  if (kv.empty()) throw CheckpointError("checkpoint has no model under '" + prefix + "'");
  ModelConfig config;
  try {
    config = ModelConfig::from_map(kv);
    config.validate();
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("invalid model config: ") + e.what());
  }
  auto model = std::make_unique<Seq2SeqModel>(config, 0);
  std::map<std::string, const Tensor*> stored;
  for (const auto& [name, t] : ckpt.params) {
    if (name.starts_with(prefix)) stored[name.substr(prefix.size())] = &t;
  }
  if (stored.size() != model->params().size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(stored.size()) + " parameters under '" + prefix +
                          "', the architecture has " + std::to_string(model->params().size()));
  }
  for (Parameter* p : model->params().all()) {
    auto it = stored.find(p->name());
    if (it == stored.end()) throw CheckpointError("checkpoint is missing parameter '" + prefix + p->name() + "'");
    if (it->second->shape() != p->tensor().shape()) {
      throw CheckpointError("parameter '" + prefix + p->name() + "' has the wrong shape");
    }
    std::copy(it->second->data().begin(), it->second->data().end(), p->tensor().data().begin());
  }
  return model;
}

void store_vocab(Checkpoint& ckpt, const Vocab& vocab) {
  std::string joined;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    if (i) joined += ' ';
    joined += vocab.token(static_cast<TokenId>(i));
  }
  ckpt.config["vocab"] = joined;
}

Vocab restore_vocab(const Checkpoint& ckpt) {
  std::istringstream in(ckpt.get("vocab"));
  Vocab v;
  std::string tok;
  std::size_t i = 0;
  while (in >> tok) {
    if (i < v.size()) {
      if (v.token(static_cast<TokenId>(i)) != tok) throw CheckpointError("vocab special tokens out of order");
    } else if (v.add(tok) != static_cast<TokenId>(i)) {
      throw CheckpointError("duplicate vocab token '" + tok + "'");
    }
    ++i;
  }
  if (i != v.size()) throw CheckpointError("vocab is truncated");
  return v;
}

}  // namespace coep
