#include "coep/seq2seq/model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "coep/log.hpp"
#include "coep/numerics/errors.hpp"
#include "coep/special_tokens.hpp"

namespace coep {

namespace {

std::size_t parse_size(const std::map<std::string, std::string>& kv, const std::string& key,
                       std::size_t fallback) {
  auto it = kv.find(key);
  return it == kv.end() ? fallback : static_cast<std::size_t>(std::stoull(it->second));
}

float parse_float(const std::map<std::string, std::string>& kv, const std::string& key,
                  float fallback) {
  auto it = kv.find(key);
  return it == kv.end() ? fallback : std::stof(it->second);
}

Tensor normal_init(Shape shape, float std_dev, Rng& rng) {
  Tensor t(std::move(shape));
  for (float& v : t.data()) v = static_cast<float>(rng.normal() * std_dev);
  return t;
}

Tensor causal_mask(std::size_t n) {
  Tensor m(Shape{n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) m.at(i, j) = -std::numeric_limits<float>::infinity();
  }
  return m;
}

}  // namespace

ModelConfig ModelConfig::reference(std::size_t vocab_size) {
  ModelConfig c;
  c.num_layers = 6;
  c.d_model = 768;
  c.num_heads = 12;
  c.ffn_dim = 3072;
  c.vocab_size = vocab_size;
  c.max_positions = 1024;
  c.init_std = 0.02f;
  return c;
}

void ModelConfig::validate() const {
  if (num_layers == 0 || d_model == 0 || num_heads == 0 || ffn_dim == 0) {
    throw std::invalid_argument("model config: sizes must be positive");
  }
  if (d_model % num_heads != 0) {
    throw std::invalid_argument("model config: d_model must be divisible by num_heads");
  }
  if (vocab_size <= static_cast<std::size_t>(kNumSpecial)) {
    throw std::invalid_argument("model config: vocabulary must extend past the special tokens");
  }
  if (max_positions == 0) throw std::invalid_argument("model config: max_positions must be > 0");
  if (dropout < 0.0f || dropout >= 1.0f) throw std::invalid_argument("model config: dropout in [0,1)");
}

std::size_t ModelConfig::parameter_count() const {
  const std::size_t V = vocab_size, P = max_positions, d = d_model, f = ffn_dim, l = num_layers;
  const std::size_t embeddings = V * d + 2 * P * d + 2 * (2 * d);
  const std::size_t enc_layer = 4 * (d * d + d) + 2 * (2 * d) + 2 * d * f + f + d;
  const std::size_t dec_layer = 8 * (d * d + d) + 3 * (2 * d) + 2 * d * f + f + d;
  const std::size_t heads = V + (d * d + d) + (2 * d + 2);
  return embeddings + l * (enc_layer + dec_layer) + heads;
}

std::map<std::string, std::string> ModelConfig::to_map() const {
  return {
      {"num_layers", std::to_string(num_layers)},
      {"d_model", std::to_string(d_model)},
      {"num_heads", std::to_string(num_heads)},
      {"ffn_dim", std::to_string(ffn_dim)},
      {"vocab_size", std::to_string(vocab_size)},
      {"max_positions", std::to_string(max_positions)},
      {"dropout", std::to_string(dropout)},
      {"init_std", std::to_string(init_std)},
  };
}

ModelConfig ModelConfig::from_map(const std::map<std::string, std::string>& kv) {
  ModelConfig c;
  c.num_layers = parse_size(kv, "num_layers", c.num_layers);
  c.d_model = parse_size(kv, "d_model", c.d_model);
  c.num_heads = parse_size(kv, "num_heads", c.num_heads);
  c.ffn_dim = parse_size(kv, "ffn_dim", c.ffn_dim);
  c.vocab_size = parse_size(kv, "vocab_size", c.vocab_size);
  c.max_positions = parse_size(kv, "max_positions", c.max_positions);
  c.dropout = parse_float(kv, "dropout", c.dropout);
  c.init_std = parse_float(kv, "init_std", c.init_std);
  return c;
}

Var Seq2SeqModel::Linear::operator()(const Var& x) const {
  return ops::add_bias(ops::matmul(x, weight->var()), bias->var());
}

Var Seq2SeqModel::Norm::operator()(const Var& x) const {
  return ops::layer_norm(x, gain->var(), bias->var());
}

Seq2SeqModel::Linear Seq2SeqModel::make_linear(const std::string& name, std::size_t in,
                                               std::size_t out, Rng& rng) {
  Linear l;
  l.weight = &params_.add(name + ".weight", normal_init(Shape{in, out}, config_.init_std, rng));
  l.bias = &params_.add(name + ".bias", Tensor(Shape{out}));
  return l;
}

Seq2SeqModel::Norm Seq2SeqModel::make_norm(const std::string& name) {
  Norm n;
  n.gain = &params_.add(name + ".gain", Tensor(Shape{config_.d_model}, 1.0f));
  n.bias = &params_.add(name + ".bias", Tensor(Shape{config_.d_model}));
  return n;
}

Seq2SeqModel::Attention Seq2SeqModel::make_attention(const std::string& name, Rng& rng) {
  const std::size_t d = config_.d_model;
  return Attention{make_linear(name + ".q", d, d, rng), make_linear(name + ".k", d, d, rng),
                   make_linear(name + ".v", d, d, rng), make_linear(name + ".o", d, d, rng)};
}

Seq2SeqModel::Seq2SeqModel(ModelConfig config, std::uint64_t seed)
    : config_(config), dropout_rng_(Rng::derive_seed(seed, 0xD80F)) {
  config_.validate();
  Rng rng(seed);
  const std::size_t d = config_.d_model, f = config_.ffn_dim;
  tokens_ = &params_.add("embed.tokens", normal_init(Shape{config_.vocab_size, d}, config_.init_std, rng));
  enc_positions_ = &params_.add("encoder.positions",
                                normal_init(Shape{config_.max_positions, d}, config_.init_std, rng));
  enc_embed_norm_ = make_norm("encoder.embed_norm");
  for (std::size_t i = 0; i < config_.num_layers; ++i) {
    const std::string p = "encoder.layers." + std::to_string(i);
    EncoderLayer layer;
    layer.self_attn = make_attention(p + ".self_attn", rng);
    layer.self_norm = make_norm(p + ".self_norm");
    layer.fc1 = make_linear(p + ".fc1", d, f, rng);
    layer.fc2 = make_linear(p + ".fc2", f, d, rng);
    layer.ffn_norm = make_norm(p + ".ffn_norm");
    encoder_.push_back(layer);
  }
  dec_positions_ = &params_.add("decoder.positions",
                                normal_init(Shape{config_.max_positions, d}, config_.init_std, rng));
  dec_embed_norm_ = make_norm("decoder.embed_norm");
  for (std::size_t i = 0; i < config_.num_layers; ++i) {
    const std::string p = "decoder.layers." + std::to_string(i);
    DecoderLayer layer;
    layer.self_attn = make_attention(p + ".self_attn", rng);
    layer.self_norm = make_norm(p + ".self_norm");
    layer.cross_attn = make_attention(p + ".cross_attn", rng);
    layer.cross_norm = make_norm(p + ".cross_norm");
    layer.fc1 = make_linear(p + ".fc1", d, f, rng);
    layer.fc2 = make_linear(p + ".fc2", f, d, rng);
    layer.ffn_norm = make_norm(p + ".ffn_norm");
    decoder_.push_back(layer);
  }
  lm_bias_ = &params_.add("lm_head.bias", Tensor(Shape{config_.vocab_size}));
  cls_dense_ = make_linear("cls_head.dense", d, d, rng);
  cls_out_ = make_linear("cls_head.out", d, 2, rng);
}

const Var& Seq2SeqModel::token_table() const { return tokens_->var(); }

Var Seq2SeqModel::embed(std::span<const TokenId> tokens) const {
  return ops::embedding(tokens_->var(), tokens);
}

Var Seq2SeqModel::drop(const Var& x) {
  if (!training_) return x;
  return ops::dropout(x, config_.dropout, dropout_rng_);
}

Var Seq2SeqModel::positions(const Parameter& table, std::size_t start, std::size_t count) const {
  if (start + count > config_.max_positions) {
    throw DimensionError("sequence of length " + std::to_string(start + count) +
                         " exceeds max_positions " + std::to_string(config_.max_positions));
  }
  return ops::slice_rows(table.var(), start, count);
}

Var Seq2SeqModel::attend(const Attention& attn, const Var& q, const Var& k, const Var& v,
                         bool causal, AttentionTrace* trace, const char* kind,
                         std::size_t layer) {
  const std::size_t heads = config_.num_heads, dh = config_.head_dim();
  const float inv_sqrt = 1.0f / std::sqrt(static_cast<float>(dh));
  Var mask;
  if (causal) mask = ops::constant(causal_mask(q.shape()[0]));
  std::vector<Var> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Var qh = ops::slice_cols(q, h * dh, dh);
    Var kh = ops::slice_cols(k, h * dh, dh);
    Var vh = ops::slice_cols(v, h * dh, dh);
    Var scores = ops::scale(ops::matmul_nt(qh, kh), inv_sqrt);
    if (causal) scores = ops::add(scores, mask);
    Var weights = ops::softmax(scores);
    if (trace) trace->push_back(AttentionRecord{kind, layer, h, weights.value()});
    outs.push_back(ops::matmul(weights, vh));
  }
  return drop(attn.o(ops::concat_cols(outs)));
}

Var Seq2SeqModel::feed_forward(const Linear& fc1, const Linear& fc2, const Var& x) {
  return drop(fc2(ops::gelu(fc1(x))));
}

EncoderState Seq2SeqModel::encode(std::span<const TokenId> tokens, AttentionTrace* trace) {
  if (tokens.empty()) throw ContractError("encode: empty input");
  std::vector<TokenId> ids(tokens.begin(), tokens.end());
  if (ids.size() > config_.max_positions) {
    log::warn("encoder input of " + std::to_string(ids.size()) + " tokens truncated to the last " +
              std::to_string(config_.max_positions));
    ids.erase(ids.begin(), ids.end() - static_cast<std::ptrdiff_t>(config_.max_positions));
  }
  Var x = ops::add(embed(ids), positions(*enc_positions_, 0, ids.size()));
  x = drop(enc_embed_norm_(x));
  for (std::size_t i = 0; i < encoder_.size(); ++i) {
    const EncoderLayer& layer = encoder_[i];
    const Attention& a = layer.self_attn;
    Var attn = attend(a, a.q(x), a.k(x), a.v(x), false, trace, "encoder_self", i);
    x = layer.self_norm(ops::add(x, attn));
    x = layer.ffn_norm(ops::add(x, feed_forward(layer.fc1, layer.fc2, x)));
  }
  EncoderState state;
  state.hidden = x;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == kEos) state.segment_ends.push_back(i + 1);
  }
  state.tokens = std::move(ids);
  return state;
}

Var Seq2SeqModel::decode_hidden(const Var& input_embeddings, const Var& memory,
                                AttentionTrace* trace) {
  if (!memory.defined() || memory.value().rank() != 2 || memory.shape()[0] == 0) {
    throw ContractError("decoder memory must be a nonempty [M x d] matrix");
  }
  if (memory.shape()[1] != config_.d_model) {
    throw DimensionError("decoder memory width " + std::to_string(memory.shape()[1]) +
                         " != d_model " + std::to_string(config_.d_model));
  }
  const std::size_t n = input_embeddings.shape().at(0);
  if (n == 0) throw ContractError("decoder input is empty");
  Var x = ops::add(input_embeddings, positions(*dec_positions_, 0, n));
  x = drop(dec_embed_norm_(x));
  for (std::size_t i = 0; i < decoder_.size(); ++i) {
    const DecoderLayer& layer = decoder_[i];
    const Attention& s = layer.self_attn;
    x = layer.self_norm(ops::add(x, attend(s, s.q(x), s.k(x), s.v(x), true, trace, "decoder_self", i)));
    const Attention& c = layer.cross_attn;
    x = layer.cross_norm(
        ops::add(x, attend(c, c.q(x), c.k(memory), c.v(memory), false, trace, "decoder_cross", i)));
    x = layer.ffn_norm(ops::add(x, feed_forward(layer.fc1, layer.fc2, x)));
  }
  return x;
}

Var Seq2SeqModel::lm_logits(const Var& hidden) {
  return ops::add_bias(ops::matmul_nt(hidden, tokens_->var()), lm_bias_->var());
}

Var Seq2SeqModel::cls_logits(const Var& state_row) {
  return cls_out_(ops::tanh(cls_dense_(state_row)));
}

Tensor Seq2SeqModel::decode_logits(std::span<const TokenId> prev_tokens, const Var& memory) {
  if (prev_tokens.empty() || prev_tokens.front() != kBos) {
    throw ContractError("decode_logits: previous tokens must start with <s>");
  }
  Var h = decode_hidden(embed(prev_tokens), memory);
  Var last = ops::slice_rows(h, h.shape()[0] - 1, 1);
  Tensor logits = lm_logits(last).value();
  return Tensor(Shape{config_.vocab_size}, std::move(logits.storage()));
}

Var Seq2SeqModel::classify(std::span<const TokenId> x_tokens, std::span<const TokenId> y_tokens) {
  if (x_tokens.empty() || y_tokens.empty()) throw ContractError("classify: empty sequence");
  EncoderState enc = encode(x_tokens);
  std::vector<TokenId> dec{kBos};
  dec.insert(dec.end(), y_tokens.begin(), y_tokens.end());
  dec.push_back(kEos);
  Var h = decode_hidden(embed(dec), enc.hidden);
  return cls_logits(ops::slice_rows(h, h.shape()[0] - 1, 1));
}

Seq2SeqModel::Incremental::Incremental(Seq2SeqModel& model, const Var& memory) : model_(&model) {
  if (!memory.defined() || memory.value().rank() != 2 || memory.shape()[0] == 0) {
    throw ContractError("decoder memory must be a nonempty [M x d] matrix");
  }
  self_k_.resize(model.decoder_.size());
  self_v_.resize(model.decoder_.size());
  for (const DecoderLayer& layer : model.decoder_) {
    cross_k_.push_back(layer.cross_attn.k(memory));
    cross_v_.push_back(layer.cross_attn.v(memory));
  }
}

Seq2SeqModel::Incremental Seq2SeqModel::start_incremental(const Var& memory) {
  return Incremental(*this, memory);
}

Var Seq2SeqModel::Incremental::step(const Var& input_embedding_row) {
  Seq2SeqModel& m = *model_;
  Var x = ops::add(input_embedding_row, m.positions(*m.dec_positions_, position_, 1));
  x = m.drop(m.dec_embed_norm_(x));
  for (std::size_t i = 0; i < m.decoder_.size(); ++i) {
    const DecoderLayer& layer = m.decoder_[i];
    const Attention& s = layer.self_attn;
    Var k = s.k(x), v = s.v(x);
    if (self_k_[i].defined()) {
      const Var ks[] = {self_k_[i], k};
      const Var vs[] = {self_v_[i], v};
      k = ops::concat_rows(ks);
      v = ops::concat_rows(vs);
    }
    self_k_[i] = k;
    self_v_[i] = v;
    x = layer.self_norm(ops::add(x, m.attend(s, s.q(x), k, v, false, nullptr, "decoder_self", i)));
    const Attention& c = layer.cross_attn;
    x = layer.cross_norm(
        ops::add(x, m.attend(c, c.q(x), cross_k_[i], cross_v_[i], false, nullptr, "decoder_cross", i)));
    x = layer.ffn_norm(ops::add(x, m.feed_forward(layer.fc1, layer.fc2, x)));
  }
  ++position_;
  return x;
}

}  // namespace coep
