#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "coep/numerics/autograd.hpp"
#include "coep/numerics/ops.hpp"
#include "coep/numerics/rng.hpp"

namespace coep {

/// Architecture of one encoder-decoder. Encoder and decoder have the same
/// depth.
struct ModelConfig {
  std::size_t num_layers = 2;
  std::size_t d_model = 64;
  std::size_t num_heads = 4;
  std::size_t ffn_dim = 256;
  std::size_t vocab_size = 0;
  std::size_t max_positions = 128;
  float dropout = 0.1f;
  float init_std = 0.1f;

  /// BART-base shape: 6 layers, 768 hidden, 12 heads, 3072 FFN.
  static ModelConfig reference(std::size_t vocab_size);

  void validate() const;
  std::size_t head_dim() const { return d_model / num_heads; }

  /// Scalar count implied by the architecture, with V vocab, P positions,
  /// d model width, f FFN width and l layers:
  ///   embeddings       V*d + 2*P*d + 2*(2d)          (tokens, enc/dec positions, embed LNs)
  ///   encoder layer    4(d^2+d) + 2(2d) + 2df + f + d
  ///   decoder layer    8(d^2+d) + 3(2d) + 2df + f + d
  ///   LM head          V                            (weight tied to the token table)
  ///   cls head         d^2 + d + 2d + 2
  std::size_t parameter_count() const;

  std::map<std::string, std::string> to_map() const;
  static ModelConfig from_map(const std::map<std::string, std::string>& kv);
};

struct EncoderState {
  Var hidden;  // [L x d_model]
  std::vector<TokenId> tokens;
  std::vector<std::size_t> segment_ends;  // index one past each segment's closing token
};

/// Attention weights captured during a forward pass, for inspection.
struct AttentionRecord {
  std::string kind;  // "encoder_self", "decoder_self", "decoder_cross"
  std::size_t layer = 0;
  std::size_t head = 0;
  Tensor weights;  // [queries x keys]
};
using AttentionTrace = std::vector<AttentionRecord>;

/// Transformer encoder-decoder with a tied-embedding LM head and a binary
/// classification head over the final decoder state. Post-LN layers and
/// learned positional embeddings, as in BART.
class Seq2SeqModel {
 public:
  Seq2SeqModel(ModelConfig config, std::uint64_t seed);
  Seq2SeqModel(const Seq2SeqModel&) = delete;
  Seq2SeqModel& operator=(const Seq2SeqModel&) = delete;

  const ModelConfig& config() const { return config_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  void set_training(bool training) { training_ = training; }
  bool training() const { return training_; }
  void reseed_dropout(std::uint64_t seed) { dropout_rng_ = Rng(seed); }

  /// Encodes a token sequence. Inputs longer than max_positions keep their
  /// last max_positions tokens (a warning is logged).
  EncoderState encode(std::span<const TokenId> tokens, AttentionTrace* trace = nullptr);

  /// E_V, the [V x d] token table shared by encoder, decoder and LM head.
  const Var& token_table() const;
  Var embed(std::span<const TokenId> tokens) const;

  /// Teacher-forced decoder over input embeddings [T x d] (positions are
  /// added here) attending to `memory` [M x d]. Returns top-layer states.
  Var decode_hidden(const Var& input_embeddings, const Var& memory, AttentionTrace* trace = nullptr);

  Var lm_logits(const Var& hidden);
  /// Binary logits [1 x 2] from one decoder state row.
  Var cls_logits(const Var& state_row);

  /// Next-token logits [V] after `prev_tokens` (which start with <s>).
  Tensor decode_logits(std::span<const TokenId> prev_tokens, const Var& memory);

  /// Binary logits [1 x 2]: encoder over x, decoder over <s> y </s>, head on
  /// the final </s> state.
  Var classify(std::span<const TokenId> x_tokens, std::span<const TokenId> y_tokens);

  /// Step-wise decoder sharing cached self-attention keys/values. Each step
  /// consumes one input embedding row and yields the top-layer state row.
  class Incremental {
   public:
    Var step(const Var& input_embedding_row);
    std::size_t position() const { return position_; }

   private:
    friend class Seq2SeqModel;
    Incremental(Seq2SeqModel& model, const Var& memory);
    Seq2SeqModel* model_;
    std::vector<Var> self_k_, self_v_;
    std::vector<Var> cross_k_, cross_v_;
    std::size_t position_ = 0;
  };
  Incremental start_incremental(const Var& memory);

 private:
  struct Linear {
    Parameter* weight = nullptr;
    Parameter* bias = nullptr;
    Var operator()(const Var& x) const;
  };
  struct Norm {
    Parameter* gain = nullptr;
    Parameter* bias = nullptr;
    Var operator()(const Var& x) const;
  };
  struct Attention {
    Linear q, k, v, o;
  };
  struct EncoderLayer {
    Attention self_attn;
    Norm self_norm;
    Linear fc1, fc2;
    Norm ffn_norm;
  };
  struct DecoderLayer {
    Attention self_attn;
    Norm self_norm;
    Attention cross_attn;
    Norm cross_norm;
    Linear fc1, fc2;
    Norm ffn_norm;
  };

  Linear make_linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng);
  Norm make_norm(const std::string& name);
  Attention make_attention(const std::string& name, Rng& rng);

  /// Multi-head attention of projected queries over projected keys/values.
  Var attend(const Attention& attn, const Var& q, const Var& k, const Var& v, bool causal,
             AttentionTrace* trace, const char* kind, std::size_t layer);
  Var feed_forward(const Linear& fc1, const Linear& fc2, const Var& x);
  Var drop(const Var& x);
  Var positions(const Parameter& table, std::size_t start, std::size_t count) const;

  ModelConfig config_;
  ParameterSet params_;
  bool training_ = false;
  Rng dropout_rng_;

  Parameter* tokens_ = nullptr;
  Parameter* enc_positions_ = nullptr;
  Parameter* dec_positions_ = nullptr;
  Norm enc_embed_norm_, dec_embed_norm_;
  std::vector<EncoderLayer> encoder_;
  std::vector<DecoderLayer> decoder_;
  Parameter* lm_bias_ = nullptr;
  Linear cls_dense_, cls_out_;
};

}  // namespace coep
