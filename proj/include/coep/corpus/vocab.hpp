#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "coep/special_tokens.hpp"

namespace coep {

/// Lowercases, splits on whitespace and emits every ASCII punctuation
/// character as its own token.
std::vector<std::string> tokenize_words(std::string_view text);

/// Tokens of `text` joined by single spaces.
std::string normalize_text(std::string_view text);

/// Word-level vocabulary. Ids 0-3 are <s>, </s>, <pad>, <unk>.
class Vocab {
 public:
  Vocab();

  /// Vocabulary over every word of `texts`, in order of first appearance.
  static Vocab build(std::span<const std::string> texts);
  static Vocab load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  TokenId add(const std::string& token);
  std::size_t size() const { return tokens_.size(); }
  TokenId id(const std::string& token) const;  // <unk> when absent
  bool contains(const std::string& token) const { return ids_.count(token) > 0; }
  const std::string& token(TokenId id) const;

  std::vector<TokenId> encode(std::span<const std::string> words) const;
  /// tokenize_words followed by id lookup.
  std::vector<TokenId> tokenize(std::string_view text) const;
  /// Space-joined tokens with special tokens dropped.
  std::string detokenize(std::span<const TokenId> ids) const;

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

}  // namespace coep
