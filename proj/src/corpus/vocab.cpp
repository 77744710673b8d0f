#include "coep/corpus/vocab.hpp"

#include <cctype>
#include <fstream>
#include <stdexcept>

#include "coep/numerics/errors.hpp"

namespace coep {

namespace {
const char* const kSpecialNames[] = {"<s>", "</s>", "<pad>", "<unk>"};
}

std::vector<std::string> tokenize_words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (c < 128 && std::ispunct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur.push_back(c < 128 ? static_cast<char>(std::tolower(c)) : ch);
    }
  }
  flush();
  return out;
}

std::string normalize_text(std::string_view text) {
  std::string out;
  for (const std::string& w : tokenize_words(text)) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

Vocab::Vocab() {
  for (const char* name : kSpecialNames) add(name);
}

Vocab Vocab::build(std::span<const std::string> texts) {
  Vocab v;
  for (const std::string& t : texts) {
    for (const std::string& w : tokenize_words(t)) v.add(w);
  }
  return v;
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vocabulary " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  if (lines.size() < static_cast<std::size_t>(kNumSpecial)) {
    throw std::runtime_error("vocabulary " + path.string() + " lacks the special tokens");
  }
  for (TokenId i = 0; i < kNumSpecial; ++i) {
    if (lines[i] != kSpecialNames[i]) {
      throw std::runtime_error("vocabulary " + path.string() + ": line " + std::to_string(i + 1) +
                               " must be " + kSpecialNames[i]);
    }
  }
  Vocab v;
  for (std::size_t i = kNumSpecial; i < lines.size(); ++i) {
    if (v.contains(lines[i])) {
      throw std::runtime_error("vocabulary " + path.string() + ": duplicate token " + lines[i]);
    }
    v.add(lines[i]);
  }
  return v;
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write vocabulary " + path.string());
  for (const std::string& t : tokens_) out << t << '\n';
}

TokenId Vocab::add(const std::string& token) {
  auto it = ids_.find(token);
  if (it != ids_.end()) return it->second;
  const auto id = static_cast<TokenId>(tokens_.size());
  tokens_.push_back(token);
  ids_.emplace(token, id);
  return id;
}

TokenId Vocab::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw IndexError("token id " + std::to_string(id) + " outside vocabulary");
  }
  return tokens_[id];
}

std::vector<TokenId> Vocab::encode(std::span<const std::string> words) const {
  std::vector<TokenId> out;
  out.reserve(words.size());
  for (const std::string& w : words) out.push_back(id(w));
  return out;
}

std::vector<TokenId> Vocab::tokenize(std::string_view text) const {
  const auto words = tokenize_words(text);
  return encode(words);
}

std::string Vocab::detokenize(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) {
    if (is_special(id)) continue;
    if (!out.empty()) out += ' ';
    out += token(id);
  }
  return out;
}

}  // namespace coep
