#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "coep/corpus/vocab.hpp"
#include "coep/seq2seq/model.hpp"

namespace coep {

/// Unreadable, corrupt or mismatched checkpoint.
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// On-disk layout, all integers little-endian:
///   "COEP" | u32 version | u32 n, n bytes of "key=value\n" config text |
///   u32 count | count x (u32 len, name, u32 ndim, ndim x u64, f32 data) |
///   u64 FNV-1a-64 of every preceding byte
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::map<std::string, std::string> config;
  std::vector<std::pair<std::string, Tensor>> params;

  std::vector<std::uint8_t> serialize() const;
  static Checkpoint deserialize(const std::vector<std::uint8_t>& bytes);

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

  const std::string& get(const std::string& key) const;
};

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t n);

/// Adds `model`'s config under "<prefix>model." and its parameters under
/// "<prefix>" to the checkpoint.
void store_model(Checkpoint& ckpt, const std::string& prefix, const Seq2SeqModel& model);
/// Rebuilds the model stored under `prefix`; every parameter must be
/// present with its architectural shape.
std::unique_ptr<Seq2SeqModel> restore_model(const Checkpoint& ckpt, const std::string& prefix);

void store_vocab(Checkpoint& ckpt, const Vocab& vocab);
Vocab restore_vocab(const Checkpoint& ckpt);

}  // namespace coep
