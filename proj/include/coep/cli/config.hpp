#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "coep/decode/decode.hpp"
#include "coep/numerics/adamw.hpp"
#include "coep/prompting/prompting.hpp"
#include "coep/seq2seq/model.hpp"

namespace coep {

/// Bad command line or configuration (exit code 1).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything a pipeline run depends on. Stored as flat key=value text;
/// `keys()` lists every key with its default.
struct RunConfig {
  std::optional<std::uint64_t> seed;
  std::filesystem::path data_dir = "data";

  ModelConfig model;

  std::size_t im_epochs = 20;
  std::size_t im_batch_size = 32;
  AdamWConfig im_optimizer{.lr = 1e-3};

  std::size_t gm_epochs = 10;
  std::size_t gm_batch_size = 32;
  AdamWConfig gm_optimizer{.lr = 1e-3};

  std::size_t feg_epochs = 100;
  std::size_t feg_steps = 150;
  std::size_t feg_batch_size = 8;
  AdamWConfig feg_im_optimizer{.lr = 1e-4};
  AdamWConfig feg_gm_optimizer{.lr = 1e-3};
  StDecodeConfig st;
  bool anneal_temperature = false;
  std::vector<Relation> relations{kAllRelations.begin(), kAllRelations.end()};

  bool skip_skg = false;
  bool skip_pt = false;
  bool skip_cls = false;
  bool use_prompts = true;

  DecodeConfig decode;

  std::size_t train_stories = 100;
  std::size_t test_stories = 20;

  /// Applies one key=value assignment; unknown keys and bad values throw
  /// UsageError.
  void set(const std::string& key, const std::string& value);
  /// Reads a key=value file ('#' starts a comment, blank lines ignored).
  void load_file(const std::filesystem::path& path);

  std::map<std::string, std::string> to_map() const;
  std::string to_text() const;
  void write(const std::filesystem::path& path) const;

  /// Throws UsageError when the seed is missing or a value is out of range.
  void validate() const;

  std::uint64_t require_seed() const;
  TrainConfig im_train() const;
  TrainConfig gm_train() const;
  CoepConfig coep() const;
};

}  // namespace coep
