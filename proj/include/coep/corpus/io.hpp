#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "coep/corpus/dataset.hpp"

namespace coep {

/// Malformed or missing corpus file.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RawTriple {
  std::string head;
  std::string relation;
  std::string tail;
};

using Story = std::vector<std::string>;

// inferential.jsonl: {"head": str, "relation": str, "tail": str}
std::vector<InferentialTriple> read_inferential(const std::filesystem::path& path);
void write_inferential(const std::filesystem::path& path, const std::vector<InferentialTriple>& triples);

// sequential.jsonl: raw {"head","relation","tail"} rows are normalized on
// read; {"preceding","future"} rows pass through unchanged.
std::vector<SequentialPair> read_sequential(const std::filesystem::path& path,
                                            SkipCounter* skipped = nullptr);
void write_sequential_raw(const std::filesystem::path& path, const std::vector<RawTriple>& triples);
void write_sequential_normalized(const std::filesystem::path& path,
                                 const std::vector<SequentialPair>& pairs);

// stories.jsonl: {"events": [str, ...]}
std::vector<Story> read_stories(const std::filesystem::path& path);
void write_stories(const std::filesystem::path& path, const std::vector<Story>& stories);

}  // namespace coep
