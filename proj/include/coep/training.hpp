#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "coep/numerics/adamw.hpp"
#include "coep/numerics/autograd.hpp"

namespace coep {

/// A scalar objective with named components. The total is the sum of the
/// components.
class LossValue {
 public:
  LossValue() = default;
  LossValue(std::string name, Var term);

  void add(const std::string& name, Var term);
  /// Adds every component of `other` under its own name.
  void merge(const LossValue& other);

  Var total() const;
  double value() const;
  double part(const std::string& name) const;
  bool has(const std::string& name) const;
  std::map<std::string, double> parts() const;
  const std::vector<std::pair<std::string, Var>>& terms() const { return terms_; }

 private:
  std::vector<std::pair<std::string, Var>> terms_;
};

/// Mean of per-example component Vars under one name (empty -> absent).
Var mean_of(std::span<const Var> terms);

/// One line of a training log.
struct TrainRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  std::map<std::string, double> values;

  std::string to_json() const;
};

using TrainLog = std::vector<TrainRecord>;

struct TrainConfig {
  std::size_t epochs = 5;
  std::size_t batch_size = 32;
  /// Stops after this many optimizer steps; 0 runs every epoch.
  std::size_t max_steps = 0;
  AdamWConfig optimizer;
  std::uint64_t seed = 7;
  std::function<void(const TrainRecord&)> on_record;
};

/// A seeded permutation of 0..n-1 (Fisher-Yates on Rng::below).
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed);

/// Mean of each window-sized block of a series (the last partial block is
/// kept).
std::vector<double> block_means(std::span<const double> series, std::size_t window);

}  // namespace coep
