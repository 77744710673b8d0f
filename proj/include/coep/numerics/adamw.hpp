#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "coep/numerics/autograd.hpp"

namespace coep {

struct AdamWConfig {
  double lr = 1e-5;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Global gradient-norm clip; <= 0 disables.
  double clip_norm = 0.0;
};

/// Adam with decoupled weight decay. Parameters that are frozen, untrainable
/// or carry no gradient are left untouched (no decay either).
class AdamW {
 public:
  explicit AdamW(AdamWConfig config = {}) : config_(config) {}

  void step(std::span<Parameter* const> params);

  const AdamWConfig& config() const { return config_; }
  AdamWConfig& config() { return config_; }
  std::uint64_t steps() const { return steps_; }

 private:
  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
  };

  AdamWConfig config_;
  std::uint64_t steps_ = 0;
  std::unordered_map<const Parameter*, Moments> state_;
};

double global_grad_norm(std::span<Parameter* const> params);

}  // namespace coep
