#include "coep/numerics/adamw.hpp"

#include <cmath>

namespace coep {

double global_grad_norm(std::span<Parameter* const> params) {
  double s = 0.0;
  for (const Parameter* p : params) {
    if (!p->updatable() || !p->tensor().has_grad()) continue;
    for (float g : p->tensor().grad()) s += static_cast<double>(g) * g;
  }
  return std::sqrt(s);
}

void AdamW::step(std::span<Parameter* const> params) {
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double bc1 = 1.0 - std::pow(config_.beta1, t);
  const double bc2 = 1.0 - std::pow(config_.beta2, t);

  double clip = 1.0;
  if (config_.clip_norm > 0.0) {
    const double norm = global_grad_norm(params);
    if (norm > config_.clip_norm) clip = config_.clip_norm / norm;
  }

  for (Parameter* p : params) {
    if (!p->updatable() || !p->tensor().has_grad()) continue;
    auto data = p->tensor().data();
    const auto grad = p->tensor().grad();
    Moments& mo = state_[p];
    if (mo.m.empty()) {
      mo.m.assign(data.size(), 0.0);
      mo.v.assign(data.size(), 0.0);
    }
    const double decay = 1.0 - config_.lr * config_.weight_decay;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double g = static_cast<double>(grad[i]) * clip;
      mo.m[i] = config_.beta1 * mo.m[i] + (1.0 - config_.beta1) * g;
      mo.v[i] = config_.beta2 * mo.v[i] + (1.0 - config_.beta2) * g * g;
      const double mhat = mo.m[i] / bc1;
      const double vhat = mo.v[i] / bc2;
      double w = static_cast<double>(data[i]) * decay;
      w -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
      data[i] = static_cast<float>(w);
    }
  }
}

}  // namespace coep
