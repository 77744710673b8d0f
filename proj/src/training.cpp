#include "coep/training.hpp"

#include <stdexcept>

#include "coep/numerics/ops.hpp"
#include "coep/numerics/rng.hpp"
#include "json.hpp"

namespace coep {

LossValue::LossValue(std::string name, Var term) { add(name, std::move(term)); }

void LossValue::add(const std::string& name, Var term) {
  if (has(name)) throw std::invalid_argument("loss component '" + name + "' added twice");
  if (term.value().numel() != 1) throw std::invalid_argument("loss component must be a scalar");
  terms_.emplace_back(name, std::move(term));
}

void LossValue::merge(const LossValue& other) {
  for (const auto& [name, term] : other.terms_) add(name, term);
}

Var LossValue::total() const {
  if (terms_.empty()) throw std::logic_error("empty loss");
  if (terms_.size() == 1) return terms_.front().second;
  std::vector<Var> vs;
  for (const auto& t : terms_) vs.push_back(t.second);
  return ops::add_n(vs);
}

double LossValue::value() const { return total().value().item(); }

double LossValue::part(const std::string& name) const {
  for (const auto& [n, t] : terms_) {
    if (n == name) return t.value().item();
  }
  throw std::out_of_range("no loss component '" + name + "'");
}

bool LossValue::has(const std::string& name) const {
  for (const auto& t : terms_) {
    if (t.first == name) return true;
  }
  return false;
}

std::map<std::string, double> LossValue::parts() const {
  std::map<std::string, double> out;
  for (const auto& [n, t] : terms_) out[n] = t.value().item();
  return out;
}

Var mean_of(std::span<const Var> terms) {
  if (terms.empty()) throw std::invalid_argument("mean_of: no terms");
  Var s = terms.size() == 1 ? terms.front() : ops::add_n(terms);
  return ops::scale(s, 1.0f / static_cast<float>(terms.size()));
}

std::string TrainRecord::to_json() const {
  nlohmann::ordered_json j;
  j["step"] = step;
  j["epoch"] = epoch;
  for (const auto& [k, v] : values) j[k] = v;
  return j.dump();
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  return idx;
}

std::vector<double> block_means(std::span<const double> series, std::size_t window) {
  if (window == 0) throw std::invalid_argument("block_means: window must be > 0");
  std::vector<double> out;
  for (std::size_t i = 0; i < series.size(); i += window) {
    const std::size_t end = std::min(series.size(), i + window);
    double s = 0;
    for (std::size_t k = i; k < end; ++k) s += series[k];
    out.push_back(s / static_cast<double>(end - i));
  }
  return out;
}

}  // namespace coep
