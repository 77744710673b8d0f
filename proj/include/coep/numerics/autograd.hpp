#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "coep/numerics/tensor.hpp"

namespace coep {

/// One recorded value in the computation graph. The gradient lives in the
/// grad slot of `value`.
struct Node {
  Tensor value;
  std::vector<std::shared_ptr<Node>> inputs;
  /// Propagates value.grad() into the inputs that require a gradient.
  std::function<void(Node&)> backward;
  bool requires_grad = false;
  bool leaf = true;
  bool consumed = false;
};

/// Handle to a graph node. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  Node& node() const { return *node_; }
  const std::shared_ptr<Node>& ptr() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Records gradients for ops created on this thread while true.
bool grad_enabled();

/// Disables graph recording within its scope (inference, oracles).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Creates the output node of an op. When any input requires a gradient and
/// recording is on, the node keeps its inputs and backward rule.
Var make_result(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward);

/// Reverse-mode pass from a scalar loss. Builds the tape (topological order
/// of reachable nodes requiring gradients), seeds d loss = 1, runs each rule
/// once in reverse and then releases the graph. A graph can be differentiated
/// once; a second call throws GradientError.
void backward(const Var& loss);

/// Trainable leaf with a unique name.
class Parameter {
 public:
  Parameter(std::string name, Tensor value);

  const std::string& name() const { return name_; }
  const Var& var() const { return var_; }
  Tensor& tensor() { return var_.value(); }
  const Tensor& tensor() const { return var_.value(); }

  bool trainable() const { return trainable_; }
  bool frozen() const { return frozen_; }
  void set_trainable(bool trainable);
  /// Frozen parameters collect no gradient and are skipped by the optimizer.
  void set_frozen(bool frozen);
  bool updatable() const { return trainable_ && !frozen_; }

  void zero_grad() { var_.value().reset_grad(); }

 private:
  void sync();

  std::string name_;
  Var var_;
  bool trainable_ = true;
  bool frozen_ = false;
};

/// Ordered owner of named parameters; addresses are stable.
class ParameterSet {
 public:
  Parameter& add(std::string name, Tensor value);
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  Parameter& at(const std::string& name);

  std::vector<Parameter*> all() const;
  std::vector<Parameter*> with_prefix(const std::string& prefix) const;
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  void zero_grad();
  void set_frozen_prefix(const std::string& prefix, bool frozen);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

}  // namespace coep
