#include "coep/numerics/autograd.hpp"

#include <unordered_set>

#include "coep/numerics/errors.hpp"

namespace coep {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }

NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var make_result(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->leaf = false;
  if (g_grad_enabled) {
    bool any = false;
    for (const Var& in : inputs) {
      if (in.requires_grad()) {
        any = true;
        break;
      }
    }
    if (any) {
      node->requires_grad = true;
      node->inputs.reserve(inputs.size());
      for (Var& in : inputs) node->inputs.push_back(in.ptr());
      node->backward = std::move(backward);
    }
  }
  return Var(std::move(node));
}

void backward(const Var& loss) {
  if (!loss.defined()) throw GradientError("backward on undefined value");
  if (loss.value().numel() != 1) {
    throw GradientError("backward requires a scalar loss, got " + shape_str(loss.shape()));
  }
  Node* root = &loss.node();
  if (root->consumed) {
    throw GradientError("backward called twice on the same graph (double accumulation)");
  }
  if (!root->requires_grad) {
    // Constant loss: nothing reachable, every gradient stays zero.
    if (!root->leaf) root->consumed = true;
    return;
  }

  // Iterative post-order DFS gives the tape in topological order.
  std::vector<Node*> tape;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (node->consumed) {
      throw GradientError("graph was already released by an earlier backward pass");
    }
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
      continue;
    }
    tape.push_back(node);
    stack.pop_back();
  }

  root->value.ensure_grad()[0] += 1.0f;
  for (auto it = tape.rbegin(); it != tape.rend(); ++it) {
    Node* node = *it;
    if (node->backward && node->value.has_grad()) node->backward(*node);
  }
  for (Node* node : tape) {
    if (node->leaf) continue;
    node->consumed = true;
    node->inputs.clear();
    node->backward = nullptr;
  }
}

Parameter::Parameter(std::string name, Tensor value)
    : name_(std::move(name)), var_(std::move(value), true) {}

void Parameter::set_trainable(bool trainable) {
  trainable_ = trainable;
  sync();
}

void Parameter::set_frozen(bool frozen) {
  frozen_ = frozen;
  sync();
}

void Parameter::sync() {
  var_.node().requires_grad = updatable();
  if (!updatable()) var_.value().reset_grad();
}

Parameter& ParameterSet::add(std::string name, Tensor value) {
  if (find(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  params_.push_back(std::make_unique<Parameter>(std::move(name), std::move(value)));
  return *params_.back();
}

Parameter* ParameterSet::find(const std::string& name) {
  for (auto& p : params_) {
    if (p->name() == name) return p.get();
  }
  return nullptr;
}

const Parameter* ParameterSet::find(const std::string& name) const {
  for (const auto& p : params_) {
    if (p->name() == name) return p.get();
  }
  return nullptr;
}

Parameter& ParameterSet::at(const std::string& name) {
  Parameter* p = find(name);
  if (!p) throw std::out_of_range("no parameter named " + name);
  return *p;
}

std::vector<Parameter*> ParameterSet::all() const {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<Parameter*> ParameterSet::with_prefix(const std::string& prefix) const {
  std::vector<Parameter*> out;
  for (const auto& p : params_) {
    if (p->name().starts_with(prefix)) out.push_back(p.get());
  }
  return out;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->tensor().numel();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

void ParameterSet::set_frozen_prefix(const std::string& prefix, bool frozen) {
  for (Parameter* p : with_prefix(prefix)) p->set_frozen(frozen);
}

}  // namespace coep
