#include "deepnotch/nn/autograd.hpp"

#include <unordered_set>

#include "deepnotch/errors.hpp"

namespace deepnotch::nn {

namespace {

thread_local bool t_grad_enabled = true;

void check_finite(const Tensor& t, const std::string& op, const char* phase) {
#ifndef NDEBUG
  if (!t.all_finite()) {
    throw NumericError("non-finite value in " + std::string(phase) + " of op '" + op + "'");
  }
#else
  (void)t;
  (void)op;
  (void)phase;
#endif
}

}  // namespace

Tensor& Node::grad_buffer() {
  if (grad.empty() && value.numel() > 0) grad = Tensor(value.shape());
  return grad;
}

Var Var::leaf(Tensor value, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  return Var(std::move(node));
}

const Tensor& Var::value() const {
  if (!node_) throw ContractError("access to undefined Var");
  return node_->value;
}

Tensor& Var::mutable_value() {
  if (!node_) throw ContractError("access to undefined Var");
  return node_->value;
}

bool Var::requires_grad() const { return node_ && node_->requires_grad; }

bool Var::has_grad() const { return node_ && !node_->grad.empty(); }

const Tensor& Var::grad() const {
  if (!node_) throw ContractError("access to undefined Var");
  return node_->grad;
}

void Var::zero_grad() {
  if (node_ && !node_->grad.empty()) node_->grad.fill(0.0f);
}

const std::string& Var::op_name() const {
  if (!node_) throw ContractError("access to undefined Var");
  return node_->op;
}

std::vector<Var> Var::parents() const {
  std::vector<Var> out;
  if (!node_) return out;
  for (const auto& p : node_->parents) out.push_back(Var(p));
  return out;
}

void Var::backward() {
  if (value().numel() != 1) {
    throw ContractError("backward() without a seed needs a scalar output, got " + shape_str(shape()));
  }
  backward(Tensor(shape(), 1.0f));
}

void Var::backward(const Tensor& seed) {
  require_same_shape(value(), seed, "backward seed");
  if (!node_->requires_grad) return;

  // Iterative post-order DFS; parent order is fixed so the traversal is
  // deterministic.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  Tensor& g = node_->grad_buffer();
  for (std::size_t i = 0; i < g.numel(); ++i) g[i] += seed[i];

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && !n->grad.empty()) {
      n->backward_fn(*n);
      for (const auto& p : n->parents) {
        if (p->requires_grad && !p->grad.empty()) check_finite(p->grad, n->op, "backward");
      }
    }
  }
}

Var make_op_result(Tensor value, std::string op, std::vector<Var> parents,
                   std::function<void(Node&)> backward_fn) {
  check_finite(value, op, "forward");
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = std::move(op);
  bool any = false;
  for (const auto& p : parents) any = any || p.requires_grad();
  if (any && t_grad_enabled) {
    node->requires_grad = true;
    for (auto& p : parents) node->parents.push_back(p.node_);
    node->backward_fn = std::move(backward_fn);
  } else {
    // Keep the structural record of inputs so graphs can be inspected even
    // when no gradient flows.
    for (auto& p : parents) node->parents.push_back(p.node_);
  }
  return Var(std::move(node));
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }

NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

}  // namespace deepnotch::nn
