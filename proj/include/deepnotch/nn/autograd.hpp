#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "deepnotch/nn/tensor.hpp"

namespace deepnotch::nn {

struct Node;

// Handle to a node of the reverse-mode tape. Copies share the node.
class Var {
 public:
  Var() = default;

  // Leaf value; when requires_grad is set, backward() accumulates into grad().
  static Var leaf(Tensor value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const;
  Tensor& mutable_value();
  const Shape& shape() const { return value().shape(); }

  bool requires_grad() const;
  bool has_grad() const;
  const Tensor& grad() const;
  void zero_grad();

  // Name of the operation that produced this value ("leaf" for leaves).
  const std::string& op_name() const;
  std::vector<Var> parents() const;

  // Propagates gradients to every reachable leaf that requires them. The
  // no-argument form seeds a scalar output with 1.
  void backward();
  void backward(const Tensor& seed);

  Node* node() const { return node_.get(); }

 private:
  friend Var make_op_result(Tensor, std::string, std::vector<Var>, std::function<void(Node&)>);
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;
};

struct Node {
  Tensor value;
  Tensor grad;  // empty until first accumulation
  bool requires_grad = false;
  std::string op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  // Lazily allocates grad with the value's shape.
  Tensor& grad_buffer();
};

// Creates the result node of an operation. Parents and the backward closure
// are dropped when no parent requires a gradient or grad mode is disabled.
Var make_op_result(Tensor value, std::string op, std::vector<Var> parents,
                   std::function<void(Node&)> backward_fn);

bool grad_enabled();

// Disables tape recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace deepnotch::nn
