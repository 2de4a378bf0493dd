#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ptts::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Raised when operand shapes do not conform for a primitive.
class ShapeError : public std::invalid_argument {
 public:
  ShapeError(const std::string& primitive, const Shape& a, const Shape& b);
  ShapeError(const std::string& primitive, const std::string& detail);
};

/// Raised when a primitive produces NaN or Inf.
class NonFiniteError : public std::runtime_error {
 public:
  explicit NonFiniteError(const std::string& primitive);
  const std::string& primitive() const noexcept { return primitive_; }

 private:
  std::string primitive_;
};

/// Misuse of the differentiation graph (non-scalar loss, double backward...).
class GraphError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Backward closure of a primitive. `in_grads[i]` is null when input i does
// not take a gradient; otherwise it is a zero-initialized (or partially
// accumulated) buffer the closure adds into.
using BackwardFn = std::function<void(std::span<const double> out_grad,
                                      std::span<std::vector<double>* const> in_grads)>;

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  std::string op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward;
};

/// Handle to a node of the differentiation graph. Copies share the node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->data.size(); }
  std::span<const double> data() const { return node_->data; }
  double item() const;
  double at(std::size_t i) const { return node_->data.at(i); }
  double at(std::size_t r, std::size_t c) const;

  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return node_->op == "leaf"; }
  const std::string& op() const { return node_->op; }

  // Populated after backward; empty span when no gradient reached this tensor.
  std::span<const double> grad() const { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  void zero_grad();

  // Leaf-only in-place access for optimizers and perturbation probes.
  std::span<double> mutable_data();

  const Node* id() const noexcept { return node_.get(); }
  const std::shared_ptr<Node>& node() const noexcept { return node_; }

  /// Record a primitive's result. The output takes a gradient when any input
  /// does and gradient recording is enabled. Throws NonFiniteError on NaN/Inf.
  static Tensor make_result(std::string op, Shape shape, std::vector<double> data,
                            std::vector<Tensor> inputs, BackwardFn backward);

 private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;
};

/// Ordered record of executed primitives for the current thread.
class Graph {
 public:
  static Graph& current();

  void record(std::shared_ptr<Node> node);
  std::size_t size() const noexcept { return tape_.size(); }
  bool empty() const noexcept { return tape_.empty(); }
  bool consumed() const noexcept { return consumed_; }
  const std::vector<std::shared_ptr<Node>>& tape() const noexcept { return tape_; }

  // Drops the tape and re-arms backward.
  void reset();

  void backward(const Tensor& loss, bool retain_graph);

 private:
  std::vector<std::shared_ptr<Node>> tape_;
  bool consumed_ = false;
};

struct BackwardOptions {
  // Keep the graph usable for another backward (e.g. the generator pass after
  // a discriminator pass within one training step).
  bool retain_graph = false;
};

/// Reverse sweep from a scalar loss. Leaf gradients accumulate; a second
/// call on the same graph without reset() or retain_graph throws GraphError.
void backward(const Tensor& loss, BackwardOptions options = {});

/// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

  static bool enabled();

 private:
  bool previous_;
};

}  // namespace ptts::ad
