#include "ptts/autodiff/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace ptts::ad {

namespace {
thread_local bool g_no_grad = false;
}

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

ShapeError::ShapeError(const std::string& primitive, const Shape& a, const Shape& b)
    : std::invalid_argument(primitive + ": incompatible shapes " + to_string(a) + " and " +
                            to_string(b)) {}

ShapeError::ShapeError(const std::string& primitive, const std::string& detail)
    : std::invalid_argument(primitive + ": " + detail) {}

NonFiniteError::NonFiniteError(const std::string& primitive)
    : std::runtime_error("non-finite value produced by primitive '" + primitive + "'"),
      primitive_(primitive) {}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
  if (ad::numel(shape) != data.size()) {
    throw ShapeError("tensor", "shape " + to_string(shape) + " does not hold " +
                                   std::to_string(data.size()) + " values");
  }
  for (double v : data) {
    if (!std::isfinite(v)) throw NonFiniteError("leaf");
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = ad::numel(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from(Shape{}, {value}, requires_grad);
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item", "tensor of shape " + to_string(shape()) + " is not scalar");
  return node_->data[0];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  if (rank() != 2) throw ShapeError("at", "expected rank 2, got " + to_string(shape()));
  return node_->data.at(r * node_->shape[1] + c);
}

void Tensor::zero_grad() { node_->grad.clear(); }

std::span<double> Tensor::mutable_data() {
  if (!is_leaf()) throw GraphError("mutable_data: only leaf tensors may be modified in place");
  return node_->data;
}

Tensor Tensor::make_result(std::string op, Shape shape, std::vector<double> data,
                           std::vector<Tensor> inputs, BackwardFn backward) {
  for (double v : data) {
    if (!std::isfinite(v)) throw NonFiniteError(op);
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->op = std::move(op);

  bool needs = false;
  if (!g_no_grad && backward) {
    for (const auto& in : inputs) needs = needs || in.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (auto& in : inputs) node->inputs.push_back(in.node_);
    node->backward = std::move(backward);
    Graph::current().record(node);
  }
  return Tensor(std::move(node));
}

Graph& Graph::current() {
  thread_local Graph graph;
  return graph;
}

void Graph::record(std::shared_ptr<Node> node) { tape_.push_back(std::move(node)); }

void Graph::reset() {
  tape_.clear();
  consumed_ = false;
}

void Graph::backward(const Tensor& loss, bool retain_graph) {
  if (!loss.defined() || loss.numel() != 1) {
    throw GraphError("backward: loss must be a scalar, got shape " +
                     (loss.defined() ? to_string(loss.shape()) : std::string("<undefined>")));
  }
  if (tape_.empty() || !loss.requires_grad()) {
    throw GraphError("backward: loss is not connected to any recorded primitive");
  }
  if (consumed_) {
    throw GraphError("backward: graph already consumed; call reset() before another backward");
  }

  for (auto& node : tape_) node->grad.clear();
  loss.node()->grad.assign(1, 1.0);

  std::vector<std::vector<double>*> in_grads;
  for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) {
    Node& node = **it;
    if (node.grad.empty()) continue;
    in_grads.clear();
    for (auto& in : node.inputs) {
      if (!in->requires_grad) {
        in_grads.push_back(nullptr);
        continue;
      }
      if (in->grad.empty()) in->grad.assign(in->data.size(), 0.0);
      in_grads.push_back(&in->grad);
    }
    node.backward(node.grad, in_grads);
  }
  if (!retain_graph) consumed_ = true;
}

void backward(const Tensor& loss, BackwardOptions options) {
  Graph::current().backward(loss, options.retain_graph);
}

NoGradGuard::NoGradGuard() : previous_(g_no_grad) { g_no_grad = true; }
NoGradGuard::~NoGradGuard() { g_no_grad = previous_; }
bool NoGradGuard::enabled() { return g_no_grad; }

}  // namespace ptts::ad
