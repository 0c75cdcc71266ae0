#include "cvtslr/tensor.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

#include "cvtslr/error.hpp"

namespace cvtslr {

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;
  bool requires_grad = false;
  bool interior = false;
  bool consumed = false;
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward_fn;

  std::vector<double>& grad_buffer() {
    if (grad.empty()) grad.assign(values.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

namespace {

thread_local bool g_grad_enabled = true;

void check_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) fail(ErrorCode::kNonFinite, std::string(what) + " produced a non-finite value");
  }
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

std::size_t numel_of(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ')';
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  for (std::size_t d : shape) {
    if (d == 0) fail(ErrorCode::kDimensionMismatch, "zero-sized dimension in shape " + shape_str(shape));
  }
  if (numel_of(shape) != values.size()) {
    fail(ErrorCode::kDimensionMismatch, "shape " + shape_str(shape) + " does not match " +
                                            std::to_string(values.size()) + " values");
  }
  check_finite(values, "tensor construction");
  node_ = std::make_shared<detail::Node>();
  node_->shape = std::move(shape);
  node_->values = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = numel_of(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

Tensor Tensor::from_op(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                       BackwardFn backward_fn) {
  Tensor out(std::move(shape), std::move(values));
  if (!g_grad_enabled) return out;
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (!any) return out;
  auto& node = *out.node_;
  node.requires_grad = true;
  node.interior = true;
  node.backward_fn = std::move(backward_fn);
  node.inputs.reserve(inputs.size());
  for (auto& in : inputs) node.inputs.push_back(in.node_);
  return out;
}

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::dim(int axis) const {
  const int r = static_cast<int>(rank());
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) fail(ErrorCode::kDimensionMismatch, "axis out of range for shape " + shape_str(shape()));
  return node_->shape[static_cast<std::size_t>(a)];
}

std::size_t Tensor::numel() const { return node_->values.size(); }

std::span<const double> Tensor::values() const { return node_->values; }

std::span<double> Tensor::mutable_values() {
  if (node_->interior) fail(ErrorCode::kShapeMismatch, "in-place write to a non-leaf tensor");
  return node_->values;
}

double Tensor::item() const {
  if (numel() != 1) fail(ErrorCode::kNotScalar, "item() on tensor of shape " + shape_str(shape()));
  return node_->values[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::is_leaf() const { return !node_->interior; }
bool Tensor::has_grad() const { return !node_->grad.empty(); }

std::span<const double> Tensor::grad() const { return node_->grad; }

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return Tensor(node_->shape, node_->values); }

void Tensor::backward() {
  if (numel() != 1) fail(ErrorCode::kNotScalar, "backward() from tensor of shape " + shape_str(shape()));
  if (node_->consumed) fail(ErrorCode::kGraphConsumed, "backward() already ran through this graph");
  if (!node_->requires_grad) return;

  // Iterative post-order DFS; `order` ends up inputs-before-outputs.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (node->consumed) fail(ErrorCode::kGraphConsumed, "graph node was released by an earlier backward()");
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->grad_buffer()[0] += 1.0;
  BackwardContext ctx;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (!node->interior || node->grad.empty()) continue;
    ctx.out_grad_ = node->grad;
    ctx.out_values_ = node->values;
    ctx.inputs_.clear();
    ctx.input_shapes_.clear();
    ctx.input_grads_.clear();
    for (auto& in : node->inputs) {
      ctx.inputs_.emplace_back(in->values);
      ctx.input_shapes_.push_back(&in->shape);
      ctx.input_grads_.push_back(in->requires_grad ? &in->grad_buffer() : nullptr);
    }
    node->backward_fn(ctx);
  }

  for (detail::Node* node : order) {
    if (node->interior) {
      node->inputs.clear();
      node->backward_fn = nullptr;
      node->grad.clear();
      node->grad.shrink_to_fit();
      node->consumed = true;
    } else {
      check_finite(node->grad, "backward()");
    }
  }
}

}  // namespace cvtslr
