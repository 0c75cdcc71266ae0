#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cvtslr {

using Shape = std::vector<std::size_t>;

std::size_t numel_of(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tensor;

// View handed to an operation's backward closure. Input gradients are
// nullptr for inputs that do not require a gradient.
class BackwardContext {
 public:
  std::span<const double> out_grad() const { return out_grad_; }
  std::span<const double> out_values() const { return out_values_; }
  std::size_t num_inputs() const { return inputs_.size(); }
  std::span<const double> input(std::size_t i) const { return inputs_[i]; }
  const Shape& input_shape(std::size_t i) const { return *input_shapes_[i]; }
  std::vector<double>* input_grad(std::size_t i) const { return input_grads_[i]; }

 private:
  friend class Tensor;
  std::span<const double> out_grad_;
  std::span<const double> out_values_;
  std::vector<std::span<const double>> inputs_;
  std::vector<const Shape*> input_shapes_;
  std::vector<std::vector<double>*> input_grads_;
};

using BackwardFn = std::function<void(const BackwardContext&)>;

namespace detail {
struct Node;
}

// Dense row-major double tensor. Copies share the underlying node, so a
// Tensor behaves like a handle; parameters are leaves held by several owners.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value);

  // Records an operation result. When grad mode is off or no input needs a
  // gradient, the result is a plain constant and `backward_fn` is dropped.
  static Tensor from_op(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                        BackwardFn backward_fn);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  // Negative indices count from the end.
  std::size_t dim(int axis) const;
  std::size_t numel() const;

  std::span<const double> values() const;
  // Only leaves may be written in place (parameter updates, checkpoint load).
  std::span<double> mutable_values();
  double item() const;
  double at(std::size_t flat_index) const { return values()[flat_index]; }

  bool requires_grad() const;
  bool is_leaf() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  // Reverse-mode sweep from a single-element tensor. Leaves accumulate.
  void backward();

  Tensor detach() const;
  bool same_node(const Tensor& other) const { return node_ == other.node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

bool grad_enabled();

// Disables graph recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace cvtslr
