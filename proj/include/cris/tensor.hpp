#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cris {

// Error taxonomy shared by the whole library. The CLI maps these onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class ShapeError : public Error {
 public:
  using Error::Error;
};
class NumericError : public Error {
 public:
  using Error::Error;
};
class DataError : public Error {
 public:
  using Error::Error;
};
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Extents of a rank-0..4 array. Rank 0 is a scalar holding one element.
class Shape {
 public:
  static constexpr int kMaxRank = 4;

  Shape() = default;
  Shape(std::initializer_list<int> dims);
  explicit Shape(std::span<const int> dims);

  int rank() const { return rank_; }
  int operator[](int axis) const { return dims_[static_cast<std::size_t>(axis)]; }
  std::size_t numel() const;
  std::span<const int> dims() const { return {dims_.data(), static_cast<std::size_t>(rank_)}; }
  std::string str() const;

  bool operator==(const Shape& other) const;

 private:
  std::array<int, kMaxRank> dims_{};
  int rank_ = 0;
};

/// Dense row-major float64 array with value semantics.
class Array {
 public:
  Array() = default;
  explicit Array(Shape shape, double fill = 0.0);
  Array(Shape shape, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  const std::vector<double>& vec() const { return data_; }
  std::vector<double>& vec() { return data_; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  // Reinterprets the same elements under a new shape of equal size.
  Array reshaped(Shape shape) const;

 private:
  Shape shape_;
  std::vector<double> data_;
};

namespace detail {

struct Node {
  Array value;
  std::vector<double> grad;  // sized lazily; always value.size() once touched
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;  // reads this->grad, accumulates into parents

  std::vector<double>& grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

/// Handle to a value in the autograd graph. Copies share the same node, so a
/// parameter tensor captured by many graphs accumulates its gradient in one place.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Array value, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t size() const { return node_->value.size(); }
  const Array& value() const { return node_->value; }
  Array& mutable_value() { return node_->value; }
  std::span<const double> data() const { return node_->value.data(); }
  double item() const;
  double at(std::size_t i) const { return node_->value[i]; }

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  // Gradient view; an all-zero buffer is created on first access.
  std::span<double> grad() const { return node_->grad_buffer(); }
  void zero_grad() const;

  /// Reverse pass from a scalar. Leaf gradients accumulate across calls.
  void backward() const;

  // A new leaf holding a copy of this value, cut from the graph.
  Tensor detach() const { return Tensor(value(), false); }

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }
  static Tensor from_node(std::shared_ptr<detail::Node> node);

 private:
  std::shared_ptr<detail::Node> node_;
};

/// While alive on a thread, ops on that thread record no graph (inference mode).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Builds an op result. When any input requires grad the node is wired into
/// the graph with `backward`; otherwise it is a constant. Non-finite values throw.
Tensor make_result(Array value, std::initializer_list<const Tensor*> inputs,
                   std::function<void(detail::Node&)> backward);
Tensor make_result(Array value, const std::vector<Tensor>& inputs,
                   std::function<void(detail::Node&)> backward);

void check_finite(std::span<const double> values, const char* where);

}  // namespace cris
