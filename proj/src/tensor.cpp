#include "cris/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>
#include <utility>

namespace cris {

Shape::Shape(std::initializer_list<int> dims) : Shape(std::span<const int>(dims.begin(), dims.size())) {}

Shape::Shape(std::span<const int> dims) {
  if (dims.size() > static_cast<std::size_t>(kMaxRank)) {
    throw ShapeError("rank " + std::to_string(dims.size()) + " exceeds 4");
  }
  rank_ = static_cast<int>(dims.size());
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (dims[i] <= 0) throw ShapeError("non-positive extent in shape");
    dims_[i] = dims[i];
  }
}

std::size_t Shape::numel() const {
  std::size_t n = 1;
  for (int i = 0; i < rank_; ++i) n *= static_cast<std::size_t>(dims_[static_cast<std::size_t>(i)]);
  return n;
}

std::string Shape::str() const {
  std::ostringstream os;
  os << '[';
  for (int i = 0; i < rank_; ++i) os << (i ? "x" : "") << (*this)[i];
  os << ']';
  return os.str();
}

bool Shape::operator==(const Shape& other) const {
  if (rank_ != other.rank_) return false;
  for (int i = 0; i < rank_; ++i)
    if ((*this)[i] != other[i]) return false;
  return true;
}

Array::Array(Shape shape, double fill) : shape_(shape), data_(shape.numel(), fill) {}

Array::Array(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.numel()) {
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " + shape_.str());
  }
}

Array Array::reshaped(Shape shape) const {
  if (shape.numel() != data_.size()) {
    throw ShapeError("cannot reshape " + shape_.str() + " to " + shape.str());
  }
  return Array(shape, data_);
}

void check_finite(std::span<const double> values, const char* where) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite value produced by ") + where);
  }
}

Tensor::Tensor(Array value, bool requires_grad) : node_(std::make_shared<detail::Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
  if (requires_grad) node_->grad_buffer();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return Tensor(Array(shape), requires_grad); }

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
  return Tensor(Array(shape, std::move(data)), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) { return Tensor(Array(Shape{}, v), requires_grad); }

Tensor Tensor::from_node(std::shared_ptr<detail::Node> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on tensor of shape " + shape().str());
  return node_->value[0];
}

void Tensor::zero_grad() const {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tensor::backward() const {
  if (size() != 1) throw ShapeError("backward() requires a scalar loss, got " + shape().str());
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order with the root last.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Interior gradients are recomputed per pass; leaves accumulate.
  for (detail::Node* n : order) {
    if (n->backward) n->grad.assign(n->value.size(), 0.0);
  }
  node_->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backward) n->backward(*n);
  }
}

namespace {

thread_local bool t_grad_enabled = true;

}  // namespace

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

namespace {

Tensor wire(Array value, std::vector<std::shared_ptr<detail::Node>> parents,
            std::function<void(detail::Node&)> backward) {
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  node->requires_grad = t_grad_enabled && !parents.empty();
  if (node->requires_grad) {
    node->parents = std::move(parents);
    node->backward = std::move(backward);
  }
  return Tensor::from_node(std::move(node));
}

}  // namespace

Tensor make_result(Array value, std::initializer_list<const Tensor*> inputs,
                   std::function<void(detail::Node&)> backward) {
  check_finite(value.data(), "tensor op");
  std::vector<std::shared_ptr<detail::Node>> parents;
  bool any = false;
  for (const Tensor* t : inputs) any = any || (t->defined() && t->requires_grad());
  if (any) {
    for (const Tensor* t : inputs)
      if (t->defined()) parents.push_back(t->node_ptr());
  }
  return wire(std::move(value), std::move(parents), std::move(backward));
}

Tensor make_result(Array value, const std::vector<Tensor>& inputs,
                   std::function<void(detail::Node&)> backward) {
  check_finite(value.data(), "tensor op");
  std::vector<std::shared_ptr<detail::Node>> parents;
  bool any = false;
  for (const Tensor& t : inputs) any = any || t.requires_grad();
  if (any) {
    for (const Tensor& t : inputs) parents.push_back(t.node_ptr());
  }
  return wire(std::move(value), std::move(parents), std::move(backward));
}

}  // namespace cris
