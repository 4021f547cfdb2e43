#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace qgen::ad {

// Extents of a dense row-major tensor. Rank 0 with one element is a scalar.
using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  // Persistent accumulator: present iff requires_grad and the node took part
  // in a loss that was differentiated. Survives across backward calls.
  std::optional<std::vector<double>> grad;
  // Pass-local adjoint buffer, valid only while adj_pass matches the pass id
  // of the backward sweep that is running.
  std::vector<double> adj;
  std::uint64_t adj_pass = 0;
};

}  // namespace detail

class Tape;

// Handle to a dense f64 tensor. Copies share the underlying node, so a
// Tensor behaves like a reference into the recorded computation.
class Tensor {
 public:
  Tensor() = default;

  static Tensor make(Shape shape, std::vector<double> data, bool requires_grad);
  static Tensor zeros(Shape shape);
  static Tensor ones(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor from(Shape shape, std::vector<double> data);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->data.size(); }
  std::size_t extent(std::size_t axis) const { return node_->shape[axis]; }
  std::size_t rows() const { return node_->shape[0]; }
  std::size_t cols() const { return node_->shape[1]; }

  const std::vector<double>& data() const { return node_->data; }
  std::vector<double>& data() { return node_->data; }
  double value() const;
  double at(std::size_t i) const { return node_->data[i]; }
  double at(std::size_t i, std::size_t j) const {
    return node_->data[i * node_->shape[1] + j];
  }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool rg) { node_->requires_grad = rg; }
  bool has_grad() const { return node_->grad.has_value(); }
  const std::vector<double>& grad() const;
  void zero_grad() { node_->grad.reset(); }

  detail::Node* node() const { return node_.get(); }
  std::shared_ptr<detail::Node> shared_node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

// Ordered record of executed differentiable operations. Ops are appended in
// execution order, so walking the record backwards visits every operation
// exactly once in reverse topological order.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // The tape ops record onto, or nullptr when no TapeScope is active.
  static Tape* current();

  using BackwardFn = std::function<void(Tape&, const std::vector<double>&)>;
  void record(std::shared_ptr<detail::Node> output, BackwardFn fn);

  std::size_t size() const { return entries_.size(); }
  void clear();

  // Accumulates d(loss)/d(tensor) into .grad for every requires_grad tensor
  // reachable from the loss. Repeated calls keep accumulating.
  void backward(const Tensor& loss);

  // Pass-local adjoint of a node, created zeroed on first touch.
  std::vector<double>& adj(detail::Node& n);

 private:
  const std::vector<double>* adj_if_any(const detail::Node& n) const;

  struct Entry {
    std::shared_ptr<detail::Node> output;
    BackwardFn fn;
  };
  std::vector<Entry> entries_;
  std::vector<detail::Node*> touched_;
  std::uint64_t pass_ = 0;
};

// Makes a tape current for the enclosing scope. Scopes nest.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

// Test hook: scales every tanh adjoint, letting negative-control tests verify
// that the finite-difference checker actually catches a wrong derivative.
void set_tanh_adjoint_skew(double factor);
double tanh_adjoint_skew();

}  // namespace qgen::ad
