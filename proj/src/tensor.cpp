#include "qgen/tensor.hpp"

#include <atomic>

#include "qgen/error.hpp"

namespace qgen::ad {

namespace {
thread_local Tape* g_current_tape = nullptr;
std::atomic<std::uint64_t> g_pass_counter{0};
double g_tanh_skew = 1.0;
}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor Tensor::make(Shape shape, std::vector<double> data, bool requires_grad) {
  if (numel(shape) != data.size()) {
    throw ShapeError("tensor: shape " + shape_str(shape) + " does not hold " +
                     std::to_string(data.size()) + " values");
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape) {
  const std::size_t n = numel(shape);
  return make(std::move(shape), std::vector<double>(n, 0.0), false);
}

Tensor Tensor::ones(Shape shape) {
  const std::size_t n = numel(shape);
  return make(std::move(shape), std::vector<double>(n, 1.0), false);
}

Tensor Tensor::full(Shape shape, double value) {
  const std::size_t n = numel(shape);
  return make(std::move(shape), std::vector<double>(n, value), false);
}

Tensor Tensor::scalar(double value) { return make({}, {value}, false); }

Tensor Tensor::from(Shape shape, std::vector<double> data) {
  return make(std::move(shape), std::move(data), false);
}

double Tensor::value() const {
  if (node_->data.size() != 1) {
    throw ContractError("value(): tensor " + shape_str(node_->shape) +
                        " is not a scalar");
  }
  return node_->data[0];
}

const std::vector<double>& Tensor::grad() const {
  if (!node_->grad) {
    throw ContractError("grad(): no gradient has been accumulated");
  }
  return *node_->grad;
}

Tape* Tape::current() { return g_current_tape; }

void Tape::record(std::shared_ptr<detail::Node> output, BackwardFn fn) {
  entries_.push_back(Entry{std::move(output), std::move(fn)});
}

void Tape::clear() {
  entries_.clear();
  touched_.clear();
}

std::vector<double>& Tape::adj(detail::Node& n) {
  if (n.adj_pass != pass_) {
    n.adj.assign(n.data.size(), 0.0);
    n.adj_pass = pass_;
    touched_.push_back(&n);
  }
  return n.adj;
}

const std::vector<double>* Tape::adj_if_any(const detail::Node& n) const {
  return n.adj_pass == pass_ ? &n.adj : nullptr;
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward: loss must be a scalar tensor");
  }
  pass_ = ++g_pass_counter;
  touched_.clear();

  adj(*loss.node())[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    const std::vector<double>* g = adj_if_any(*it->output);
    if (g) it->fn(*this, *g);
  }
  for (detail::Node* n : touched_) {
    if (!n->requires_grad) continue;
    if (!n->grad) n->grad.emplace(n->data.size(), 0.0);
    for (std::size_t i = 0; i < n->adj.size(); ++i) (*n->grad)[i] += n->adj[i];
  }
}

TapeScope::TapeScope(Tape& tape) : previous_(g_current_tape) {
  g_current_tape = &tape;
}

TapeScope::~TapeScope() { g_current_tape = previous_; }

void set_tanh_adjoint_skew(double factor) { g_tanh_skew = factor; }
double tanh_adjoint_skew() { return g_tanh_skew; }

}  // namespace qgen::ad
