#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "cgre/error.hpp"

namespace cgre {

class Tensor;

namespace detail {

struct Node;

// Thread-local switch consulted by every op when deciding whether to record
// itself on the tape.
inline bool& grad_mode_flag() {
  thread_local bool enabled = true;
  return enabled;
}

}  // namespace detail

// Dense row-major tensor of doubles. Copies share storage, and every public
// operation returns a fresh tensor, so values behave as immutable once built.
// Gradient buffers live beside the data; backward() fills them by walking the
// recorded tape in reverse topological order.
class Tensor {
 public:
  std::vector<int> shape;
  std::shared_ptr<std::vector<double>> data;
  std::shared_ptr<std::vector<double>> grad;  // allocated iff requires_grad
  bool requires_grad = false;
  std::shared_ptr<detail::Node> node;  // op provenance, null for leaves

  Tensor() = default;

  static Tensor zeros(std::vector<int> shape) {
    Tensor t;
    t.shape = std::move(shape);
    t.data = std::make_shared<std::vector<double>>(checked_numel(t.shape), 0.0);
    return t;
  }

  static Tensor full(std::vector<int> shape, double value) {
    Tensor t = zeros(std::move(shape));
    for (double& x : *t.data) x = value;
    return t;
  }

  static Tensor from(std::vector<int> shape, std::vector<double> values) {
    if (checked_numel(shape) != values.size())
      throw ShapeError("Tensor::from: " + shape_string(shape) + " does not hold " +
                       std::to_string(values.size()) + " values");
    Tensor t;
    t.shape = std::move(shape);
    t.data = std::make_shared<std::vector<double>>(std::move(values));
    return t;
  }

  static Tensor scalar(double v) { return from({1}, {v}); }

  static Tensor vec(std::vector<double> v) {
    int n = static_cast<int>(v.size());
    return from({n}, std::move(v));
  }

  static Tensor matrix(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw ShapeError("Tensor::matrix: no rows");
    int r = static_cast<int>(rows.size());
    int c = static_cast<int>(rows[0].size());
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(r) * c);
    for (const auto& row : rows) {
      if (static_cast<int>(row.size()) != c)
        throw ShapeError("Tensor::matrix: ragged rows");
      flat.insert(flat.end(), row.begin(), row.end());
    }
    return from({r, c}, std::move(flat));
  }

  bool defined() const { return static_cast<bool>(data); }
  int ndim() const { return static_cast<int>(shape.size()); }

  int dim(int i) const {
    if (i < 0 || i >= ndim()) throw ShapeError("Tensor::dim: axis out of range");
    return shape[static_cast<std::size_t>(i)];
  }

  std::size_t numel() const { return data ? data->size() : 0; }

  double& at(std::size_t i) { return (*data)[i]; }
  double at(std::size_t i) const { return (*data)[i]; }

  double& at(int i, int j) {
    return (*data)[static_cast<std::size_t>(i) * shape[1] + j];
  }
  double at(int i, int j) const {
    return (*data)[static_cast<std::size_t>(i) * shape[1] + j];
  }

  // Scalar convenience for {1}-shaped tensors.
  double value() const {
    if (numel() != 1) throw ShapeError("Tensor::value: not a scalar, shape " + shape_str());
    return (*data)[0];
  }

  // Marks the tensor as a trainable leaf and allocates its gradient buffer.
  Tensor& set_requires_grad(bool on) {
    requires_grad = on;
    if (on && !grad) grad = std::make_shared<std::vector<double>>(numel(), 0.0);
    if (!on) grad.reset();
    return *this;
  }

  void zero_grad() {
    if (grad)
      for (double& g : *grad) g = 0.0;
  }

  // The accumulated gradient, exposed as a tensor sharing the same buffer.
  Tensor grad_view() const {
    if (!grad) throw DomainError("Tensor::grad_view: no gradient buffer");
    Tensor g;
    g.shape = shape;
    g.data = grad;
    return g;
  }

  // Deep copy of data; gradient state and tape provenance are dropped.
  Tensor clone() const {
    Tensor t;
    t.shape = shape;
    t.data = std::make_shared<std::vector<double>>(*data);
    t.requires_grad = requires_grad;
    if (requires_grad) t.grad = std::make_shared<std::vector<double>>(numel(), 0.0);
    return t;
  }

  bool all_finite() const {
    for (double x : *data)
      if (!std::isfinite(x)) return false;
    return true;
  }

  std::string shape_str() const { return shape_string(shape); }

  static std::string shape_string(const std::vector<int>& s) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ")";
    return os.str();
  }

  static std::size_t checked_numel(const std::vector<int>& s) {
    if (s.empty()) throw ShapeError("Tensor: rank-0 shape");
    std::size_t n = 1;
    for (int d : s) {
      if (d <= 0) throw ShapeError("Tensor: non-positive extent in " + shape_string(s));
      n *= static_cast<std::size_t>(d);
    }
    return n;
  }
};

namespace detail {

struct Node {
  std::vector<Tensor> parents;
  // Accumulates d(loss)/d(parent) into each parent's grad buffer, given the
  // already-filled grad of the node's output.
  std::function<void(const Tensor&)> backward;
};

// True when at least one input participates in the tape and recording is on.
inline bool track(std::initializer_list<const Tensor*> inputs) {
  if (!grad_mode_flag()) return false;
  for (const Tensor* t : inputs)
    if (t->requires_grad) return true;
  return false;
}

inline void attach(Tensor& out, std::vector<Tensor> parents,
                   std::function<void(const Tensor&)> backward) {
  out.requires_grad = true;
  out.grad = std::make_shared<std::vector<double>>(out.numel(), 0.0);
  auto n = std::make_shared<Node>();
  n->parents = std::move(parents);
  n->backward = std::move(backward);
  out.node = std::move(n);
}

}  // namespace detail

// Scoped tape suppression; ops executed inside run forward-only.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode_flag()) {
    detail::grad_mode_flag() = false;
  }
  ~NoGradGuard() { detail::grad_mode_flag() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Reverse-mode sweep from a scalar loss. Gradients accumulate (+=) into every
// reachable tensor that requires them; leaves keep their buffers for the
// optimizer to consume.
inline void backward(const Tensor& loss) {
  if (loss.numel() != 1)
    throw ShapeError("backward: loss must be scalar, got " + loss.shape_str());
  if (!loss.requires_grad || !loss.grad)
    throw DomainError("backward: loss does not require grad");

  // Iterative post-order DFS over tape nodes.
  std::vector<Tensor> order;
  std::unordered_set<const detail::Node*> visited;
  struct Frame {
    Tensor t;
    std::size_t next;
  };
  std::vector<Frame> stack;
  if (loss.node) {
    visited.insert(loss.node.get());
    stack.push_back({loss, 0});
  }
  while (!stack.empty()) {
    Frame& f = stack.back();
    const auto& parents = f.t.node->parents;
    if (f.next < parents.size()) {
      const Tensor& p = parents[f.next++];
      if (p.node && !visited.count(p.node.get())) {
        visited.insert(p.node.get());
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.t);
      stack.pop_back();
    }
  }

  (*loss.grad)[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    it->node->backward(*it);
}

}  // namespace cgre
