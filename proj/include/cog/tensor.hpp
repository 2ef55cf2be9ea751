#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "cog/errors.hpp"

namespace cog {

using Shape = std::vector<std::int64_t>;

inline std::int64_t numel(const Shape& shape) {
    std::int64_t n = 1;
    for (auto e : shape) n *= e;
    return n;
}

inline std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

namespace detail {

inline std::uint64_t next_node_id() {
    static std::atomic<std::uint64_t> counter{0};
    return counter.fetch_add(1, std::memory_order_relaxed);
}

inline bool& grad_mode_flag() {
    thread_local bool enabled = true;
    return enabled;
}

}  // namespace detail

// Disables graph recording in scope; forward values are still computed.
struct NoGradGuard {
    NoGradGuard() : prev_(detail::grad_mode_flag()) { detail::grad_mode_flag() = false; }
    ~NoGradGuard() { detail::grad_mode_flag() = prev_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

inline bool grad_mode_enabled() { return detail::grad_mode_flag(); }

template <typename T>
struct Node {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;  // sized lazily during backward
    bool requires_grad = false;
    std::uint64_t id = 0;  // creation order; backward runs ids in descending order
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node<T>>> parents;
    std::function<void(Node<T>&)> backward_fn;

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    }
    void zero_grad() {
        if (!grad.empty()) std::fill(grad.begin(), grad.end(), T(0));
    }
};

// Value handle over a graph node. Copies are shallow and share the node.
template <typename T>
class Tensor {
public:
    using Scalar = T;

    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        return Tensor(make_node(std::move(shape), {}, requires_grad, true));
    }

    static Tensor from(Shape shape, std::vector<T> data, bool requires_grad = false) {
        if (static_cast<std::int64_t>(data.size()) != cog::numel(shape)) {
            throw ShapeError("tensor data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
        }
        return Tensor(make_node(std::move(shape), std::move(data), requires_grad, false));
    }

    static Tensor scalar(T v) { return from({1}, {v}); }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::int64_t numel() const { return static_cast<std::int64_t>(node_->value.size()); }
    std::int64_t dim(std::size_t i) const { return node_->shape.at(i); }
    std::size_t rank() const { return node_->shape.size(); }
    bool requires_grad() const { return node_->requires_grad; }

    const std::vector<T>& data() const { return node_->value; }
    // Mutable access is for leaves (parameters, inputs); graph outputs are immutable values.
    std::vector<T>& mutable_data() { return node_->value; }
    const std::vector<T>& grad() const { return node_->grad; }

    T item() const {
        if (numel() != 1) throw ShapeError("item() on non-scalar tensor " + shape_str(shape()));
        return node_->value[0];
    }

    void zero_grad() { node_->zero_grad(); }

    std::shared_ptr<Node<T>> node() const { return node_; }

    explicit Tensor(std::shared_ptr<Node<T>> n) : node_(std::move(n)) {}

private:
    static std::shared_ptr<Node<T>> make_node(Shape shape, std::vector<T> data,
                                              bool requires_grad, bool fill_zero) {
        auto n = std::make_shared<Node<T>>();
        n->shape = std::move(shape);
        if (fill_zero) {
            n->value.assign(static_cast<std::size_t>(cog::numel(n->shape)), T(0));
        } else {
            n->value = std::move(data);
        }
        n->requires_grad = requires_grad;
        n->id = detail::next_node_id();
        return n;
    }

    std::shared_ptr<Node<T>> node_;
};

template <typename T>
inline void check_finite(const std::vector<T>& v, const char* what) {
    for (const T x : v) {
        if (!std::isfinite(static_cast<double>(x))) {
            throw NumericError(std::string("non-finite value in ") + what);
        }
    }
}

// Reverse sweep driver: reachable subgraph in exact reverse creation order.
template <typename T>
struct Graph {
    std::vector<Node<T>*> topo;  // ascending creation id

    static Graph from(const Tensor<T>& root) {
        Graph g;
        std::unordered_set<Node<T>*> seen;
        std::vector<Node<T>*> stack{root.node().get()};
        while (!stack.empty()) {
            Node<T>* n = stack.back();
            stack.pop_back();
            if (!n->requires_grad || !seen.insert(n).second) continue;
            g.topo.push_back(n);
            for (auto& p : n->parents) stack.push_back(p.get());
        }
        std::sort(g.topo.begin(), g.topo.end(),
                  [](const Node<T>* a, const Node<T>* b) { return a->id < b->id; });
        return g;
    }
};

// Reverse-mode sweep from a finite scalar loss. Gradients accumulate in a
// fixed order (descending node creation id), so repeated runs are bit-identical.
template <typename T>
inline void backward(const Tensor<T>& loss) {
    if (loss.numel() != 1) {
        throw ShapeError("backward() requires a scalar loss, got " + shape_str(loss.shape()));
    }
    if (!std::isfinite(static_cast<double>(loss.item()))) {
        throw NumericError("backward() on non-finite loss");
    }
    if (!loss.requires_grad()) return;

    Graph<T> g = Graph<T>::from(loss);
    for (Node<T>* n : g.topo) {
        n->ensure_grad();
        n->zero_grad();
    }
    loss.node()->grad[0] = T(1);
    for (auto it = g.topo.rbegin(); it != g.topo.rend(); ++it) {
        Node<T>* n = *it;
        if (n->backward_fn) n->backward_fn(*n);
    }
    for (Node<T>* n : g.topo) {
        check_finite(n->grad, n->op);
    }
}

}  // namespace cog
