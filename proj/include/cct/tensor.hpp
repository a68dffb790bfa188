#pragma once

#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <functional>
#include <initializer_list>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "cct/errors.hpp"

namespace cct {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (auto e : s) n *= e;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << 'x';
        os << s[i];
    }
    os << ']';
    return os.str();
}

namespace detail {

// One node of the computation trace. Holds the forward value, the gradient
// slot, and a closure that pushes this node's gradient into its parents.
template <typename T>
struct Node {
    Shape shape;
    std::vector<T> values;
    std::vector<T> grad;
    bool requires_grad = false;
    bool consumed = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node<T>>> parents;
    std::function<void(Node<T>&)> backprop;

    void ensure_grad() {
        if (grad.size() != values.size()) grad.assign(values.size(), T(0));
    }
};

inline bool nan_check_enabled() {
    static const bool on = [] {
        const char* v = std::getenv("CCT_NAN_CHECK");
        return v != nullptr && *v != '\0' && std::string(v) != "0";
    }();
    return on;
}

template <typename T>
void check_finite(const std::vector<T>& values, const char* op) {
    for (const T& v : values) {
        if (!std::isfinite(static_cast<double>(v))) {
            throw NumericError(std::string("non-finite value produced by op '") + op + "'");
        }
    }
}

}  // namespace detail

// Dense n-dimensional tensor, row-major, with an optional gradient slot.
// Copying a Tensor copies a handle to the same storage; ops that trace
// gradients link nodes through shared ownership so the trace stays alive
// as long as its outputs do.
template <typename T>
class Tensor {
public:
    Tensor() : node_(std::make_shared<detail::Node<T>>()) {}

    Tensor(Shape shape, std::vector<T> values, bool requires_grad = false)
        : node_(std::make_shared<detail::Node<T>>()) {
        if (shape_numel(shape) != values.size()) {
            throw ShapeError("tensor: shape " + shape_str(shape) + " wants " +
                             std::to_string(shape_numel(shape)) + " values, got " +
                             std::to_string(values.size()));
        }
        node_->shape = std::move(shape);
        node_->values = std::move(values);
        node_->requires_grad = requires_grad;
    }

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        std::size_t n = shape_numel(shape);
        return Tensor(std::move(shape), std::vector<T>(n, T(0)), requires_grad);
    }

    static Tensor ones(Shape shape, bool requires_grad = false) {
        std::size_t n = shape_numel(shape);
        return Tensor(std::move(shape), std::vector<T>(n, T(1)), requires_grad);
    }

    static Tensor full(Shape shape, T value, bool requires_grad = false) {
        std::size_t n = shape_numel(shape);
        return Tensor(std::move(shape), std::vector<T>(n, value), requires_grad);
    }

    static Tensor scalar(T value) { return Tensor({}, {value}); }

    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t numel() const { return node_->values.size(); }
    std::size_t extent(std::size_t axis) const { return node_->shape.at(axis); }

    std::vector<T>& values() { return node_->values; }
    const std::vector<T>& values() const { return node_->values; }

    bool has_grad() const { return node_->grad.size() == node_->values.size(); }
    std::vector<T>& grad() {
        node_->ensure_grad();
        return node_->grad;
    }
    const std::vector<T>& grad() const {
        if (!has_grad()) throw UsageError("tensor: gradient not populated");
        return node_->grad;
    }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool rg) { node_->requires_grad = rg; }
    void zero_grad() {
        node_->grad.assign(node_->values.size(), T(0));
    }

    T item() const {
        if (numel() != 1) {
            throw UsageError("tensor: item() needs a single element, shape is " +
                             shape_str(shape()));
        }
        return node_->values[0];
    }

    std::shared_ptr<detail::Node<T>>& node() { return node_; }
    const std::shared_ptr<detail::Node<T>>& node() const { return node_; }

private:
    std::shared_ptr<detail::Node<T>> node_;
};

namespace detail {

// Builds the output node of an op. Parents are only those inputs that take
// part in gradient flow; the backprop closure is attached by the caller.
template <typename T>
Tensor<T> make_op_result(Shape shape, std::vector<T> values, const char* op,
                         std::initializer_list<std::shared_ptr<Node<T>>> inputs) {
    if (nan_check_enabled()) check_finite(values, op);
    Tensor<T> out(std::move(shape), std::move(values));
    auto& n = *out.node();
    n.op = op;
    for (const auto& in : inputs) {
        if (in->requires_grad) {
            n.requires_grad = true;
            n.parents.push_back(in);
        }
    }
    return out;
}

}  // namespace detail

// Reverse-mode sweep from a scalar loss. Gradients accumulate (sum) into
// every tensor on the trace that requires them; the trace is consumed.
template <typename T>
void backward(Tensor<T>& loss) {
    if (loss.numel() != 1) {
        throw UsageError("backward: loss must be a scalar, got shape " + shape_str(loss.shape()));
    }
    auto root = loss.node();
    if (root->consumed) {
        throw UsageError("backward: trace already consumed for this loss");
    }
    if (!root->requires_grad) {
        root->ensure_grad();
        root->grad[0] = T(1);
        root->consumed = true;
        return;
    }

    // Post-order DFS; the order vector owns the nodes so the trace cannot
    // be torn down mid-sweep.
    std::vector<std::shared_ptr<detail::Node<T>>> order;
    std::unordered_set<detail::Node<T>*> seen;
    struct Frame {
        std::shared_ptr<detail::Node<T>> node;
        std::size_t next = 0;
    };
    std::vector<Frame> stack;
    stack.push_back({root});
    seen.insert(root.get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next < f.node->parents.size()) {
            auto parent = f.node->parents[f.next++];
            if (seen.insert(parent.get()).second) {
                // an op node from a previously consumed trace has lost its
                // backprop closure; flowing through it would drop gradients
                if (parent->consumed && std::string_view(parent->op) != "leaf") {
                    throw UsageError("backward: graph shares nodes with a consumed trace");
                }
                stack.push_back({parent});
            }
        } else {
            order.push_back(f.node);
            stack.pop_back();
        }
    }

    root->ensure_grad();
    root->grad[0] = T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        auto& node = **it;
        node.consumed = true;
        if (node.backprop) {
            node.backprop(node);
            node.backprop = nullptr;
        }
        node.parents.clear();
    }
}

}  // namespace cct
