#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "rnddiv/errors.hpp"

namespace rnddiv {

inline std::string shape_str(const std::vector<int64_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

inline int64_t shape_numel(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t e : shape) n *= e;
    return n;
}

// One node of the reverse-mode graph. Op outputs hold shared ownership of
// their inputs; `backprop` reads this node's grad and accumulates into the
// parents' grads. Scalar type T selects the precision mode (float or double).
template <typename T>
struct Tensor {
    std::vector<int64_t> shape;
    std::vector<T> value;
    std::vector<T> grad;  // empty until backward() touches this node
    bool requires_grad = false;
    std::vector<std::shared_ptr<Tensor<T>>> parents;
    std::function<void(Tensor<T>&)> backprop;

    int64_t numel() const { return static_cast<int64_t>(value.size()); }

    T* grad_data() {
        if (grad.empty()) grad.assign(value.size(), T(0));
        return grad.data();
    }
};

template <typename T>
using TensorPtr = std::shared_ptr<Tensor<T>>;

namespace detail {
inline bool& no_grad_flag() {
    thread_local bool flag = false;
    return flag;
}
}  // namespace detail

// RAII: disables graph recording on this thread (evaluation passes).
struct NoGradGuard {
    NoGradGuard() : prev_(detail::no_grad_flag()) { detail::no_grad_flag() = true; }
    ~NoGradGuard() { detail::no_grad_flag() = prev_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

inline bool grad_enabled() { return !detail::no_grad_flag(); }

template <typename T>
void check_finite(const std::vector<T>& v, const char* what) {
    for (const T x : v) {
        if (!std::isfinite(static_cast<double>(x))) {
            throw NumericError(std::string(what) + ": non-finite value");
        }
    }
}

template <typename T>
TensorPtr<T> make_tensor(std::vector<int64_t> shape, std::vector<T> values, bool requires_grad = false) {
    for (int64_t e : shape) {
        if (e < 1) throw DimensionError("tensor extent must be positive, got shape " + shape_str(shape));
    }
    if (shape_numel(shape) != static_cast<int64_t>(values.size())) {
        throw DimensionError("shape " + shape_str(shape) + " does not match value count " +
                             std::to_string(values.size()));
    }
    check_finite(values, "make_tensor");
    auto t = std::make_shared<Tensor<T>>();
    t->shape = std::move(shape);
    t->value = std::move(values);
    t->requires_grad = requires_grad;
    return t;
}

template <typename T>
TensorPtr<T> make_zeros(std::vector<int64_t> shape, bool requires_grad = false) {
    const int64_t n = shape_numel(shape);
    return make_tensor<T>(std::move(shape), std::vector<T>(static_cast<size_t>(n), T(0)), requires_grad);
}

// Op-output helper: ties requires_grad to the parents and drops the graph in
// no-grad mode. `parents` lists only inputs that can receive gradient.
template <typename T>
TensorPtr<T> make_op_output(std::vector<int64_t> shape, std::vector<T> values,
                            std::vector<TensorPtr<T>> parents,
                            std::function<void(Tensor<T>&)> backprop) {
    auto t = std::make_shared<Tensor<T>>();
    t->shape = std::move(shape);
    t->value = std::move(values);
    bool needs = false;
    for (const auto& p : parents) needs = needs || p->requires_grad;
    if (needs && grad_enabled()) {
        t->requires_grad = true;
        t->parents = std::move(parents);
        t->backprop = std::move(backprop);
    }
    return t;
}

// Reverse-mode sweep from a scalar. Every reachable node that requires grad
// is zeroed first, so repeated backward calls never accumulate across sweeps.
template <typename T>
void backward(const TensorPtr<T>& root) {
    if (root->numel() != 1) {
        throw UsageError("backward: root must be a scalar, got shape " + shape_str(root->shape));
    }
    if (!root->requires_grad) {
        throw UsageError("backward: value has no recorded computation");
    }

    std::vector<Tensor<T>*> topo;
    std::unordered_set<Tensor<T>*> seen;
    std::vector<std::pair<Tensor<T>*, size_t>> stack;
    stack.emplace_back(root.get(), 0);
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Tensor<T>* p = node->parents[idx++].get();
            if (p->requires_grad && seen.insert(p).second) {
                stack.emplace_back(p, 0);
            }
        } else {
            topo.push_back(node);
            stack.pop_back();
        }
    }

    for (Tensor<T>* node : topo) {
        node->grad.assign(node->value.size(), T(0));
    }
    root->grad[0] = T(1);
    // topo is in post-order: root last. Walk it backwards.
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        if ((*it)->backprop) (*it)->backprop(**it);
    }
}

}  // namespace rnddiv
