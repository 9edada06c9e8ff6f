#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rnddiv/tensor.hpp"

namespace rnddiv {

// Heavy-ball SGD: v <- momentum * v + g, p <- p - lr * v.
// Momentum buffers are created all-zero, one per parameter, in parameter order.
template <typename T>
class SgdMomentum {
public:
    SgdMomentum(double learning_rate, double momentum, const std::vector<TensorPtr<T>>& params)
        : lr_(static_cast<T>(learning_rate)), momentum_(static_cast<T>(momentum)) {
        if (learning_rate <= 0) throw ConfigError("sgd: learning_rate must be positive");
        if (momentum < 0 || momentum >= 1) throw ConfigError("sgd: momentum must lie in [0, 1)");
        buffers_.reserve(params.size());
        for (const auto& p : params) {
            buffers_.emplace_back(p->value.size(), T(0));
        }
    }

    void step(const std::vector<TensorPtr<T>>& params) {
        if (params.size() != buffers_.size()) {
            throw UsageError("sgd: parameter list does not match optimizer state");
        }
        for (size_t k = 0; k < params.size(); ++k) {
            Tensor<T>& p = *params[k];
            if (p.grad.size() != p.value.size()) {
                throw UsageError("sgd: missing gradient for parameter " + std::to_string(k));
            }
            std::vector<T>& v = buffers_[k];
            for (size_t i = 0; i < v.size(); ++i) {
                v[i] = momentum_ * v[i] + p.grad[i];
                p.value[i] -= lr_ * v[i];
            }
        }
    }

    const std::vector<std::vector<T>>& buffers() const { return buffers_; }

private:
    T lr_;
    T momentum_;
    std::vector<std::vector<T>> buffers_;
};

}  // namespace rnddiv
