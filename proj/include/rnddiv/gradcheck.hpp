#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rnddiv/ops.hpp"
#include "rnddiv/rng.hpp"
#include "rnddiv/tensor.hpp"

namespace rnddiv {

// Central finite-difference check of one recorded computation. The oracle
// side uses forward evaluations only, so it is independent of the backprop
// closures it validates.
//
// `forward` must rebuild the scalar loss from the current values of `inputs`
// every time it is called.
struct GradCheckResult {
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
};

inline GradCheckResult gradcheck(
    const std::function<TensorPtr<double>()>& forward,
    const std::vector<TensorPtr<double>>& inputs, double epsilon = 1e-5) {
    auto loss = forward();
    backward(loss);

    std::vector<std::vector<double>> analytic;
    analytic.reserve(inputs.size());
    for (const auto& in : inputs) {
        if (in->grad.size() != in->value.size()) {
            throw UsageError("gradcheck: input did not receive a gradient");
        }
        analytic.push_back(in->grad);
    }

    GradCheckResult res;
    for (size_t k = 0; k < inputs.size(); ++k) {
        Tensor<double>& t = *inputs[k];
        for (size_t i = 0; i < t.value.size(); ++i) {
            const double saved = t.value[i];
            t.value[i] = saved + epsilon;
            const double up = forward()->value[0];
            t.value[i] = saved - epsilon;
            const double down = forward()->value[0];
            t.value[i] = saved;
            const double numeric = (up - down) / (2.0 * epsilon);
            const double exact = analytic[k][i];
            const double abs_err = std::abs(numeric - exact);
            const double denom = std::max(1.0, std::max(std::abs(numeric), std::abs(exact)));
            res.max_abs_error = std::max(res.max_abs_error, abs_err);
            res.max_rel_error = std::max(res.max_rel_error, abs_err / denom);
        }
    }
    return res;
}

// Named check over randomized shapes; used by both the test suite and the
// `gradcheck` CLI command.
struct OpGradReport {
    std::string op;
    double max_rel_error = 0.0;
};

std::vector<OpGradReport> run_engine_gradchecks(uint64_t seed, int repeats_per_op = 3);

}  // namespace rnddiv
