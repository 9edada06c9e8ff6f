#include "rnddiv/gradcheck.hpp"

#include <algorithm>

namespace rnddiv {

namespace {

TensorPtr<double> rand_tensor(Rng& rng, std::vector<int64_t> shape, double lo = -1.0,
                              double hi = 1.0) {
    std::vector<double> vals(static_cast<size_t>(shape_numel(shape)));
    for (auto& v : vals) v = rng.uniform(lo, hi);
    return make_tensor<double>(std::move(shape), std::move(vals), /*requires_grad=*/true);
}

std::vector<double> rand_weights(Rng& rng, size_t n) {
    std::vector<double> w(n);
    for (auto& v : w) v = rng.uniform(-1.0, 1.0);
    return w;
}

}  // namespace

std::vector<OpGradReport> run_engine_gradchecks(uint64_t seed, int repeats_per_op) {
    std::vector<OpGradReport> reports;
    auto record = [&reports](const std::string& op, const GradCheckResult& r) {
        auto it = std::find_if(reports.begin(), reports.end(),
                               [&](const OpGradReport& x) { return x.op == op; });
        if (it == reports.end()) {
            reports.push_back({op, r.max_rel_error});
        } else {
            it->max_rel_error = std::max(it->max_rel_error, r.max_rel_error);
        }
    };

    Rng rng(derive_seed(seed, 0x6c0de));
    for (int rep = 0; rep < repeats_per_op; ++rep) {
        {
            const int64_t b = 2 + static_cast<int64_t>(rng.uniform_int(3));
            const int64_t m = 2 + static_cast<int64_t>(rng.uniform_int(5));
            const int64_t p = 1 + static_cast<int64_t>(rng.uniform_int(5));
            auto x = rand_tensor(rng, {b, m});
            auto w = rand_tensor(rng, {m, p});
            auto bias = rand_tensor(rng, {p});
            auto ws = rand_weights(rng, static_cast<size_t>(b * p));
            record("linear", gradcheck([&] { return weighted_sum(linear(x, w, bias), ws); },
                                       {x, w, bias}));
            record("linear_nobias",
                   gradcheck([&] { return weighted_sum(linear(x, w), ws); }, {x, w}));
        }
        {
            const int64_t b = 2, c = 1 + static_cast<int64_t>(rng.uniform_int(3));
            const int64_t o = 1 + static_cast<int64_t>(rng.uniform_int(3));
            const int64_t h = 4 + static_cast<int64_t>(rng.uniform_int(3));
            const int64_t w = 4 + static_cast<int64_t>(rng.uniform_int(3));
            const int64_t stride = 1 + static_cast<int64_t>(rng.uniform_int(2));
            const int64_t pad = static_cast<int64_t>(rng.uniform_int(2));
            auto x = rand_tensor(rng, {b, c, h, w});
            auto k = rand_tensor(rng, {o, c, 3, 3});
            auto bias = rand_tensor(rng, {o});
            auto probe = conv2d(x, k, stride, pad, bias);
            auto ws = rand_weights(rng, probe->value.size());
            record("conv2d", gradcheck([&] { return weighted_sum(conv2d(x, k, stride, pad, bias), ws); },
                                       {x, k, bias}));
        }
        {
            const int64_t b = 2, d = 3 + static_cast<int64_t>(rng.uniform_int(4));
            auto x = rand_tensor(rng, {b, d});
            // keep values away from the relu kink so central differences stay valid
            for (auto& v : x->value) {
                if (std::abs(v) < 0.01) v = v < 0 ? v - 0.01 : v + 0.01;
            }
            auto ws = rand_weights(rng, static_cast<size_t>(b * d));
            record("relu", gradcheck([&] { return weighted_sum(relu(x), ws); }, {x}));

            auto y = rand_tensor(rng, {b, d});
            record("add", gradcheck([&] { return weighted_sum(add(x, y), ws); }, {x, y}));

            auto t = rand_tensor(rng, {b, d});
            record("mse", gradcheck([&] { return mse(x, t); }, {x, t}));
        }
        {
            const int64_t b = 2, s = 2 + static_cast<int64_t>(rng.uniform_int(4));
            const int64_t d = 2 + static_cast<int64_t>(rng.uniform_int(4));
            auto x = rand_tensor(rng, {b, s, d});
            auto ws = rand_weights(rng, static_cast<size_t>(b * d));
            record("mean_pool", gradcheck([&] { return weighted_sum(mean_pool(x), ws); }, {x}));

            std::vector<int32_t> ids(static_cast<size_t>(b * s));
            for (auto& id : ids) id = static_cast<int32_t>(rng.uniform_int(3));  // 0 = pad
            for (int64_t e = 0; e < b; ++e) ids[e * s] = 1;  // keep every row non-empty
            record("masked_mean_pool",
                   gradcheck([&] { return weighted_sum(masked_mean_pool(x, ids), ws); }, {x}));

            auto pos = rand_tensor(rng, {s + 2, d});
            auto wsp = rand_weights(rng, static_cast<size_t>(b * s * d));
            record("add_positional",
                   gradcheck([&] { return weighted_sum(add_positional(x, pos), wsp); }, {x, pos}));

            auto wq = rand_tensor(rng, {d, d});
            auto wk = rand_tensor(rng, {d, d});
            auto wv = rand_tensor(rng, {d, d});
            record("attention_single_head",
                   gradcheck(
                       [&] {
                           return weighted_sum(attention_single_head(x, wq, wk, wv), wsp);
                       },
                       {x, wq, wk, wv}));
        }
        {
            const int64_t b = 2, s = 3, v = 5, d = 3;
            auto table = rand_tensor(rng, {v, d});
            std::vector<int32_t> ids(static_cast<size_t>(b * s));
            for (auto& id : ids) id = static_cast<int32_t>(rng.uniform_int(v));
            auto ws = rand_weights(rng, static_cast<size_t>(b * s * d));
            record("embedding_lookup",
                   gradcheck([&] { return weighted_sum(embedding_lookup(ids, b, s, table), ws); },
                             {table}));
        }
        {
            const int64_t b = 2, c = 2, h = 4, w = 3;
            auto x = rand_tensor(rng, {b, c, h, w});
            auto ws = rand_weights(rng, static_cast<size_t>(b * c));
            record("spatial_mean_pool",
                   gradcheck([&] { return weighted_sum(spatial_mean_pool(x), ws); }, {x}));
        }
    }
    return reports;
}

}  // namespace rnddiv
