#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rnddiv/ops.hpp"
#include "rnddiv/optimizer.hpp"
#include "rnddiv/rng.hpp"
#include "rnddiv/tensor.hpp"

namespace rnddiv {

enum class NetKind { mlp, conv, token };

inline const char* net_kind_name(NetKind k) {
    switch (k) {
        case NetKind::mlp: return "mlp";
        case NetKind::conv: return "conv";
        case NetKind::token: return "token";
    }
    return "?";
}

// Architecture description shared by target and predictor.
struct NetworkSpec {
    NetKind kind = NetKind::mlp;
    int depth = 1;        // hidden blocks
    int width = 32;       // hidden size / channel count
    int feature_dim = 64; // output feature size
    std::vector<int64_t> input_shape;  // {d} or {c, h, w}; ignored for token
    bool homogeneous = false;          // bias-free, relu-only path
    int vocab_size = 0;                // token only, ids 0 = pad and 1 = unk reserved
    int max_seq_len = 0;               // token only
};

inline void validate_spec(const NetworkSpec& spec) {
    if (spec.depth < 1) throw ConfigError("network spec: depth must be >= 1");
    if (spec.width < 1) throw ConfigError("network spec: width must be >= 1");
    if (spec.feature_dim < 1) throw ConfigError("network spec: feature_dim must be >= 1");
    if (spec.kind == NetKind::token) {
        if (spec.vocab_size < 2) throw ConfigError("network spec: vocab_size must be >= 2");
        if (spec.max_seq_len < 1) throw ConfigError("network spec: max_seq_len must be >= 1");
    } else {
        if (spec.input_shape.empty()) throw ConfigError("network spec: input_shape is required");
        for (int64_t e : spec.input_shape) {
            if (e < 1) throw ConfigError("network spec: input_shape extents must be positive");
        }
        if (spec.kind == NetKind::conv && spec.input_shape.size() != 3) {
            throw ConfigError("network spec: input_shape must be {c, h, w} for conv");
        }
    }
}

template <typename T>
struct Network {
    NetworkSpec spec;
    std::vector<TensorPtr<T>> params;
    std::vector<std::string> param_names;
    bool frozen = false;
};

namespace detail {

template <typename T>
class ParamBuilder {
public:
    ParamBuilder(Network<T>& net, Rng& rng) : net_(net), rng_(rng) {}

    // Kaiming-uniform fan-in weights.
    TensorPtr<T> weight(const std::string& name, std::vector<int64_t> shape, int64_t fan_in) {
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        return fill(name, std::move(shape), -bound, bound);
    }

    // Lookup tables are not fan-in shaped; U(-1, 1).
    TensorPtr<T> table(const std::string& name, std::vector<int64_t> shape) {
        return fill(name, std::move(shape), -1.0, 1.0);
    }

    TensorPtr<T> bias(const std::string& name, int64_t n) {
        if (net_.spec.homogeneous) return nullptr;
        auto t = make_zeros<T>({n}, /*requires_grad=*/true);
        net_.params.push_back(t);
        net_.param_names.push_back(name);
        return t;
    }

private:
    TensorPtr<T> fill(const std::string& name, std::vector<int64_t> shape, double lo, double hi) {
        std::vector<T> vals(static_cast<size_t>(shape_numel(shape)));
        for (auto& v : vals) v = static_cast<T>(rng_.uniform(lo, hi));
        auto t = make_tensor<T>(std::move(shape), std::move(vals), /*requires_grad=*/true);
        net_.params.push_back(t);
        net_.param_names.push_back(name);
        return t;
    }

    Network<T>& net_;
    Rng& rng_;
};

}  // namespace detail

// Deterministic in (spec, seed). Weight draws happen in declaration order.
template <typename T>
Network<T> build_network(const NetworkSpec& spec, uint64_t seed) {
    validate_spec(spec);
    Network<T> net;
    net.spec = spec;
    Rng rng(splitmix64(seed));
    detail::ParamBuilder<T> pb(net, rng);

    const int64_t width = spec.width, feat = spec.feature_dim;
    switch (spec.kind) {
        case NetKind::mlp: {
            const int64_t in_dim = shape_numel(spec.input_shape);
            int64_t cur = in_dim;
            for (int l = 0; l < spec.depth; ++l) {
                const std::string tag = "mlp" + std::to_string(l);
                pb.weight(tag + ".w", {cur, width}, cur);
                pb.bias(tag + ".b", width);
                cur = width;
            }
            pb.weight("head.w", {cur, feat}, cur);
            pb.bias("head.b", feat);
            break;
        }
        case NetKind::conv: {
            const int64_t c = spec.input_shape[0];
            pb.weight("stem.k", {width, c, 3, 3}, c * 9);
            pb.bias("stem.b", width);
            for (int l = 0; l < spec.depth; ++l) {
                const std::string tag = "block" + std::to_string(l);
                pb.weight(tag + ".k1", {width, width, 3, 3}, width * 9);
                pb.bias(tag + ".b1", width);
                pb.weight(tag + ".k2", {width, width, 3, 3}, width * 9);
                pb.bias(tag + ".b2", width);
            }
            pb.weight("head.w", {width, feat}, width);
            pb.bias("head.b", feat);
            break;
        }
        case NetKind::token: {
            pb.table("embed", {spec.vocab_size, width});
            pb.table("pos", {spec.max_seq_len, width});
            for (int l = 0; l < spec.depth; ++l) {
                const std::string tag = "block" + std::to_string(l);
                pb.weight(tag + ".wq", {width, width}, width);
                pb.weight(tag + ".wk", {width, width}, width);
                pb.weight(tag + ".wv", {width, width}, width);
                pb.weight(tag + ".ff1.w", {width, width}, width);
                pb.bias(tag + ".ff1.b", width);
                pb.weight(tag + ".ff2.w", {width, width}, width);
                pb.bias(tag + ".ff2.b", width);
            }
            pb.weight("head.w", {width, feat}, width);
            pb.bias("head.b", feat);
            break;
        }
    }
    return net;
}

template <typename T>
void set_frozen(Network<T>& net) {
    net.frozen = true;
    for (auto& p : net.params) p->requires_grad = false;
}

template <typename T>
void sgd_step(Network<T>& net, SgdMomentum<T>& opt) {
    if (net.frozen) throw UsageError("sgd_step: network is frozen");
    opt.step(net.params);
}

// Feature extraction for tensor batches: [b x ...input_shape] -> [b x feature_dim].
template <typename T>
TensorPtr<T> forward(const Network<T>& net, const TensorPtr<T>& batch) {
    const NetworkSpec& spec = net.spec;
    if (spec.kind == NetKind::token) {
        throw UsageError("forward: token networks take sequences, not tensors");
    }
    if (batch->shape.empty() || batch->shape[0] < 1) {
        throw DimensionError("forward: batch must have a leading example axis");
    }
    const int64_t b = batch->shape[0];
    const int64_t per_ex = batch->numel() / b;
    if (per_ex != shape_numel(spec.input_shape)) {
        throw DimensionError("forward: batch " + shape_str(batch->shape) +
                             " does not match input_shape " + shape_str(spec.input_shape));
    }
    size_t idx = 0;
    auto next = [&]() { return net.params[idx++]; };
    auto maybe_bias = [&]() -> TensorPtr<T> { return spec.homogeneous ? nullptr : next(); };

    if (spec.kind == NetKind::mlp) {
        auto x = reshape(batch, {b, per_ex});
        for (int l = 0; l < spec.depth; ++l) {
            auto w = next();
            x = relu(linear(x, w, maybe_bias()));
        }
        auto w = next();
        return linear(x, w, maybe_bias());
    }

    // conv: stem + residual blocks (conv-relu-conv + skip, relu after add)
    auto x = reshape(batch, {b, spec.input_shape[0], spec.input_shape[1], spec.input_shape[2]});
    {
        auto k = next();
        x = conv2d(x, k, /*stride=*/1, /*pad=*/1, maybe_bias());
    }
    for (int l = 0; l < spec.depth; ++l) {
        auto k1 = next();
        auto b1 = maybe_bias();
        auto k2 = next();
        auto b2 = maybe_bias();
        auto y = conv2d(relu(conv2d(x, k1, 1, 1, b1)), k2, 1, 1, b2);
        x = relu(add(x, y));
    }
    auto pooled = spatial_mean_pool(x);
    auto w = next();
    return linear(pooled, w, maybe_bias());
}

// Feature extraction for token batches. Sequences are padded with id 0 to a
// fixed length (default: spec.max_seq_len) so features do not depend on how a
// batch is composed; the final pool averages non-pad positions only.
template <typename T>
TensorPtr<T> forward_tokens(const Network<T>& net, const std::vector<std::vector<int32_t>>& seqs,
                            int64_t pad_len = 0) {
    const NetworkSpec& spec = net.spec;
    if (spec.kind != NetKind::token) {
        throw UsageError("forward_tokens: network kind is not token");
    }
    if (seqs.empty()) throw DataError("forward_tokens: empty batch");
    if (pad_len == 0) pad_len = spec.max_seq_len;
    if (pad_len > spec.max_seq_len) {
        throw DimensionError("forward_tokens: pad length exceeds max_seq_len");
    }
    const int64_t b = static_cast<int64_t>(seqs.size());
    const int64_t s = pad_len;
    std::vector<int32_t> ids(static_cast<size_t>(b * s), 0);
    for (int64_t e = 0; e < b; ++e) {
        if (seqs[e].empty()) throw DataError("forward_tokens: sequence " + std::to_string(e) + " is empty");
        if (static_cast<int64_t>(seqs[e].size()) > s) {
            throw DimensionError("forward_tokens: sequence " + std::to_string(e) + " has length " +
                                 std::to_string(seqs[e].size()) + " > pad length " + std::to_string(s));
        }
        std::copy(seqs[e].begin(), seqs[e].end(), ids.begin() + e * s);
    }

    size_t idx = 0;
    auto next = [&]() { return net.params[idx++]; };
    auto maybe_bias = [&]() -> TensorPtr<T> { return spec.homogeneous ? nullptr : next(); };
    const int64_t width = spec.width;

    auto emb = next();
    auto pos = next();
    auto x = add_positional(embedding_lookup(ids, b, s, emb), pos);
    for (int l = 0; l < spec.depth; ++l) {
        auto wq = next();
        auto wk = next();
        auto wv = next();
        x = add(x, attention_single_head(x, wq, wk, wv));
        auto f1 = next();
        auto b1 = maybe_bias();
        auto f2 = next();
        auto b2 = maybe_bias();
        auto flat = reshape(x, {b * s, width});
        auto ff = linear(relu(linear(flat, f1, b1)), f2, b2);
        x = add(x, reshape(ff, {b, s, width}));
    }
    auto pooled = masked_mean_pool(x, ids);
    auto w = next();
    return linear(pooled, w, maybe_bias());
}

}  // namespace rnddiv
