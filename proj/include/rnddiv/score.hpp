#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rnddiv/dataset.hpp"
#include "rnddiv/network.hpp"

namespace rnddiv {

enum class Precision { f32, f64 };

inline const char* precision_name(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }

// Distillation hyperparameters. Defaults follow the reference procedure:
// SGD momentum 0.9, lr 0.01, 50 epochs, score averaged over the final 10,
// 40 runs, 200 training examples.
struct TrainConfig {
    double learning_rate = 0.01;
    double momentum = 0.9;
    int epochs = 50;        // n; gap measured at epoch indices 0..n
    int window = 10;        // score averages indices n-window+1 .. n
    int runs = 40;
    int64_t train_size = 200;  // k
    int64_t batch_size = 32;
    uint64_t seed = 0;      // run j uses seed + j, j = 1..runs
    // Per-channel input standardization; unset = on for tensor data, off for tokens.
    std::optional<bool> normalize_inputs;
    Precision precision = Precision::f32;
};

void validate_config(const TrainConfig& cfg);

// One distillation run: losses and normalized gap at epoch indices 0..n
// (index 0 is measured before any training step).
struct RunTrace {
    uint64_t run_seed = 0;
    std::vector<double> mse_train;
    std::vector<double> mse_val;
    std::vector<double> rnd;
    double rnd_hat = 0.0;
    bool degenerate = false;  // some epoch had mse_train = mse_val = 0
    bool failed = false;
    std::string failure;
};

struct CiResult {
    double mean = 0.0;
    double stddev = 0.0;  // sample stddev, n-1 denominator
    double ci95 = 0.0;    // 1.96 * stddev / sqrt(r)
};

CiResult confidence_interval(const std::vector<double>& per_run);

struct RndReport {
    double score = 0.0;
    double stddev = 0.0;
    double ci95 = 0.0;
    std::vector<double> per_run;        // successful runs, in seed order
    std::vector<RunTrace> traces;       // all runs, in seed order
    std::vector<uint64_t> failed_seeds;
    TrainConfig config;
    NetworkSpec net_spec;
    std::string dataset_fingerprint;
    std::optional<ChannelStats> normalization;
};

// Per-channel standardization (channel = first axis of the example shape).
// Channels with stddev below 1e-8 are shifted only and flagged.
std::pair<TensorDataset, ChannelStats> normalize(const TensorDataset& ds);

// Seeded uniform permutation; first k indices train, rest validation.
std::pair<std::vector<int64_t>, std::vector<int64_t>> split_indices(int64_t n, int64_t k,
                                                                    uint64_t seed);

// Normalized generalization gap (mse_val - mse_train) / (mse_val + mse_train),
// in [-1, 1]; 0/0 yields 0 and sets the degenerate flag.
double rnd_epoch(double mse_val, double mse_train, bool* degenerate = nullptr);

namespace detail {

// One mini-batch forward of the examples selected by `indices`.
template <typename T>
using BatchForward =
    std::function<TensorPtr<T>(const Network<T>&, const std::vector<int64_t>& indices)>;

template <typename T>
std::vector<T> eval_features(const Network<T>& net, const BatchForward<T>& fwd,
                             const std::vector<int64_t>& indices, int64_t batch_size,
                             int64_t feature_dim) {
    NoGradGuard eval;
    std::vector<T> feats(indices.size() * static_cast<size_t>(feature_dim));
    std::vector<int64_t> chunk;
    for (size_t at = 0; at < indices.size(); at += static_cast<size_t>(batch_size)) {
        const size_t end = std::min(indices.size(), at + static_cast<size_t>(batch_size));
        chunk.assign(indices.begin() + at, indices.begin() + end);
        auto out = fwd(net, chunk);
        std::copy(out->value.begin(), out->value.end(), feats.begin() + at * feature_dim);
    }
    return feats;
}

// Eq. 1 over one split: mean over examples of squared feature distance.
template <typename T>
double eval_split_mse(const Network<T>& net, const BatchForward<T>& fwd,
                      const std::vector<int64_t>& indices, const std::vector<T>& target_feats,
                      const std::vector<int64_t>& target_pos, int64_t batch_size,
                      int64_t feature_dim) {
    NoGradGuard eval;
    double acc = 0.0;
    std::vector<int64_t> chunk;
    for (size_t at = 0; at < indices.size(); at += static_cast<size_t>(batch_size)) {
        const size_t end = std::min(indices.size(), at + static_cast<size_t>(batch_size));
        chunk.assign(indices.begin() + at, indices.begin() + end);
        auto out = fwd(net, chunk);
        for (size_t i = 0; i < chunk.size(); ++i) {
            const T* prow = out->value.data() + i * feature_dim;
            const T* trow = target_feats.data() + target_pos[chunk[i]] * feature_dim;
            T ex = T(0);
            for (int64_t j = 0; j < feature_dim; ++j) {
                const T diff = prow[j] - trow[j];
                ex += diff * diff;
            }
            acc += static_cast<double>(ex);
        }
    }
    if (!std::isfinite(acc)) throw NumericError("evaluation loss is non-finite");
    return acc / static_cast<double>(indices.size());
}

// Alg. 1 inner loop: fresh target and predictor, one split, n training epochs
// with the gap recorded before each (and after the last).
template <typename T>
RunTrace single_run_core(int64_t total, const BatchForward<T>& fwd, const NetworkSpec& spec,
                         const TrainConfig& cfg, uint64_t run_seed) {
    RunTrace trace;
    trace.run_seed = run_seed;

    auto target = build_network<T>(spec, derive_seed(run_seed, 1));
    set_frozen(target);
    auto pred = build_network<T>(spec, derive_seed(run_seed, 2));
    auto [train_idx, val_idx] = split_indices(total, cfg.train_size, derive_seed(run_seed, 3));
    Rng shuffle_rng(derive_seed(run_seed, 4));

    const int64_t feat = spec.feature_dim;
    // The target is frozen: its features per example never change, so they are
    // computed once and reused by every epoch evaluation and training batch.
    std::vector<int64_t> all_idx(static_cast<size_t>(total));
    for (int64_t i = 0; i < total; ++i) all_idx[i] = i;
    const std::vector<T> target_feats =
        eval_features<T>(target, fwd, all_idx, cfg.batch_size, feat);

    SgdMomentum<T> opt(cfg.learning_rate, cfg.momentum, pred.params);
    std::vector<int64_t> order = train_idx;
    try {
        for (int epoch = 0; epoch <= cfg.epochs; ++epoch) {
            const double mt = eval_split_mse<T>(pred, fwd, train_idx, target_feats, all_idx,
                                                cfg.batch_size, feat);
            const double mv = eval_split_mse<T>(pred, fwd, val_idx, target_feats, all_idx,
                                                cfg.batch_size, feat);
            bool degen = false;
            const double gap = rnd_epoch(mv, mt, &degen);
            trace.mse_train.push_back(mt);
            trace.mse_val.push_back(mv);
            trace.rnd.push_back(gap);
            trace.degenerate = trace.degenerate || degen;
            if (epoch == cfg.epochs) break;

            shuffle_rng.shuffle(order);
            std::vector<int64_t> chunk;
            for (size_t at = 0; at < order.size(); at += static_cast<size_t>(cfg.batch_size)) {
                const size_t end = std::min(order.size(), at + static_cast<size_t>(cfg.batch_size));
                chunk.assign(order.begin() + at, order.begin() + end);
                auto out = fwd(pred, chunk);
                std::vector<T> tvals(chunk.size() * static_cast<size_t>(feat));
                for (size_t i = 0; i < chunk.size(); ++i) {
                    const T* row = target_feats.data() + chunk[i] * feat;
                    std::copy(row, row + feat, tvals.begin() + i * feat);
                }
                auto tbatch = make_tensor<T>({static_cast<int64_t>(chunk.size()), feat},
                                             std::move(tvals));
                TensorPtr<T> loss;
                try {
                    loss = mse(out, tbatch);
                } catch (const NumericError& e) {
                    throw NumericError(std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                                       ", batch " + std::to_string(at / cfg.batch_size));
                }
                backward(loss);
                sgd_step(pred, opt);
            }
        }
    } catch (const NumericError& e) {
        trace.failed = true;
        trace.failure = e.what();
        return trace;
    }

    double acc = 0.0;
    for (int i = cfg.epochs - cfg.window + 1; i <= cfg.epochs; ++i) acc += trace.rnd[i];
    trace.rnd_hat = acc / static_cast<double>(cfg.window);
    return trace;
}

template <typename T>
BatchForward<T> tensor_forward(const TensorDataset& ds) {
    return [&ds](const Network<T>& net, const std::vector<int64_t>& indices) {
        const int64_t per = ds.example_size();
        std::vector<T> vals(indices.size() * static_cast<size_t>(per));
        for (size_t i = 0; i < indices.size(); ++i) {
            const float* src = ds.example(indices[i]);
            T* dst = vals.data() + i * per;
            for (int64_t j = 0; j < per; ++j) dst[j] = static_cast<T>(src[j]);
        }
        std::vector<int64_t> shape = {static_cast<int64_t>(indices.size())};
        shape.insert(shape.end(), ds.example_shape.begin(), ds.example_shape.end());
        return forward(net, make_tensor<T>(std::move(shape), std::move(vals)));
    };
}

template <typename T>
BatchForward<T> token_forward(const TokenDataset& ds, int64_t pad_len) {
    return [&ds, pad_len](const Network<T>& net, const std::vector<int64_t>& indices) {
        std::vector<std::vector<int32_t>> seqs(indices.size());
        for (size_t i = 0; i < indices.size(); ++i) {
            seqs[i] = ds.sequences[static_cast<size_t>(indices[i])];
        }
        return forward_tokens(net, seqs, pad_len);
    };
}

}  // namespace detail

// Single distillation run on prepared (already normalized) tensor data.
template <typename T>
RunTrace single_run(const TensorDataset& prepared, const NetworkSpec& spec, const TrainConfig& cfg,
                    uint64_t run_seed) {
    validate_config(cfg);
    if (cfg.train_size >= prepared.count) {
        throw ConfigError("train_size " + std::to_string(cfg.train_size) +
                          " must be below the dataset size " + std::to_string(prepared.count));
    }
    return detail::single_run_core<T>(prepared.count, detail::tensor_forward<T>(prepared), spec,
                                      cfg, run_seed);
}

template <typename T>
RunTrace single_run(const TokenDataset& ds, const NetworkSpec& spec, const TrainConfig& cfg,
                    uint64_t run_seed) {
    validate_config(cfg);
    const int64_t total = static_cast<int64_t>(ds.sequences.size());
    if (cfg.train_size >= total) {
        throw ConfigError("train_size " + std::to_string(cfg.train_size) +
                          " must be below the dataset size " + std::to_string(total));
    }
    if (ds.max_seq_len > spec.max_seq_len) {
        throw ConfigError("dataset max_seq_len " + std::to_string(ds.max_seq_len) +
                          " exceeds network max_seq_len " + std::to_string(spec.max_seq_len));
    }
    return detail::single_run_core<T>(total, detail::token_forward<T>(ds, ds.max_seq_len), spec,
                                      cfg, run_seed);
}

// Eq. 3: mean of per-run scores over `runs` independent runs (seeds
// seed+1..seed+runs). Runs may execute on `threads` workers; results are
// identical to serial execution. Fails if fewer than half the runs succeed.
RndReport rnd_score(const TensorDataset& ds, const NetworkSpec& spec, const TrainConfig& cfg,
                    int threads = 1);
RndReport rnd_score(const TokenDataset& ds, const NetworkSpec& spec, const TrainConfig& cfg,
                    int threads = 1);

}  // namespace rnddiv
