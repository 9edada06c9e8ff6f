#include "rnddiv/score.hpp"

#include <atomic>
#include <cmath>
#include <thread>

#include "rnddiv/rng.hpp"

namespace rnddiv {

void validate_config(const TrainConfig& cfg) {
    if (cfg.learning_rate <= 0) throw ConfigError("config: learning_rate must be positive");
    if (cfg.momentum < 0 || cfg.momentum >= 1) throw ConfigError("config: momentum must lie in [0, 1)");
    if (cfg.epochs < 1) throw ConfigError("config: epochs must be >= 1");
    if (cfg.window < 1 || cfg.window > cfg.epochs) {
        throw ConfigError("config: window must lie in [1, epochs]");
    }
    if (cfg.runs < 1) throw ConfigError("config: runs must be >= 1");
    if (cfg.train_size < 1) throw ConfigError("config: train_size must be >= 1");
    if (cfg.batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
}

CiResult confidence_interval(const std::vector<double>& per_run) {
    if (per_run.empty()) throw UsageError("confidence_interval: empty list");
    CiResult res;
    double acc = 0.0;
    for (double v : per_run) acc += v;
    res.mean = acc / static_cast<double>(per_run.size());
    if (per_run.size() == 1) return res;  // mean only
    double ss = 0.0;
    for (double v : per_run) ss += (v - res.mean) * (v - res.mean);
    res.stddev = std::sqrt(ss / static_cast<double>(per_run.size() - 1));
    res.ci95 = 1.96 * res.stddev / std::sqrt(static_cast<double>(per_run.size()));
    return res;
}

std::pair<TensorDataset, ChannelStats> normalize(const TensorDataset& ds) {
    if (ds.count < 1 || ds.values.empty()) throw DataError("normalize: empty dataset");
    const int64_t channels = ds.example_shape[0];
    const int64_t per = ds.example_size();
    const int64_t chan_size = per / channels;
    const int64_t samples = ds.count * chan_size;

    ChannelStats stats;
    stats.mean.assign(channels, 0.0);
    stats.stddev.assign(channels, 0.0);
    stats.degenerate.assign(channels, false);

    for (int64_t c = 0; c < channels; ++c) {
        double acc = 0.0;
        for (int64_t e = 0; e < ds.count; ++e) {
            const float* block = ds.values.data() + e * per + c * chan_size;
            for (int64_t j = 0; j < chan_size; ++j) acc += block[j];
        }
        const double mean = acc / static_cast<double>(samples);
        double ss = 0.0;
        for (int64_t e = 0; e < ds.count; ++e) {
            const float* block = ds.values.data() + e * per + c * chan_size;
            for (int64_t j = 0; j < chan_size; ++j) {
                const double d = block[j] - mean;
                ss += d * d;
            }
        }
        const double sd = std::sqrt(ss / static_cast<double>(samples));
        stats.mean[c] = mean;
        stats.stddev[c] = sd;
        stats.degenerate[c] = sd < 1e-8;
    }

    std::vector<float> out(ds.values.size());
    for (int64_t e = 0; e < ds.count; ++e) {
        for (int64_t c = 0; c < channels; ++c) {
            const float* src = ds.values.data() + e * per + c * chan_size;
            float* dst = out.data() + e * per + c * chan_size;
            const double mean = stats.mean[c];
            const double inv = stats.degenerate[c] ? 1.0 : 1.0 / stats.stddev[c];
            for (int64_t j = 0; j < chan_size; ++j) {
                dst[j] = static_cast<float>((src[j] - mean) * inv);
            }
        }
    }
    return {make_tensor_dataset(ds.example_shape, ds.count, std::move(out)), std::move(stats)};
}

std::pair<std::vector<int64_t>, std::vector<int64_t>> split_indices(int64_t n, int64_t k,
                                                                    uint64_t seed) {
    if (k < 1 || k >= n) {
        throw ConfigError("split: train size " + std::to_string(k) + " out of range for dataset of " +
                          std::to_string(n));
    }
    std::vector<int64_t> perm(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) perm[i] = i;
    Rng rng(seed);
    rng.shuffle(perm);
    std::vector<int64_t> train(perm.begin(), perm.begin() + k);
    std::vector<int64_t> val(perm.begin() + k, perm.end());
    return {std::move(train), std::move(val)};
}

double rnd_epoch(double mse_val, double mse_train, bool* degenerate) {
    if (!std::isfinite(mse_val) || !std::isfinite(mse_train) || mse_val < 0 || mse_train < 0) {
        throw NumericError("rnd_epoch: losses must be finite and non-negative");
    }
    if (mse_val == 0.0 && mse_train == 0.0) {
        if (degenerate) *degenerate = true;
        return 0.0;
    }
    return (mse_val - mse_train) / (mse_val + mse_train);
}

namespace {

template <typename RunFn>
RndReport score_over_runs(RunFn run_one, const NetworkSpec& spec, const TrainConfig& cfg,
                          int threads, std::string fingerprint,
                          std::optional<ChannelStats> norm_stats) {
    RndReport report;
    report.config = cfg;
    report.net_spec = spec;
    report.dataset_fingerprint = std::move(fingerprint);
    report.normalization = std::move(norm_stats);
    report.traces.resize(static_cast<size_t>(cfg.runs));

    const int workers = std::max(1, std::min<int>(threads, cfg.runs));
    if (workers == 1) {
        for (int j = 0; j < cfg.runs; ++j) {
            report.traces[j] = run_one(cfg.seed + 1 + static_cast<uint64_t>(j));
        }
    } else {
        // Runs are independent; traces land in seed-indexed slots so the
        // aggregate is byte-identical to a serial execution.
        std::atomic<int> next{0};
        auto worker = [&]() {
            for (;;) {
                const int j = next.fetch_add(1);
                if (j >= cfg.runs) return;
                report.traces[j] = run_one(cfg.seed + 1 + static_cast<uint64_t>(j));
            }
        };
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(workers));
        for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    for (const auto& trace : report.traces) {
        if (trace.failed) {
            report.failed_seeds.push_back(trace.run_seed);
        } else {
            report.per_run.push_back(trace.rnd_hat);
        }
    }
    if (2 * static_cast<int>(report.per_run.size()) < cfg.runs) {
        throw NumericError("rnd_score: " + std::to_string(report.failed_seeds.size()) + " of " +
                           std::to_string(cfg.runs) + " runs failed (non-finite training loss)");
    }
    const CiResult ci = confidence_interval(report.per_run);
    report.score = ci.mean;
    report.stddev = ci.stddev;
    report.ci95 = ci.ci95;
    return report;
}

}  // namespace

RndReport rnd_score(const TensorDataset& ds, const NetworkSpec& spec, const TrainConfig& cfg,
                    int threads) {
    validate_config(cfg);
    if (cfg.train_size >= ds.count) {
        throw ConfigError("train_size " + std::to_string(cfg.train_size) +
                          " must be below the dataset size " + std::to_string(ds.count));
    }
    const bool do_norm = cfg.normalize_inputs.value_or(true);
    std::optional<ChannelStats> stats;
    const TensorDataset* prepared = &ds;
    TensorDataset normalized;
    if (do_norm) {
        auto [nds, st] = normalize(ds);
        normalized = std::move(nds);
        stats = std::move(st);
        prepared = &normalized;
    }
    auto run_one = [&](uint64_t run_seed) {
        return cfg.precision == Precision::f32
                   ? single_run<float>(*prepared, spec, cfg, run_seed)
                   : single_run<double>(*prepared, spec, cfg, run_seed);
    };
    return score_over_runs(run_one, spec, cfg, threads, ds.fingerprint, std::move(stats));
}

RndReport rnd_score(const TokenDataset& ds, const NetworkSpec& spec, const TrainConfig& cfg,
                    int threads) {
    validate_config(cfg);
    if (cfg.normalize_inputs.value_or(false)) {
        throw ConfigError("normalize_inputs does not apply to token datasets");
    }
    auto run_one = [&](uint64_t run_seed) {
        return cfg.precision == Precision::f32 ? single_run<float>(ds, spec, cfg, run_seed)
                                               : single_run<double>(ds, spec, cfg, run_seed);
    };
    return score_over_runs(run_one, spec, cfg, threads, ds.fingerprint, std::nullopt);
}

}  // namespace rnddiv
