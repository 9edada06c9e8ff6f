#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "rnddiv/score.hpp"
#include "rnddiv/synth.hpp"

using namespace rnddiv;

namespace {

NetworkSpec small_mlp(int in_dim) {
    NetworkSpec s;
    s.kind = NetKind::mlp;
    s.depth = 1;
    s.width = 16;
    s.feature_dim = 8;
    s.input_shape = {in_dim};
    return s;
}

TrainConfig small_config() {
    TrainConfig cfg;
    cfg.epochs = 8;
    cfg.window = 4;
    cfg.runs = 4;
    cfg.train_size = 40;
    cfg.batch_size = 16;
    cfg.seed = 100;
    return cfg;
}

TensorDataset random_dataset(uint64_t seed, int64_t n, std::vector<int64_t> shape) {
    Rng rng(seed);
    int64_t per = 1;
    for (auto e : shape) per *= e;
    std::vector<float> vals(static_cast<size_t>(n * per));
    for (auto& v : vals) v = static_cast<float>(rng.uniform(-3, 5));
    return make_tensor_dataset(std::move(shape), n, std::move(vals));
}

}  // namespace

TEST_CASE("normalize standardizes each channel") {
    auto ds = random_dataset(7, 200, {3, 4, 4});
    auto [out, stats] = normalize(ds);
    REQUIRE(stats.mean.size() == 3);

    // recompute stats on the output: near zero mean, unit std
    const int64_t per = out.example_size(), chan = 16;
    for (int64_t c = 0; c < 3; ++c) {
        double acc = 0.0, ss = 0.0;
        for (int64_t e = 0; e < out.count; ++e) {
            const float* block = out.example(e) + c * chan;
            for (int64_t j = 0; j < chan; ++j) acc += block[j];
        }
        const double mean = acc / static_cast<double>(out.count * chan);
        for (int64_t e = 0; e < out.count; ++e) {
            const float* block = out.example(e) + c * chan;
            for (int64_t j = 0; j < chan; ++j) ss += (block[j] - mean) * (block[j] - mean);
        }
        const double sd = std::sqrt(ss / static_cast<double>(out.count * chan));
        CHECK(std::abs(mean) < 1e-6);
        CHECK(std::abs(sd - 1.0) < 1e-6);
        CHECK_FALSE(stats.degenerate[c]);
    }
    (void)per;

    // already-standard data passes through unchanged
    auto [twice, stats2] = normalize(out);
    for (size_t i = 0; i < out.values.size(); ++i) {
        CHECK(std::abs(twice.values[i] - out.values[i]) < 1e-6);
    }
}

TEST_CASE("normalize shifts constant channels and flags them") {
    std::vector<float> vals;
    for (int e = 0; e < 4; ++e) {
        vals.push_back(7.5f);  // channel 0 constant
        vals.push_back(static_cast<float>(e));  // channel 1 varies
    }
    auto ds = make_tensor_dataset({2, 1}, 4, std::move(vals));
    auto [out, stats] = normalize(ds);
    CHECK(stats.degenerate[0]);
    CHECK_FALSE(stats.degenerate[1]);
    for (int e = 0; e < 4; ++e) CHECK(out.example(e)[0] == 0.0f);
}

TEST_CASE("split produces disjoint exhaustive index sets") {
    auto [train, val] = split_indices(5, 2, 9);
    CHECK(train.size() == 2);
    CHECK(val.size() == 3);
    std::vector<int64_t> all = train;
    all.insert(all.end(), val.begin(), val.end());
    std::sort(all.begin(), all.end());
    CHECK(all == std::vector<int64_t>{0, 1, 2, 3, 4});

    auto [t2, v2] = split_indices(5, 2, 9);
    CHECK(t2 == train);
    CHECK(v2 == val);

    CHECK_THROWS_AS(split_indices(5, 5, 1), ConfigError);
    CHECK_THROWS_AS(split_indices(5, 0, 1), ConfigError);
}

TEST_CASE("split is uniform over 1000 seeds") {
    // |S| = 10, k = 5: each element lands in train with p = 1/2.
    // Binomial(1000, 1/2): 3 sigma is about 47.
    std::vector<int> hits(10, 0);
    for (uint64_t seed = 0; seed < 1000; ++seed) {
        auto [train, val] = split_indices(10, 5, seed);
        for (int64_t i : train) ++hits[static_cast<size_t>(i)];
    }
    for (int h : hits) {
        CHECK(h > 500 - 48);
        CHECK(h < 500 + 48);
    }
}

TEST_CASE("rnd_epoch arithmetic") {
    CHECK(rnd_epoch(0.3, 0.1) == doctest::Approx(0.5));
    CHECK(rnd_epoch(0.7, 0.7) == doctest::Approx(0.0));
    CHECK(rnd_epoch(0.2, 0.0) == doctest::Approx(1.0));
    CHECK(rnd_epoch(0.0, 0.2) == doctest::Approx(-1.0));

    bool degen = false;
    CHECK(rnd_epoch(0.0, 0.0, &degen) == 0.0);
    CHECK(degen);

    CHECK_THROWS_AS(rnd_epoch(-0.1, 0.2), NumericError);
    CHECK_THROWS_AS(rnd_epoch(std::nan(""), 0.2), NumericError);
}

TEST_CASE("confidence interval formulas") {
    auto flat = confidence_interval({1, 1, 1, 1});
    CHECK(flat.mean == doctest::Approx(1.0));
    CHECK(flat.stddev == doctest::Approx(0.0));
    CHECK(flat.ci95 == doctest::Approx(0.0));

    // [0, 2]: mean 1, sample stddev sqrt(2), ci = 1.96*sqrt(2)/sqrt(2) = 1.96
    auto two = confidence_interval({0, 2});
    CHECK(two.mean == doctest::Approx(1.0));
    CHECK(two.stddev == doctest::Approx(std::sqrt(2.0)));
    CHECK(two.ci95 == doctest::Approx(1.96));

    auto single = confidence_interval({0.25});
    CHECK(single.mean == doctest::Approx(0.25));
    CHECK(single.stddev == 0.0);

    CHECK_THROWS_AS(confidence_interval({}), UsageError);

    // 40 seeded standard normal draws
    Rng rng(2024);
    std::vector<double> draws(40);
    for (auto& d : draws) d = rng.normal();
    auto ci = confidence_interval(draws);
    CHECK(std::abs(ci.mean) < 0.5);
    CHECK(ci.stddev > 0.7);
    CHECK(ci.stddev < 1.3);
}

TEST_CASE("identical-example dataset has zero gap at every epoch") {
    std::vector<float> one(12);
    Rng rng(3);
    for (auto& v : one) v = static_cast<float>(rng.uniform(-1, 1));
    std::vector<float> vals;
    for (int e = 0; e < 60; ++e) vals.insert(vals.end(), one.begin(), one.end());
    auto ds = make_tensor_dataset({12}, 60, std::move(vals));

    auto cfg = small_config();
    cfg.precision = Precision::f64;
    auto trace = single_run<double>(ds, small_mlp(12), cfg, 1);
    REQUIRE_FALSE(trace.failed);
    REQUIRE(trace.rnd.size() == static_cast<size_t>(cfg.epochs + 1));
    for (double r : trace.rnd) CHECK(std::abs(r) < 1e-6);
}

TEST_CASE("single_run is bitwise deterministic") {
    auto ds = random_dataset(11, 80, {8});
    auto cfg = small_config();
    auto a = single_run<float>(ds, small_mlp(8), cfg, 5);
    auto b = single_run<float>(ds, small_mlp(8), cfg, 5);
    CHECK(a.mse_train == b.mse_train);
    CHECK(a.mse_val == b.mse_val);
    CHECK(a.rnd == b.rnd);
    CHECK(a.rnd_hat == b.rnd_hat);

    auto c = single_run<float>(ds, small_mlp(8), cfg, 6);
    CHECK(a.rnd_hat != c.rnd_hat);
}

TEST_CASE("traces hold epochs 0..n and bounded gaps") {
    auto ds = random_dataset(13, 80, {8});
    auto cfg = small_config();
    auto trace = single_run<float>(ds, small_mlp(8), cfg, 2);
    CHECK(trace.mse_train.size() == static_cast<size_t>(cfg.epochs + 1));
    CHECK(trace.mse_val.size() == static_cast<size_t>(cfg.epochs + 1));
    for (double r : trace.rnd) {
        CHECK(r >= -1.0);
        CHECK(r <= 1.0);
    }
    // rnd_hat averages the final `window` epochs
    double acc = 0.0;
    for (int i = cfg.epochs - cfg.window + 1; i <= cfg.epochs; ++i) acc += trace.rnd[i];
    CHECK(trace.rnd_hat == doctest::Approx(acc / cfg.window).epsilon(1e-12));
}

TEST_CASE("rnd_score with one run echoes that run") {
    auto ds = random_dataset(17, 80, {8});
    auto cfg = small_config();
    cfg.runs = 1;
    auto report = rnd_score(ds, small_mlp(8), cfg);
    auto norm = normalize(ds).first;
    auto trace = single_run<float>(norm, small_mlp(8), cfg, cfg.seed + 1);
    CHECK(report.score == trace.rnd_hat);
    CHECK(report.per_run.size() == 1);
    CHECK(report.dataset_fingerprint == ds.fingerprint);
}

TEST_CASE("rnd_score is independent of thread count") {
    auto ds = random_dataset(19, 80, {8});
    auto cfg = small_config();
    cfg.runs = 6;
    auto serial = rnd_score(ds, small_mlp(8), cfg, 1);
    auto parallel = rnd_score(ds, small_mlp(8), cfg, 4);
    CHECK(serial.per_run == parallel.per_run);  // bitwise
    CHECK(serial.score == parallel.score);
    CHECK(serial.stddev == parallel.stddev);
    CHECK(serial.ci95 == parallel.ci95);

    // ci95 = 1.96 * stddev / sqrt(r)
    CHECK(serial.ci95 ==
          doctest::Approx(1.96 * serial.stddev / std::sqrt(6.0)).epsilon(1e-9));
}

TEST_CASE("exploding training marks runs failed") {
    auto ds = random_dataset(23, 60, {8});
    auto cfg = small_config();
    cfg.learning_rate = 1e25;  // guaranteed overflow in f32
    cfg.runs = 2;
    CHECK_THROWS_WITH_AS(rnd_score(ds, small_mlp(8), cfg), doctest::Contains("runs failed"),
                         NumericError);

    auto norm = normalize(ds).first;
    auto trace = single_run<float>(norm, small_mlp(8), cfg, 1);
    CHECK(trace.failed);
    CHECK(trace.failure.find("epoch") != std::string::npos);
}

TEST_CASE("config validation names the constraint") {
    auto ds = random_dataset(29, 20, {4});
    auto cfg = small_config();
    cfg.window = 20;  // > epochs
    CHECK_THROWS_WITH_AS(rnd_score(ds, small_mlp(4), cfg), doctest::Contains("window"), ConfigError);

    cfg = small_config();
    cfg.train_size = 50;  // >= dataset size
    CHECK_THROWS_WITH_AS(rnd_score(ds, small_mlp(4), cfg), doctest::Contains("train_size"),
                         ConfigError);

    cfg = small_config();
    cfg.momentum = 1.0;
    CHECK_THROWS_AS(rnd_score(ds, small_mlp(4), cfg), ConfigError);
}

TEST_CASE("rnd_epoch is exactly scale invariant for homogeneous nets") {
    // fixed parameter snapshot, bias-free relu net, 64-bit: scaling the data
    // by c scales both MSEs by c^2, so the normalized gap is unchanged
    NetworkSpec spec = small_mlp(8);
    spec.homogeneous = true;
    auto target = build_network<double>(spec, 51);
    set_frozen(target);
    auto pred = build_network<double>(spec, 52);

    auto ds = random_dataset(31, 50, {8});
    auto [train_idx, val_idx] = split_indices(ds.count, 20, 77);

    auto split_mse = [&](const std::vector<int64_t>& idx, double scale) {
        NoGradGuard eval;
        double acc = 0.0;
        for (int64_t i : idx) {
            std::vector<double> vals(8);
            for (int j = 0; j < 8; ++j) vals[j] = scale * ds.example(i)[j];
            auto x = make_tensor<double>({1, 8}, vals);
            auto tf = forward(target, x);
            auto pf = forward(pred, x);
            for (int j = 0; j < spec.feature_dim; ++j) {
                const double d = tf->value[j] - pf->value[j];
                acc += d * d;
            }
        }
        return acc / static_cast<double>(idx.size());
    };

    const double base = rnd_epoch(split_mse(val_idx, 1.0), split_mse(train_idx, 1.0));
    for (double c : {0.5, 2.0, 10.0}) {
        const double scaled = rnd_epoch(split_mse(val_idx, c), split_mse(train_idx, c));
        CHECK(std::abs(scaled - base) <= 1e-6 * std::max(1.0, std::abs(base)));
    }
}

TEST_CASE("more mixture modes score higher") {
    // single-channel image shape: normalization is a global shift/scale, so
    // the spatial center patterns carry the mode structure through it
    MixtureSpec one;
    one.modes = 1;
    one.shape = {1, 4, 4};
    one.sigma = 0.05;
    one.center_scale = 1.0;
    one.seed = 5;
    one.count = 150;
    MixtureSpec many = one;
    many.modes = 16;

    TrainConfig cfg;
    cfg.epochs = 12;
    cfg.window = 6;
    cfg.runs = 8;
    cfg.train_size = 60;
    cfg.batch_size = 32;
    cfg.seed = 300;

    NetworkSpec spec = small_mlp(16);
    spec.input_shape = {1, 4, 4};
    auto low = rnd_score(gen_mixture(one), spec, cfg, 2);
    auto high = rnd_score(gen_mixture(many), spec, cfg, 2);
    CHECK(high.score > low.score);
}
