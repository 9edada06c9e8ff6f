#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "rnddiv/rng.hpp"
#include "rnddiv/synth.hpp"

using namespace rnddiv;

namespace {

double mean_of(const std::vector<float>& v) {
    double acc = 0.0;
    for (float x : v) acc += x;
    return acc / static_cast<double>(v.size());
}

double var_of(const std::vector<float>& v) {
    const double m = mean_of(v);
    double acc = 0.0;
    for (float x : v) acc += (x - m) * (x - m);
    return acc / static_cast<double>(v.size());
}

// variance of N(0,1) truncated to [-t, t]: 1 - 2 t phi(t) / (2 Phi(t) - 1)
double truncated_normal_variance(double t) {
    const double phi = std::exp(-0.5 * t * t) / std::sqrt(2.0 * 3.14159265358979323846);
    const double mass = std::erf(t / std::sqrt(2.0));
    return 1.0 - 2.0 * t * phi / mass;
}

}  // namespace

TEST_CASE("gen_truncated is deterministic and freezes the generator across t") {
    TruncGenSpec a;
    a.latent_dim = 6;
    a.output_shape = {1, 5, 5};
    a.truncation = 0.5;
    a.generator_seed = 9;
    a.count = 50;
    auto d1 = gen_truncated(a);
    auto d2 = gen_truncated(a);
    CHECK(d1.values == d2.values);
    CHECK(d1.fingerprint == d2.fingerprint);

    TruncGenSpec b = a;
    b.truncation = 2.0;
    const auto pa = trunc_generator_params(a);
    const auto pb = trunc_generator_params(b);
    CHECK(pa.w1 == pb.w1);
    CHECK(pa.b1 == pb.b1);
    CHECK(pa.w2 == pb.w2);
    CHECK(pa.b2 == pb.b2);

    CHECK(gen_truncated(b).values != d1.values);
}

TEST_CASE("truncated latent variance follows the closed form") {
    TruncGenSpec spec;
    spec.latent_dim = 40;
    spec.output_shape = {4};
    spec.generator_seed = 3;
    spec.count = 3000;

    // wide truncation: acceptance ~ 1, variance ~ 1
    spec.truncation = 8.0;
    auto z_wide = truncated_latents(spec);
    CHECK(var_of(z_wide) == doctest::Approx(1.0).epsilon(0.05));

    // tight truncation: variance ~ t^2 / 3 (exactly the truncated-normal value)
    spec.truncation = 0.1;
    auto z_tight = truncated_latents(spec);
    const double expect = truncated_normal_variance(0.1);
    CHECK(expect == doctest::Approx(0.1 * 0.1 / 3.0).epsilon(0.01));
    CHECK(var_of(z_tight) == doctest::Approx(expect).epsilon(0.10));
    for (float z : z_tight) CHECK(std::abs(z) <= 0.1f);
}

TEST_CASE("hopeless truncation is rejected with a minimum suggestion") {
    TruncGenSpec spec;
    spec.truncation = 1e-8;
    CHECK_THROWS_WITH_AS(gen_truncated(spec), doctest::Contains("use t >="), ConfigError);
}

TEST_CASE("degenerate mixture collapses to near-identical samples") {
    MixtureSpec spec;
    spec.modes = 1;
    spec.shape = {8};
    spec.sigma = 1e-6;
    spec.center_scale = 1.0;
    spec.seed = 4;
    spec.count = 40;
    auto ds = gen_mixture(spec);
    for (int64_t i = 1; i < ds.count; ++i) {
        double dist2 = 0.0;
        for (int64_t j = 0; j < 8; ++j) {
            const double d = ds.example(i)[j] - ds.example(0)[j];
            dist2 += d * d;
        }
        CHECK(std::sqrt(dist2) < 1e-4 * spec.center_scale);
    }
}

TEST_CASE("k-means recovers well-separated mixture modes") {
    MixtureSpec spec;
    spec.modes = 4;
    spec.shape = {6};
    spec.sigma = 0.01;
    spec.center_scale = 10.0;
    spec.seed = 8;
    spec.count = 400;
    auto sample = gen_mixture_full(spec);
    const auto& ds = sample.data;

    // Lloyd iteration seeded from the first example of each true mode.
    std::vector<std::vector<double>> centers(4, std::vector<double>(6, 0.0));
    std::vector<bool> found(4, false);
    for (int64_t i = 0; i < ds.count; ++i) {
        const int m = sample.labels[i];
        if (!found[m]) {
            found[m] = true;
            for (int j = 0; j < 6; ++j) centers[m][j] = ds.example(i)[j];
        }
    }
    std::vector<int> assign(ds.count, 0);
    for (int iter = 0; iter < 20; ++iter) {
        for (int64_t i = 0; i < ds.count; ++i) {
            double best = 1e300;
            for (int c = 0; c < 4; ++c) {
                double d2 = 0.0;
                for (int j = 0; j < 6; ++j) {
                    const double d = ds.example(i)[j] - centers[c][j];
                    d2 += d * d;
                }
                if (d2 < best) {
                    best = d2;
                    assign[i] = c;
                }
            }
        }
        std::vector<std::vector<double>> sums(4, std::vector<double>(6, 0.0));
        std::vector<int> counts(4, 0);
        for (int64_t i = 0; i < ds.count; ++i) {
            ++counts[assign[i]];
            for (int j = 0; j < 6; ++j) sums[assign[i]][j] += ds.example(i)[j];
        }
        for (int c = 0; c < 4; ++c) {
            if (counts[c] == 0) continue;
            for (int j = 0; j < 6; ++j) centers[c][j] = sums[c][j] / counts[c];
        }
    }

    // purity: majority true label per cluster
    int pure = 0;
    for (int c = 0; c < 4; ++c) {
        std::map<int, int> votes;
        for (int64_t i = 0; i < ds.count; ++i) {
            if (assign[i] == c) ++votes[sample.labels[i]];
        }
        int best = 0;
        for (auto& [label, n] : votes) best = std::max(best, n);
        pure += best;
    }
    CHECK(static_cast<double>(pure) / ds.count >= 0.95);
}

TEST_CASE("overall variance grows with mode count") {
    double prev = -1.0;
    for (int m : {1, 4, 16}) {
        MixtureSpec spec;
        spec.modes = m;
        spec.shape = {10};
        spec.sigma = 0.05;
        spec.center_scale = 1.0;
        spec.seed = 10;
        spec.count = 2000;
        const double v = var_of(gen_mixture(spec).values);
        CHECK(v > prev);
        prev = v;
    }
}

TEST_CASE("uniform noise has the right moments") {
    auto ds = gen_noise({40}, 3000, 15);  // 120k draws
    CHECK(mean_of(ds.values) == doctest::Approx(0.5).epsilon(0.02));
    CHECK(std::abs(mean_of(ds.values) - 0.5) < 0.01);
    CHECK(var_of(ds.values) == doctest::Approx(1.0 / 12.0).epsilon(0.05));

    auto same = gen_noise({40}, 3000, 15);
    CHECK(same.values == ds.values);
    auto other = gen_noise({40}, 3000, 16);
    CHECK(other.values != ds.values);
}

TEST_CASE("zipf corpus degenerates at extreme exponents") {
    ZipfCorpusSpec spec;
    spec.vocab_size = 50;
    spec.exponent = 20.0;
    spec.len_min = 4;
    spec.len_max = 8;
    spec.count = 100;
    spec.seed = 6;
    auto ds = gen_zipf_corpus(spec);
    int64_t top = 0, total = 0;
    for (const auto& seq : ds.sequences) {
        for (int32_t id : seq) {
            ++total;
            top += id == 2;  // rank-1 token
        }
    }
    CHECK(static_cast<double>(top) / total > 0.99);
}

TEST_CASE("zipf rank-frequency slope matches the exponent") {
    ZipfCorpusSpec spec;
    spec.vocab_size = 1000;
    spec.exponent = 1.1;
    spec.len_min = 20;
    spec.len_max = 20;
    spec.count = 50000;  // one million tokens
    spec.seed = 26;
    auto ds = gen_zipf_corpus(spec);

    std::vector<int64_t> counts(static_cast<size_t>(spec.vocab_size) + 2, 0);
    for (const auto& seq : ds.sequences) {
        for (int32_t id : seq) ++counts[static_cast<size_t>(id)];
    }
    // least squares on log count vs log rank over the well-populated head
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const int head = 100;
    for (int rank = 1; rank <= head; ++rank) {
        const double x = std::log(static_cast<double>(rank));
        const double y = std::log(static_cast<double>(counts[static_cast<size_t>(rank) + 1]));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double slope = (head * sxy - sx * sy) / (head * sxx - sx * sx);
    CHECK(slope == doctest::Approx(-1.1).epsilon(0.15));
}

TEST_CASE("distinct token count grows with vocab size") {
    int64_t prev = 0;
    for (int v : {50, 200, 800}) {
        ZipfCorpusSpec spec;
        spec.vocab_size = v;
        spec.exponent = 1.1;
        spec.len_min = 10;
        spec.len_max = 20;
        spec.count = 2000;
        spec.seed = 30;
        auto ds = gen_zipf_corpus(spec);
        std::vector<bool> seen(static_cast<size_t>(v) + 2, false);
        int64_t distinct = 0;
        for (const auto& seq : ds.sequences) {
            for (int32_t id : seq) {
                if (!seen[static_cast<size_t>(id)]) {
                    seen[static_cast<size_t>(id)] = true;
                    ++distinct;
                }
            }
        }
        CHECK(distinct > prev);
        prev = distinct;
    }
}

TEST_CASE("vocab_truncate keeps top-k with first-occurrence ties") {
    // "a a b c": keep k=1 -> a stays, b and c turn into <unk>
    auto ds = make_token_dataset({{2, 2, 3, 4}}, {"<pad>", "<unk>", "a", "b", "c"}, 8);
    auto cut = vocab_truncate(ds, 1);
    CHECK(cut.sequences[0] == std::vector<int32_t>{2, 2, 1, 1});
    CHECK(cut.vocab == std::vector<std::string>{"<pad>", "<unk>", "a"});

    // k = 2: tie between b and c broken by first occurrence (b)
    auto cut2 = vocab_truncate(ds, 2);
    CHECK(cut2.vocab == std::vector<std::string>{"<pad>", "<unk>", "a", "b"});
    CHECK(cut2.sequences[0] == std::vector<int32_t>{2, 2, 3, 1});

    // k covering every distinct token: identity
    auto same = vocab_truncate(ds, 3);
    CHECK(same.sequences == ds.sequences);
    CHECK(same.vocab == ds.vocab);
    CHECK(same.fingerprint == ds.fingerprint);
}
