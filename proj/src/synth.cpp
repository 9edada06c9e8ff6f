#include "rnddiv/synth.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "rnddiv/rng.hpp"

namespace rnddiv {

namespace {

int64_t numel(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t e : shape) n *= e;
    return n;
}

void check_shape(const std::vector<int64_t>& shape) {
    if (shape.empty() || shape.size() > 3) throw ConfigError("generator: shape must have 1 to 3 axes");
    for (int64_t e : shape) {
        if (e < 1) throw ConfigError("generator: shape extents must be positive");
    }
}

}  // namespace

namespace {

void validate_trunc_spec(const TruncGenSpec& spec) {
    check_shape(spec.output_shape);
    if (spec.latent_dim < 1) throw ConfigError("gen_truncated: latent_dim must be >= 1");
    if (spec.count < 2) throw ConfigError("gen_truncated: count must be >= 2");
    if (!(spec.truncation > 0)) throw ConfigError("gen_truncated: truncation must be positive");

    // Acceptance probability per coordinate is P(|z| <= t) = erf(t / sqrt(2));
    // refuse settings where rejection sampling would need > 1e6 tries.
    const double accept = std::erf(spec.truncation / std::sqrt(2.0));
    if (accept < 1e-6) {
        // smallest workable truncation: erf(t / sqrt(2)) = 1e-6, solved by bisection
        double lo = 0.0, hi = 1.0;
        for (int i = 0; i < 80; ++i) {
            const double mid = 0.5 * (lo + hi);
            (std::erf(mid / std::sqrt(2.0)) < 1e-6 ? lo : hi) = mid;
        }
        throw ConfigError("gen_truncated: truncation " + std::to_string(spec.truncation) +
                          " would reject > 1e6 samples per coordinate; use t >= " + std::to_string(hi));
    }
}

}  // namespace

TruncGenParams trunc_generator_params(const TruncGenSpec& spec) {
    validate_trunc_spec(spec);
    // Parameters come from their own stream so they do not depend on the
    // truncation value or sample count.
    TruncGenParams p;
    p.hidden = 64;
    const int64_t out_dim = numel(spec.output_shape);
    const int64_t latent = spec.latent_dim;
    Rng rng(derive_seed(spec.generator_seed, 101));
    p.w1.resize(static_cast<size_t>(latent * p.hidden));
    p.b1.resize(static_cast<size_t>(p.hidden));
    p.w2.resize(static_cast<size_t>(p.hidden * out_dim));
    p.b2.resize(static_cast<size_t>(out_dim));
    const double bound1 = std::sqrt(6.0 / static_cast<double>(latent));
    const double bound2 = std::sqrt(6.0 / static_cast<double>(p.hidden));
    for (auto& v : p.w1) v = static_cast<float>(rng.uniform(-bound1, bound1));
    // biases off-center so relu kinks land inside the truncated latent range
    for (auto& v : p.b1) v = static_cast<float>(rng.uniform(-0.5, 0.5));
    for (auto& v : p.w2) v = static_cast<float>(rng.uniform(-bound2, bound2));
    for (auto& v : p.b2) v = static_cast<float>(rng.uniform(-0.5, 0.5));
    return p;
}

std::vector<float> truncated_latents(const TruncGenSpec& spec) {
    validate_trunc_spec(spec);
    Rng rng(derive_seed(spec.generator_seed, 202));
    std::vector<float> z(static_cast<size_t>(spec.count) * spec.latent_dim);
    for (auto& zi : z) {
        double v;
        do {
            v = rng.normal();
        } while (std::abs(v) > spec.truncation);
        zi = static_cast<float>(v);
    }
    return z;
}

TensorDataset gen_truncated(const TruncGenSpec& spec) {
    const TruncGenParams p = trunc_generator_params(spec);
    const std::vector<float> latents = truncated_latents(spec);
    const int64_t out_dim = numel(spec.output_shape);
    const int64_t latent = spec.latent_dim;
    const int64_t hidden = p.hidden;

    std::vector<float> values(static_cast<size_t>(spec.count * out_dim));
    std::vector<float> h(static_cast<size_t>(hidden));
    for (int64_t e = 0; e < spec.count; ++e) {
        const float* z = latents.data() + e * latent;
        for (int64_t j = 0; j < hidden; ++j) {
            float acc = p.b1[j];
            for (int64_t i = 0; i < latent; ++i) acc += z[i] * p.w1[i * hidden + j];
            h[j] = acc > 0.f ? acc : 0.f;
        }
        float* out = values.data() + e * out_dim;
        for (int64_t k = 0; k < out_dim; ++k) {
            float acc = p.b2[k];
            for (int64_t j = 0; j < hidden; ++j) acc += h[j] * p.w2[j * out_dim + k];
            out[k] = acc;
        }
    }
    return make_tensor_dataset(spec.output_shape, spec.count, std::move(values));
}

MixtureSample gen_mixture_full(const MixtureSpec& spec) {
    check_shape(spec.shape);
    if (spec.modes < 1) throw ConfigError("gen_mixture: modes must be >= 1");
    if (!(spec.sigma > 0)) throw ConfigError("gen_mixture: sigma must be positive");
    if (spec.count < 2) throw ConfigError("gen_mixture: count must be >= 2");

    const int64_t dim = numel(spec.shape);
    Rng rng(splitmix64(spec.seed));

    MixtureSample sample;
    sample.centers.resize(static_cast<size_t>(spec.modes));
    for (auto& center : sample.centers) {
        center.resize(static_cast<size_t>(dim));
        double norm2 = 0.0;
        std::vector<double> dir(static_cast<size_t>(dim));
        for (auto& v : dir) {
            v = rng.normal();
            norm2 += v * v;
        }
        const double norm = std::sqrt(norm2);
        const double radius =
            spec.center_scale * std::pow(rng.uniform01(), 1.0 / static_cast<double>(dim));
        for (int64_t i = 0; i < dim; ++i) {
            center[i] = static_cast<float>(norm > 0 ? dir[i] / norm * radius : 0.0);
        }
    }

    std::vector<float> values(static_cast<size_t>(spec.count * dim));
    sample.labels.resize(static_cast<size_t>(spec.count));
    for (int64_t e = 0; e < spec.count; ++e) {
        const int mode = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(spec.modes)));
        sample.labels[e] = mode;
        const auto& center = sample.centers[mode];
        float* out = values.data() + e * dim;
        for (int64_t i = 0; i < dim; ++i) {
            out[i] = static_cast<float>(center[i] + spec.sigma * rng.normal());
        }
    }
    sample.data = make_tensor_dataset(spec.shape, spec.count, std::move(values));
    return sample;
}

TensorDataset gen_mixture(const MixtureSpec& spec) { return gen_mixture_full(spec).data; }

TensorDataset gen_noise(const std::vector<int64_t>& shape, int64_t count, uint64_t seed) {
    check_shape(shape);
    if (count < 2) throw ConfigError("gen_noise: count must be >= 2");
    const int64_t dim = numel(shape);
    Rng rng(splitmix64(seed));
    std::vector<float> values(static_cast<size_t>(count * dim));
    for (auto& v : values) v = static_cast<float>(rng.uniform01());
    return make_tensor_dataset(shape, count, std::move(values));
}

TokenDataset gen_zipf_corpus(const ZipfCorpusSpec& spec) {
    if (spec.vocab_size < 2) throw ConfigError("gen_zipf_corpus: vocab_size must be >= 2");
    if (!(spec.exponent > 0)) throw ConfigError("gen_zipf_corpus: exponent must be positive");
    if (spec.len_min < 1 || spec.len_max < spec.len_min) {
        throw ConfigError("gen_zipf_corpus: need 1 <= len_min <= len_max");
    }
    if (spec.count < 2) throw ConfigError("gen_zipf_corpus: count must be >= 2");

    // Inverse-CDF sampling over cumulative rank weights 1/j^s.
    std::vector<double> cum(static_cast<size_t>(spec.vocab_size));
    double total = 0.0;
    for (int j = 0; j < spec.vocab_size; ++j) {
        total += std::pow(static_cast<double>(j + 1), -spec.exponent);
        cum[j] = total;
    }

    Rng rng(splitmix64(spec.seed));
    std::vector<std::vector<int32_t>> sequences(static_cast<size_t>(spec.count));
    for (auto& seq : sequences) {
        const int64_t len =
            spec.len_min + static_cast<int64_t>(rng.uniform_int(spec.len_max - spec.len_min + 1));
        seq.resize(static_cast<size_t>(len));
        for (auto& id : seq) {
            const double u = rng.uniform01() * total;
            const auto it = std::upper_bound(cum.begin(), cum.end(), u);
            const int rank = static_cast<int>(std::min<ptrdiff_t>(it - cum.begin(), spec.vocab_size - 1));
            id = static_cast<int32_t>(rank + 2);  // 0 = pad, 1 = unk
        }
    }

    std::vector<std::string> vocab = {"<pad>", "<unk>"};
    vocab.reserve(static_cast<size_t>(spec.vocab_size) + 2);
    for (int j = 1; j <= spec.vocab_size; ++j) vocab.push_back("w" + std::to_string(j));
    return make_token_dataset(std::move(sequences), std::move(vocab), spec.len_max);
}

TokenDataset vocab_truncate(const TokenDataset& ds, int64_t k) {
    if (k < 1) throw ConfigError("vocab_truncate: k must be >= 1");

    struct Entry {
        int64_t count = 0;
        int64_t first = 0;
    };
    std::unordered_map<int32_t, Entry> freq;
    int64_t pos = 0;
    for (const auto& seq : ds.sequences) {
        for (int32_t id : seq) {
            if (id >= 2) {
                auto [it, fresh] = freq.try_emplace(id);
                if (fresh) it->second.first = pos;
                ++it->second.count;
            }
            ++pos;
        }
    }
    if (k >= static_cast<int64_t>(freq.size())) return ds;  // nothing to truncate

    std::vector<std::pair<int32_t, Entry>> order(freq.begin(), freq.end());
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
        if (a.second.count != b.second.count) return a.second.count > b.second.count;
        return a.second.first < b.second.first;
    });

    std::unordered_map<int32_t, int32_t> remap;
    std::vector<std::string> vocab = {"<pad>", "<unk>"};
    for (int64_t i = 0; i < k; ++i) {
        remap[order[i].first] = static_cast<int32_t>(2 + i);
        vocab.push_back(ds.vocab[static_cast<size_t>(order[i].first)]);
    }

    std::vector<std::vector<int32_t>> sequences = ds.sequences;
    for (auto& seq : sequences) {
        for (auto& id : seq) {
            if (id < 2) continue;
            auto it = remap.find(id);
            id = it == remap.end() ? 1 : it->second;
        }
    }
    return make_token_dataset(std::move(sequences), std::move(vocab), ds.max_seq_len);
}

}  // namespace rnddiv
