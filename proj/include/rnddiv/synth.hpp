#pragma once

#include <cstdint>
#include <vector>

#include "rnddiv/dataset.hpp"

namespace rnddiv {

// Truncated-latent sampler through a frozen random generator: latents are
// N(0,1) rejection-sampled to |z| <= truncation per coordinate, then pushed
// through a fixed 2-layer relu net seeded by generator_seed. The generator is
// bitwise identical across truncation values, so truncation is the only
// diversity knob in a sweep.
struct TruncGenSpec {
    int latent_dim = 8;
    std::vector<int64_t> output_shape = {1, 6, 6};
    double truncation = 1.0;
    uint64_t generator_seed = 1;
    int64_t count = 600;
};

TensorDataset gen_truncated(const TruncGenSpec& spec);

// The frozen generator's parameters; a function of generator_seed only.
struct TruncGenParams {
    int64_t hidden = 0;
    std::vector<float> w1, b1, w2, b2;
};
TruncGenParams trunc_generator_params(const TruncGenSpec& spec);

// The rejection-sampled latent draws gen_truncated consumes, count x latent_dim.
std::vector<float> truncated_latents(const TruncGenSpec& spec);

// Isotropic Gaussian mixture with centers drawn once from a uniform ball of
// radius center_scale; mode count is the diversity knob.
struct MixtureSpec {
    int modes = 4;
    std::vector<int64_t> shape = {1, 6, 6};
    double sigma = 0.1;
    double center_scale = 1.0;
    uint64_t seed = 1;
    int64_t count = 600;
};

struct MixtureSample {
    TensorDataset data;
    std::vector<std::vector<float>> centers;
    std::vector<int> labels;  // true mode per example
};

MixtureSample gen_mixture_full(const MixtureSpec& spec);
TensorDataset gen_mixture(const MixtureSpec& spec);

// i.i.d. uniform [0,1) entries.
TensorDataset gen_noise(const std::vector<int64_t>& shape, int64_t count, uint64_t seed);

// Token sequences drawn i.i.d. from a Zipf(exponent) law over vocab_size
// types; sequence lengths uniform in [len_min, len_max].
struct ZipfCorpusSpec {
    int vocab_size = 500;
    double exponent = 1.1;
    int len_min = 8;
    int len_max = 24;
    int64_t count = 400;
    uint64_t seed = 1;
};

TokenDataset gen_zipf_corpus(const ZipfCorpusSpec& spec);

// Keeps the k most frequent tokens (ties by first occurrence), maps the rest
// to <unk>, and shrinks the vocab to k+2. Identity when k already covers
// every distinct token.
TokenDataset vocab_truncate(const TokenDataset& ds, int64_t k);

}  // namespace rnddiv
