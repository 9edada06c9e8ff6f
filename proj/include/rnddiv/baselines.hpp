#pragma once

#include <cstdint>

#include "rnddiv/dataset.hpp"

namespace rnddiv {

struct NGramProfile {
    int64_t n = 0;
    int64_t total = 0;     // sum over sequences of max(len - n + 1, 0)
    int64_t distinct = 0;  // unique n-grams corpus-wide
};

// Pad tokens are dropped before n-gram extraction for both metrics.
NGramProfile ngram_profile(const TokenDataset& ds, int64_t n);

// distinct / total n-grams over the whole corpus, in [0, 1].
double distinct_n(const TokenDataset& ds, int64_t n);

// Mean over sequences of BLEU against all other sequences as references:
// clipped n-gram precisions (reference clip = max count over references),
// uniform-weight geometric mean up to min(max_n, length), brevity penalty
// exp(1 - r/c) for c < r with r the closest reference length (ties toward
// the shorter). A sequence with any zero precision scores 0. Lower mean
// means more diversity.
double self_bleu(const TokenDataset& ds, int64_t max_n = 4);

}  // namespace rnddiv
