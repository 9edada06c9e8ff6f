#include "rnddiv/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace rnddiv {

namespace {

std::vector<std::vector<int32_t>> strip_pads(const TokenDataset& ds) {
    std::vector<std::vector<int32_t>> out;
    out.reserve(ds.sequences.size());
    for (const auto& seq : ds.sequences) {
        std::vector<int32_t> s;
        s.reserve(seq.size());
        for (int32_t id : seq) {
            if (id != 0) s.push_back(id);
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::string gram_key(const int32_t* ids, int64_t n) {
    std::string key(static_cast<size_t>(n) * 4, '\0');
    std::memcpy(key.data(), ids, static_cast<size_t>(n) * 4);
    return key;
}

using GramCounts = std::unordered_map<std::string, int64_t>;

GramCounts count_grams(const std::vector<int32_t>& seq, int64_t n) {
    GramCounts counts;
    if (static_cast<int64_t>(seq.size()) >= n) {
        for (int64_t at = 0; at + n <= static_cast<int64_t>(seq.size()); ++at) {
            ++counts[gram_key(seq.data() + at, n)];
        }
    }
    return counts;
}

}  // namespace

NGramProfile ngram_profile(const TokenDataset& ds, int64_t n) {
    if (n < 1) throw ConfigError("ngram_profile: n must be >= 1");
    const auto seqs = strip_pads(ds);
    NGramProfile prof;
    prof.n = n;
    std::unordered_set<std::string> seen;
    for (const auto& seq : seqs) {
        const int64_t len = static_cast<int64_t>(seq.size());
        if (len < n) continue;
        prof.total += len - n + 1;
        for (int64_t at = 0; at + n <= len; ++at) {
            seen.insert(gram_key(seq.data() + at, n));
        }
    }
    prof.distinct = static_cast<int64_t>(seen.size());
    return prof;
}

double distinct_n(const TokenDataset& ds, int64_t n) {
    const NGramProfile prof = ngram_profile(ds, n);
    if (prof.total == 0) {
        throw DataError("distinct_n: no sequence of length >= " + std::to_string(n));
    }
    return static_cast<double>(prof.distinct) / static_cast<double>(prof.total);
}

double self_bleu(const TokenDataset& ds, int64_t max_n) {
    if (max_n < 1) throw ConfigError("self_bleu: max_n must be >= 1");
    const auto seqs = strip_pads(ds);
    const size_t count = seqs.size();
    if (count < 2) throw UsageError("self_bleu: need at least 2 sequences");

    // Per n, track the two largest per-sequence counts of every gram so the
    // reference clip max over j != i is an O(1) lookup.
    struct Best2 {
        int64_t best = 0;
        size_t best_owner = SIZE_MAX;
        int64_t second = 0;
    };
    std::vector<std::vector<GramCounts>> counts(count);  // [seq][n-1]
    std::vector<std::unordered_map<std::string, Best2>> clip(static_cast<size_t>(max_n));
    for (size_t i = 0; i < count; ++i) {
        counts[i].resize(static_cast<size_t>(max_n));
        for (int64_t n = 1; n <= max_n; ++n) {
            counts[i][n - 1] = count_grams(seqs[i], n);
            for (const auto& [key, cnt] : counts[i][n - 1]) {
                Best2& b = clip[n - 1][key];
                if (cnt > b.best) {
                    b.second = b.best;
                    b.best = cnt;
                    b.best_owner = i;
                } else if (cnt > b.second) {
                    b.second = cnt;
                }
            }
        }
    }

    double bleu_sum = 0.0;
    for (size_t i = 0; i < count; ++i) {
        const int64_t c_len = static_cast<int64_t>(seqs[i].size());
        const int64_t n_max = std::min<int64_t>(max_n, std::max<int64_t>(c_len, 1));

        double log_sum = 0.0;
        bool zero = false;
        for (int64_t n = 1; n <= n_max && !zero; ++n) {
            int64_t clipped = 0, total = 0;
            for (const auto& [key, cnt] : counts[i][n - 1]) {
                const Best2& b = clip[n - 1].at(key);
                const int64_t ref_max = b.best_owner == i ? b.second : b.best;
                clipped += std::min(cnt, ref_max);
                total += cnt;
            }
            if (total == 0 || clipped == 0) {
                zero = true;
            } else {
                log_sum += std::log(static_cast<double>(clipped) / static_cast<double>(total));
            }
        }
        if (zero) continue;  // contributes 0

        // closest reference length; ties resolved toward the shorter
        int64_t r_len = -1;
        for (size_t j = 0; j < count; ++j) {
            if (j == i) continue;
            const int64_t len = static_cast<int64_t>(seqs[j].size());
            if (r_len < 0 || std::abs(len - c_len) < std::abs(r_len - c_len) ||
                (std::abs(len - c_len) == std::abs(r_len - c_len) && len < r_len)) {
                r_len = len;
            }
        }
        const double bp = c_len < r_len
                              ? std::exp(1.0 - static_cast<double>(r_len) / static_cast<double>(c_len))
                              : 1.0;
        bleu_sum += std::exp(log_sum / static_cast<double>(n_max)) * bp;
    }
    return bleu_sum / static_cast<double>(count);
}

}  // namespace rnddiv
