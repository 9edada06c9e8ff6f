#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rnddiv/errors.hpp"

namespace rnddiv {

// Fixed-shape numeric samples, stored contiguously row-major as f32
// (matching the on-disk RNDT payload).
struct TensorDataset {
    std::vector<int64_t> example_shape;  // {d} or {c, h, w}
    int64_t count = 0;
    std::vector<float> values;  // count * prod(example_shape)
    std::string fingerprint;

    int64_t example_size() const {
        int64_t n = 1;
        for (int64_t e : example_shape) n *= e;
        return n;
    }
    const float* example(int64_t i) const { return values.data() + i * example_size(); }
};

// Validates invariants and computes the fingerprint.
TensorDataset make_tensor_dataset(std::vector<int64_t> example_shape, int64_t count,
                                  std::vector<float> values);

// Integer token sequences plus the id -> string vocabulary.
// Ids 0 and 1 are reserved: "<pad>" and "<unk>".
struct TokenDataset {
    std::vector<std::vector<int32_t>> sequences;
    std::vector<std::string> vocab;
    int64_t max_seq_len = 0;
    std::string fingerprint;
};

TokenDataset make_token_dataset(std::vector<std::vector<int32_t>> sequences,
                                std::vector<std::string> vocab, int64_t max_seq_len);

struct ChannelStats {
    std::vector<double> mean;
    std::vector<double> stddev;
    std::vector<bool> degenerate;  // stddev below guard: channel shifted only
};

// ---- fingerprinting (endianness-fixed FNV-1a 64) ----

class Fnv1a64 {
public:
    void update(const void* data, size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (size_t i = 0; i < n; ++i) {
            state_ ^= p[i];
            state_ *= 0x100000001b3ull;
        }
    }
    void update_u32(uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
        update(b, 4);
    }
    void update_f32(float v);
    std::string hex() const;

private:
    uint64_t state_ = 0xcbf29ce484222325ull;
};

std::string fingerprint_tensor(const std::vector<int64_t>& example_shape, int64_t count,
                               const std::vector<float>& values);
std::string fingerprint_tokens(const std::vector<std::vector<int32_t>>& sequences,
                               const std::vector<std::string>& vocab, int64_t max_seq_len);

// ---- RNDT binary format ----
// Little-endian: magic "RNDT", version u8 = 1, dtype u8 (1 = f32),
// ndim u8 (2..4), reserved u8 = 0, extents ndim x u32 (first = example
// count), then the f32 payload row-major.

void save_rndt(const TensorDataset& ds, const std::string& path);
TensorDataset load_rndt(const std::string& path);

// ---- token corpus / vocab text formats ----
// Corpus: UTF-8, one sequence per line, whitespace-separated tokens.
// Vocab: one token per line, line index = id; lines 0 and 1 must be
// "<pad>" and "<unk>". Unknown corpus tokens map to id 1.

std::vector<std::string> load_vocab_file(const std::string& path);
void save_vocab_file(const std::vector<std::string>& vocab, const std::string& path);

// max_seq_len 0 means "no cap": the dataset adopts the longest observed line.
TokenDataset load_token_file(const std::string& corpus_path, const std::string& vocab_path,
                             int64_t max_seq_len = 0);
void save_token_file(const TokenDataset& ds, const std::string& corpus_path);

// Raw tokenized text (for vocabulary building), one vector per line.
std::vector<std::vector<std::string>> read_text_corpus(const std::string& path);

struct VocabBuildResult {
    std::vector<std::string> vocab;  // <pad>, <unk>, then top_k by descending frequency
    bool smaller_than_requested = false;  // fewer distinct tokens than top_k
};

// Frequency ties break by first occurrence in the corpus.
VocabBuildResult build_vocab(const std::vector<std::vector<std::string>>& corpus, int64_t top_k);

}  // namespace rnddiv
