#include "rnddiv/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace rnddiv {

void Fnv1a64::update_f32(float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    update_u32(bits);
}

std::string Fnv1a64::hex() const {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 0; i < 16; ++i) {
        out[15 - i] = digits[(state_ >> (4 * i)) & 0xf];
    }
    return out;
}

std::string fingerprint_tensor(const std::vector<int64_t>& example_shape, int64_t count,
                               const std::vector<float>& values) {
    Fnv1a64 h;
    h.update_u32(static_cast<uint32_t>(example_shape.size() + 1));
    h.update_u32(static_cast<uint32_t>(count));
    for (int64_t e : example_shape) h.update_u32(static_cast<uint32_t>(e));
    for (float v : values) h.update_f32(v);
    return h.hex();
}

std::string fingerprint_tokens(const std::vector<std::vector<int32_t>>& sequences,
                               const std::vector<std::string>& vocab, int64_t max_seq_len) {
    Fnv1a64 h;
    h.update_u32(static_cast<uint32_t>(sequences.size()));
    for (const auto& seq : sequences) {
        h.update_u32(static_cast<uint32_t>(seq.size()));
        for (int32_t id : seq) h.update_u32(static_cast<uint32_t>(id));
    }
    h.update_u32(static_cast<uint32_t>(vocab.size()));
    for (const auto& tok : vocab) {
        h.update_u32(static_cast<uint32_t>(tok.size()));
        h.update(tok.data(), tok.size());
    }
    h.update_u32(static_cast<uint32_t>(max_seq_len));
    return h.hex();
}

TensorDataset make_tensor_dataset(std::vector<int64_t> example_shape, int64_t count,
                                  std::vector<float> values) {
    if (count < 2) throw DataError("tensor dataset: need at least 2 examples, got " + std::to_string(count));
    if (example_shape.empty() || example_shape.size() > 3) {
        throw DataError("tensor dataset: example shape must have 1 to 3 axes");
    }
    int64_t per = 1;
    for (int64_t e : example_shape) {
        if (e < 1) throw DataError("tensor dataset: non-positive extent");
        per *= e;
    }
    if (static_cast<int64_t>(values.size()) != count * per) {
        throw DataError("tensor dataset: value count " + std::to_string(values.size()) +
                        " does not match " + std::to_string(count * per));
    }
    for (float v : values) {
        if (!std::isfinite(v)) throw DataError("tensor dataset: non-finite value");
    }
    TensorDataset ds;
    ds.example_shape = std::move(example_shape);
    ds.count = count;
    ds.values = std::move(values);
    ds.fingerprint = fingerprint_tensor(ds.example_shape, ds.count, ds.values);
    return ds;
}

TokenDataset make_token_dataset(std::vector<std::vector<int32_t>> sequences,
                                std::vector<std::string> vocab, int64_t max_seq_len) {
    if (vocab.size() < 2 || vocab[0] != "<pad>" || vocab[1] != "<unk>") {
        throw DataError("token dataset: vocab must start with <pad>, <unk>");
    }
    if (sequences.empty()) throw DataError("token dataset: no sequences");
    int64_t longest = 0;
    for (size_t i = 0; i < sequences.size(); ++i) {
        const auto& seq = sequences[i];
        if (seq.empty()) throw DataError("token dataset: sequence " + std::to_string(i) + " is empty");
        for (int32_t id : seq) {
            if (id < 0 || id >= static_cast<int32_t>(vocab.size())) {
                throw DataError("token dataset: id " + std::to_string(id) + " outside vocab of size " +
                                std::to_string(vocab.size()));
            }
        }
        longest = std::max(longest, static_cast<int64_t>(seq.size()));
    }
    if (max_seq_len == 0) max_seq_len = longest;
    if (longest > max_seq_len) {
        throw DataError("token dataset: sequence length " + std::to_string(longest) +
                        " exceeds max_seq_len " + std::to_string(max_seq_len));
    }
    TokenDataset ds;
    ds.sequences = std::move(sequences);
    ds.vocab = std::move(vocab);
    ds.max_seq_len = max_seq_len;
    ds.fingerprint = fingerprint_tokens(ds.sequences, ds.vocab, ds.max_seq_len);
    return ds;
}

// ---- RNDT ----

namespace {

void put_u32(std::vector<unsigned char>& out, uint32_t v) {
    out.push_back(static_cast<unsigned char>(v));
    out.push_back(static_cast<unsigned char>(v >> 8));
    out.push_back(static_cast<unsigned char>(v >> 16));
    out.push_back(static_cast<unsigned char>(v >> 24));
}

uint32_t get_u32(const unsigned char* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

[[noreturn]] void format_fail(const std::string& path, size_t offset, const std::string& what) {
    throw FormatError(path + ": " + what + " (byte offset " + std::to_string(offset) + ")");
}

}  // namespace

void save_rndt(const TensorDataset& ds, const std::string& path) {
    std::vector<unsigned char> buf;
    const size_t ndim = ds.example_shape.size() + 1;
    buf.reserve(8 + 4 * ndim + 4 * ds.values.size());
    buf.insert(buf.end(), {'R', 'N', 'D', 'T'});
    buf.push_back(1);                                   // version
    buf.push_back(1);                                   // dtype f32
    buf.push_back(static_cast<unsigned char>(ndim));    // ndim
    buf.push_back(0);                                   // reserved
    put_u32(buf, static_cast<uint32_t>(ds.count));
    for (int64_t e : ds.example_shape) put_u32(buf, static_cast<uint32_t>(e));
    for (float v : ds.values) {
        uint32_t bits;
        std::memcpy(&bits, &v, 4);
        put_u32(buf, bits);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw DataError("write failed: " + path);
}

TensorDataset load_rndt(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open: " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());

    if (buf.size() < 8) format_fail(path, buf.size(), "truncated header");
    if (std::memcmp(buf.data(), "RNDT", 4) != 0) format_fail(path, 0, "bad magic");
    if (buf[4] != 1) format_fail(path, 4, "unsupported version " + std::to_string(buf[4]));
    if (buf[5] != 1) format_fail(path, 5, "unsupported dtype " + std::to_string(buf[5]));
    const size_t ndim = buf[6];
    if (ndim < 2 || ndim > 4) format_fail(path, 6, "ndim must be 2..4, got " + std::to_string(ndim));
    if (buf[7] != 0) format_fail(path, 7, "reserved byte must be 0");

    const size_t extents_at = 8;
    if (buf.size() < extents_at + 4 * ndim) format_fail(path, buf.size(), "truncated extents");
    uint64_t total = 1;
    std::vector<int64_t> extents(ndim);
    for (size_t i = 0; i < ndim; ++i) {
        const uint32_t e = get_u32(buf.data() + extents_at + 4 * i);
        if (e == 0) format_fail(path, extents_at + 4 * i, "zero extent");
        extents[i] = static_cast<int64_t>(e);
        total *= e;
        if (total > (1ull << 31)) {
            format_fail(path, extents_at + 4 * i, "extent product overflows supported size");
        }
    }
    const size_t payload_at = extents_at + 4 * ndim;
    const size_t want = static_cast<size_t>(total) * 4;
    if (buf.size() < payload_at + want) {
        format_fail(path, buf.size(),
                    "truncated payload: header declares " + std::to_string(total) + " floats, file has " +
                        std::to_string((buf.size() - payload_at) / 4));
    }
    if (buf.size() > payload_at + want) {
        format_fail(path, payload_at + want, "trailing bytes after payload");
    }

    std::vector<float> values(static_cast<size_t>(total));
    for (size_t i = 0; i < values.size(); ++i) {
        const uint32_t bits = get_u32(buf.data() + payload_at + 4 * i);
        float v;
        std::memcpy(&v, &bits, 4);
        values[i] = v;
    }
    std::vector<int64_t> example_shape(extents.begin() + 1, extents.end());
    return make_tensor_dataset(std::move(example_shape), extents[0], std::move(values));
}

// ---- token text formats ----

namespace {

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream is(line);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

}  // namespace

std::vector<std::string> load_vocab_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open: " + path);
    std::vector<std::string> vocab;
    std::string line;
    while (std::getline(in, line)) vocab.push_back(strip_cr(line));
    while (!vocab.empty() && vocab.back().empty()) vocab.pop_back();
    if (vocab.size() < 2 || vocab[0] != "<pad>" || vocab[1] != "<unk>") {
        throw FormatError(path + ": vocab lines 0 and 1 must be <pad> and <unk>");
    }
    for (size_t i = 0; i < vocab.size(); ++i) {
        if (vocab[i].empty()) {
            throw FormatError(path + ": empty vocab entry at line " + std::to_string(i + 1));
        }
    }
    return vocab;
}

void save_vocab_file(const std::vector<std::string>& vocab, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot open for writing: " + path);
    for (const auto& tok : vocab) out << tok << '\n';
    if (!out) throw DataError("write failed: " + path);
}

std::vector<std::vector<std::string>> read_text_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open: " + path);
    std::vector<std::vector<std::string>> lines;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto toks = split_ws(strip_cr(line));
        if (toks.empty()) {
            throw DataError(path + ": empty line " + std::to_string(lineno));
        }
        lines.push_back(std::move(toks));
    }
    if (lines.empty()) throw DataError(path + ": empty corpus");
    return lines;
}

TokenDataset load_token_file(const std::string& corpus_path, const std::string& vocab_path,
                             int64_t max_seq_len) {
    auto vocab = load_vocab_file(vocab_path);
    std::unordered_map<std::string, int32_t> index;
    index.reserve(vocab.size());
    for (size_t i = 0; i < vocab.size(); ++i) {
        if (!index.emplace(vocab[i], static_cast<int32_t>(i)).second) {
            throw FormatError(vocab_path + ": duplicate token '" + vocab[i] + "'");
        }
    }

    auto lines = read_text_corpus(corpus_path);
    std::vector<std::vector<int32_t>> sequences;
    sequences.reserve(lines.size());
    for (size_t li = 0; li < lines.size(); ++li) {
        if (max_seq_len > 0 && static_cast<int64_t>(lines[li].size()) > max_seq_len) {
            throw DataError(corpus_path + ": line " + std::to_string(li + 1) + " has " +
                            std::to_string(lines[li].size()) + " tokens, exceeds max_seq_len " +
                            std::to_string(max_seq_len));
        }
        std::vector<int32_t> seq;
        seq.reserve(lines[li].size());
        for (const auto& tok : lines[li]) {
            auto it = index.find(tok);
            seq.push_back(it == index.end() ? 1 : it->second);
        }
        sequences.push_back(std::move(seq));
    }
    return make_token_dataset(std::move(sequences), std::move(vocab), max_seq_len);
}

void save_token_file(const TokenDataset& ds, const std::string& corpus_path) {
    std::ofstream out(corpus_path, std::ios::trunc);
    if (!out) throw DataError("cannot open for writing: " + corpus_path);
    for (const auto& seq : ds.sequences) {
        for (size_t i = 0; i < seq.size(); ++i) {
            if (i) out << ' ';
            out << ds.vocab[static_cast<size_t>(seq[i])];
        }
        out << '\n';
    }
    if (!out) throw DataError("write failed: " + corpus_path);
}

VocabBuildResult build_vocab(const std::vector<std::vector<std::string>>& corpus, int64_t top_k) {
    if (top_k < 1) throw ConfigError("build_vocab: top_k must be >= 1");
    if (corpus.empty()) throw DataError("build_vocab: empty corpus");

    struct Entry {
        int64_t count = 0;
        int64_t first = 0;
    };
    std::unordered_map<std::string, Entry> freq;
    int64_t pos = 0;
    for (const auto& line : corpus) {
        for (const auto& tok : line) {
            auto [it, fresh] = freq.try_emplace(tok);
            if (fresh) it->second.first = pos;
            ++it->second.count;
            ++pos;
        }
    }
    if (freq.empty()) throw DataError("build_vocab: empty corpus");

    std::vector<std::pair<std::string, Entry>> order(freq.begin(), freq.end());
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
        if (a.second.count != b.second.count) return a.second.count > b.second.count;
        return a.second.first < b.second.first;
    });

    VocabBuildResult res;
    res.vocab = {"<pad>", "<unk>"};
    const size_t take = std::min<size_t>(order.size(), static_cast<size_t>(top_k));
    for (size_t i = 0; i < take; ++i) res.vocab.push_back(order[i].first);
    res.smaller_than_requested = order.size() < static_cast<size_t>(top_k);
    return res;
}

}  // namespace rnddiv
