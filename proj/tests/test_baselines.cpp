#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "rnddiv/baselines.hpp"
#include "rnddiv/synth.hpp"

using namespace rnddiv;

namespace {

TokenDataset corpus(std::vector<std::vector<int32_t>> seqs, int32_t max_id) {
    std::vector<std::string> vocab = {"<pad>", "<unk>"};
    for (int32_t id = 2; id <= max_id; ++id) vocab.push_back("t" + std::to_string(id));
    return make_token_dataset(std::move(seqs), std::move(vocab), 64);
}

}  // namespace

TEST_CASE("distinct_n hand counts") {
    // [a b a b]: 2 distinct unigrams over 4
    CHECK(distinct_n(corpus({{2, 3, 2, 3}}, 3), 1) == doctest::Approx(0.5));

    // all-distinct tokens
    CHECK(distinct_n(corpus({{2, 3, 4, 5}}, 5), 1) == doctest::Approx(1.0));

    // bigrams of [a b a b]: ab, ba, ab -> 2 distinct over 3
    CHECK(distinct_n(corpus({{2, 3, 2, 3}}, 3), 2) == doctest::Approx(2.0 / 3.0));

    // pads are excluded from n-gram extraction
    CHECK(distinct_n(corpus({{2, 0, 3, 0, 2, 3}}, 3), 1) == doctest::Approx(0.5));

    CHECK_THROWS_AS(distinct_n(corpus({{2, 3}}, 3), 5), DataError);
}

TEST_CASE("duplicating every sequence halves distinct_1 on an all-distinct corpus") {
    auto base = corpus({{2, 3}, {4, 5}}, 5);
    CHECK(distinct_n(base, 1) == doctest::Approx(1.0));
    auto doubled = corpus({{2, 3}, {4, 5}, {2, 3}, {4, 5}}, 5);
    auto prof = ngram_profile(doubled, 1);
    CHECK(prof.distinct == 4);
    CHECK(prof.total == 8);
    CHECK(distinct_n(doubled, 1) == doctest::Approx(0.5));
}

TEST_CASE("metrics are order invariant") {
    auto a = corpus({{2, 3, 4}, {4, 5, 2, 3}, {5, 5, 2}}, 5);
    auto b = corpus({{5, 5, 2}, {2, 3, 4}, {4, 5, 2, 3}}, 5);
    CHECK(distinct_n(a, 1) == distinct_n(b, 1));
    CHECK(distinct_n(a, 2) == distinct_n(b, 2));
    CHECK(self_bleu(a, 3) == doctest::Approx(self_bleu(b, 3)).epsilon(1e-12));
}

TEST_CASE("self_bleu extremes") {
    // identical sequences overlap perfectly
    auto same = corpus({{2, 3, 4}, {2, 3, 4}, {2, 3, 4}}, 4);
    CHECK(self_bleu(same, 3) == doctest::Approx(1.0));

    // disjoint token sets share nothing
    auto disjoint = corpus({{2, 3}, {4, 5}}, 5);
    CHECK(self_bleu(disjoint, 2) == doctest::Approx(0.0));

    CHECK_THROWS_AS(self_bleu(corpus({{2, 3}}, 3), 2), UsageError);
    CHECK_THROWS_AS(self_bleu(corpus({{2, 3}, {2, 4}}, 4), 0), ConfigError);
}

TEST_CASE("three-sentence corpus matches the hand-worked BLEU tables") {
    // s1 = a b c d, s2 = a b c, s3 = c d a b e with max_n = 2.
    //
    // s1 vs {s2, s3}: unigrams a,b,c,d all clip to 1 -> p1 = 4/4;
    //   bigrams ab,bc,cd all appear in a reference -> p2 = 3/3;
    //   c = 4, closest ref length tie (3, 5) -> shorter r = 3, BP = 1.
    //   BLEU = 1.
    // s2 vs {s1, s3}: p1 = 3/3, p2 = 2/2, c = 3, r = 4, BP = exp(1 - 4/3).
    //   BLEU = exp(-1/3).
    // s3 vs {s1, s2}: unigrams c,d,a,b match, e does not -> p1 = 4/5;
    //   bigrams cd,ab match, da,be do not -> p2 = 2/4; c = 5 longest, BP = 1.
    //   BLEU = sqrt(0.8 * 0.5) = sqrt(0.4).
    const int32_t a = 2, b = 3, c = 4, d = 5, e = 6;
    auto ds = corpus({{a, b, c, d}, {a, b, c}, {c, d, a, b, e}}, 6);
    const double expect = (1.0 + std::exp(-1.0 / 3.0) + std::sqrt(0.4)) / 3.0;
    CHECK(std::abs(self_bleu(ds, 2) - expect) < 1e-9);
}

TEST_CASE("short sentences cap their n-gram order") {
    // one-token sentences have no bigrams; with max_n = 4 they are scored on
    // unigrams alone rather than zeroed out
    auto ds = corpus({{2}, {2}}, 2);
    CHECK(self_bleu(ds, 4) == doctest::Approx(1.0));
}

TEST_CASE("vocab truncation moves both baselines in the expected direction") {
    ZipfCorpusSpec spec;
    spec.vocab_size = 200;
    spec.exponent = 1.1;
    spec.len_min = 8;
    spec.len_max = 16;
    spec.count = 300;
    spec.seed = 44;
    auto full = gen_zipf_corpus(spec);

    double prev_distinct = -1.0, prev_bleu = 2.0;
    for (int k : {10, 40, 160}) {
        auto cut = vocab_truncate(full, k);
        const double d1 = distinct_n(cut, 1);
        const double sb = self_bleu(cut, 4);
        CHECK(d1 > prev_distinct);   // more vocab -> more distinct unigrams
        CHECK(sb < prev_bleu);       // more vocab -> less mutual overlap
        prev_distinct = d1;
        prev_bleu = sb;
    }
}
