#include <cmath>

#include <doctest.h>

#include "qrd/encoder.hpp"

using namespace qrd;

namespace {

Corpus tiny_corpus() {
    CorpusConfig cfg;
    cfg.n_queries = 8;
    cfg.paths_per_query = 6;
    return generate_corpus(cfg, 21);
}

}  // namespace

TEST_CASE("encoding layout: normalized bigram bag, style one-hot, scaled tail") {
    Corpus corpus = tiny_corpus();
    PathEncoder enc(64);
    for (const auto& e : corpus)
        for (const auto& p : e.paths) {
            auto v = enc.encode(p, e.query.difficulty);
            REQUIRE(static_cast<int>(v.size()) == 64);
            double norm = 0.0;
            for (int i = 0; i < 64 - kEncoderTailDims; ++i) norm += v[i] * v[i];
            CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-9));
            int hot = 0;
            for (int s = 0; s < 6; ++s) {
                double x = v[64 - kEncoderTailDims + s];
                CHECK((x == 0.0 || x == 1.0));
                hot += x == 1.0;
            }
            CHECK(hot == 1);
            CHECK(v[64 - kEncoderTailDims + static_cast<int>(p.style)] == 1.0);
            CHECK(v[62] == doctest::Approx(static_cast<double>(p.tokens.size()) / 256.0));
            CHECK(v[63] == doctest::Approx(e.query.difficulty / 5.0));
        }
}

TEST_CASE("encoding is deterministic and style-sensitive") {
    Corpus corpus = tiny_corpus();
    PathEncoder enc(64);
    auto a = enc.encode(corpus[0].paths[0], corpus[0].query.difficulty);
    auto b = enc.encode(corpus[0].paths[0], corpus[0].query.difficulty);
    CHECK(a == b);
    auto c = enc.encode(corpus[0].paths[1], corpus[0].query.difficulty);
    CHECK(a != c);
}

TEST_CASE("encode_batch packs all paths in file order") {
    Corpus corpus = tiny_corpus();
    PathEncoder enc(32);
    Tensor t = enc.encode_batch(corpus);
    CHECK(t.rows() == 8 * 6);
    CHECK(t.cols() == 32);
    auto first = enc.encode(corpus[0].paths[0], corpus[0].query.difficulty);
    for (int j = 0; j < 32; ++j) CHECK(t.at(0, j) == doctest::Approx(first[j]));
    auto last = enc.encode(corpus[7].paths[5], corpus[7].query.difficulty);
    for (int j = 0; j < 32; ++j) CHECK(t.at(47, j) == doctest::Approx(last[j]));
}

TEST_CASE("dimension must leave room for the tail") {
    CHECK_THROWS(PathEncoder(7));
    CHECK_THROWS(PathEncoder(10));
    CHECK_NOTHROW(PathEncoder(11));
}
