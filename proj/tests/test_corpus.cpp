#include <cstdio>
#include <fstream>
#include <sstream>

#include <doctest.h>

#include "qrd/corpus.hpp"

using namespace qrd;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string tmp_path(const std::string& name) {
    return std::string("/tmp/qrd_test_") + name;
}

}  // namespace

TEST_CASE("generation is deterministic in the seed") {
    CorpusConfig cfg;
    cfg.n_queries = 24;
    cfg.paths_per_query = 4;
    cfg.p_wrong = 0.3;
    cfg.p_spur = 0.2;
    Corpus a = generate_corpus(cfg, 42);
    Corpus b = generate_corpus(cfg, 42);
    Corpus c = generate_corpus(cfg, 43);
    std::string pa = tmp_path("gen_a.jsonl"), pb = tmp_path("gen_b.jsonl"),
                pc = tmp_path("gen_c.jsonl");
    write_corpus(a, pa);
    write_corpus(b, pb);
    write_corpus(c, pc);
    CHECK(slurp(pa) == slurp(pb));
    CHECK(slurp(pa) != slurp(pc));
}

TEST_CASE("corpus structure: styles cycle, labels honest, answers extractable") {
    CorpusConfig cfg;
    cfg.n_queries = 40;
    cfg.paths_per_query = 6;
    cfg.p_wrong = 0.5;
    Corpus corpus = generate_corpus(cfg, 7);
    REQUIRE(corpus.size() == 40);
    for (const auto& e : corpus) {
        CHECK(e.query.difficulty >= 1);
        CHECK(e.query.difficulty <= 5);
        CHECK(!e.query.ground_truth.empty());
        REQUIRE(e.paths.size() == 6);
        for (size_t j = 0; j < e.paths.size(); ++j) {
            const auto& p = e.paths[j];
            CHECK(p.style == static_cast<Style>(j % kNumStyles));
            CHECK(p.tokens.back() == Vocabulary::kEos);
            // the extracted answer agrees with the planted label
            std::string got = extract_answer(p.tokens);
            CHECK(got == p.extracted_answer);
            CHECK((got == e.query.ground_truth) == p.label_correct);
        }
    }
}

TEST_CASE("p_wrong=0 yields only correct paths; p_wrong=1 only wrong ones") {
    CorpusConfig cfg;
    cfg.n_queries = 20;
    cfg.paths_per_query = 3;
    cfg.p_wrong = 0.0;
    for (const auto& e : generate_corpus(cfg, 5))
        for (const auto& p : e.paths) CHECK(p.label_correct);
    cfg.p_wrong = 1.0;
    for (const auto& e : generate_corpus(cfg, 5))
        for (const auto& p : e.paths) CHECK(!p.label_correct);
}

TEST_CASE("spurious paths inject tokens disjoint from their own prompt") {
    CorpusConfig cfg;
    cfg.n_queries = 32;
    cfg.paths_per_query = 6;
    cfg.p_spur = 1.0;
    Corpus corpus = generate_corpus(cfg, 9);
    int given_id = vocab().id("given");
    int spurious_count = 0;
    for (const auto& e : corpus)
        for (const auto& p : e.paths)
            if (p.label_spurious) ++spurious_count;
    CHECK(spurious_count == 32 * 6);
    // every spurious path contains at least one "given" marker
    for (const auto& e : corpus)
        for (const auto& p : e.paths) {
            bool has_given = false;
            for (int t : p.tokens) has_given |= (t == given_id);
            CHECK(has_given);
        }
}

TEST_CASE("write/read round trip preserves the corpus") {
    CorpusConfig cfg;
    cfg.n_queries = 12;
    cfg.paths_per_query = 4;
    cfg.p_wrong = 0.3;
    cfg.p_spur = 0.2;
    Corpus corpus = generate_corpus(cfg, 77);
    std::string path = tmp_path("roundtrip.jsonl");
    write_corpus(corpus, path);
    Corpus back = read_corpus(path);
    REQUIRE(back.size() == corpus.size());
    for (size_t i = 0; i < corpus.size(); ++i) {
        CHECK(back[i].query.id == corpus[i].query.id);
        CHECK(back[i].query.task_kind == corpus[i].query.task_kind);
        CHECK(back[i].query.prompt_tokens == corpus[i].query.prompt_tokens);
        CHECK(back[i].query.ground_truth == corpus[i].query.ground_truth);
        CHECK(back[i].query.difficulty == corpus[i].query.difficulty);
        REQUIRE(back[i].paths.size() == corpus[i].paths.size());
        for (size_t j = 0; j < corpus[i].paths.size(); ++j) {
            CHECK(back[i].paths[j].tokens == corpus[i].paths[j].tokens);
            CHECK(back[i].paths[j].style == corpus[i].paths[j].style);
            CHECK(back[i].paths[j].label_correct == corpus[i].paths[j].label_correct);
            CHECK(back[i].paths[j].label_spurious == corpus[i].paths[j].label_spurious);
            CHECK(back[i].paths[j].extracted_answer == corpus[i].paths[j].extracted_answer);
        }
    }
    // and the re-serialization is byte-identical
    std::string path2 = tmp_path("roundtrip2.jsonl");
    write_corpus(back, path2);
    CHECK(slurp(path) == slurp(path2));
}

TEST_CASE("reader reports schema errors with line numbers") {
    std::string path = tmp_path("bad.jsonl");
    {
        std::ofstream out(path);
        out << R"({"query_id":0,"task_kind":"modular-arithmetic","difficulty":1,"prompt":"mod plus 1 <sep> 2 <sep>","ground_truth":"3","style":"vanilla","tokens":[16,1],"extracted_answer":"", "label_correct":true,"label_spurious":false,"source":"synthetic"})"
            << "\n";
        out << "this is not json\n";
    }
    try {
        read_corpus(path);
        FAIL("expected parse error");
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }

    {
        std::ofstream out(path);
        out << R"({"query_id":0,"task_kind":"no-such-task","difficulty":1,"prompt":"mod","ground_truth":"3","style":"vanilla","tokens":[16,1],"extracted_answer":"","label_correct":true,"label_spurious":false,"source":"synthetic"})"
            << "\n";
    }
    try {
        read_corpus(path);
        FAIL("expected schema error");
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("line 1") != std::string::npos);
    }
}

TEST_CASE("writer refuses a query with zero paths") {
    Corpus corpus(1);
    corpus[0].query.id = 0;
    corpus[0].query.ground_truth = "x";
    CHECK_THROWS(write_corpus(corpus, tmp_path("nopaths.jsonl")));
}

TEST_CASE("extract_answer uses the last answer marker and stops at eos") {
    const Vocabulary& v = vocab();
    std::vector<int> toks{v.id("answer"), v.digit(1), v.id("answer"), v.digit(7), v.digit(2),
                          Vocabulary::kEos, v.digit(9)};
    CHECK(extract_answer(toks) == "7 2");
    CHECK(extract_answer({v.digit(1)}) == "");
}

TEST_CASE("mix_seed separates streams") {
    CHECK(mix_seed(1, 2) != mix_seed(1, 3));
    CHECK(mix_seed(1, 2) != mix_seed(2, 2));
    CHECK(mix_seed(1, 2) == mix_seed(1, 2));
}

TEST_CASE("file_hash_hex is stable and content sensitive") {
    std::string p1 = tmp_path("h1"), p2 = tmp_path("h2");
    std::ofstream(p1) << "abc";
    std::ofstream(p2) << "abd";
    CHECK(file_hash_hex(p1) == file_hash_hex(p1));
    CHECK(file_hash_hex(p1) != file_hash_hex(p2));
    CHECK(file_hash_hex(p1).size() == 16);
}
