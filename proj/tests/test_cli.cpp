#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <doctest.h>

#include "qrd/corpus.hpp"
#include "qrd/manifest.hpp"

using namespace qrd;

namespace {

const std::string kCli = QRD_CLI_PATH;
const std::string kDir = "/tmp/qrd_cli_test";

int run(const std::string& args) {
    std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Setup {
    Setup() {
        std::filesystem::remove_all(kDir);
        std::filesystem::create_directories(kDir);
        std::ofstream(kDir + "/gen.cfg") << "corpus.n_queries = 16\n"
                                            "corpus.paths_per_query = 4\n"
                                            "corpus.p_wrong = 0.5\n";
        std::ofstream(kDir + "/train.cfg") << "train.epochs = 1\n"
                                              "train.batch_queries = 8\n";
    }
};

}  // namespace

TEST_CASE("cli exit codes: usage, unknown flags, missing inputs") {
    Setup s;
    CHECK(run("") == 1);
    CHECK(run("frobnicate") == 1);
    CHECK(run("generate --definitely-unknown-flag") == 1);
    CHECK(run("train --corpus " + kDir + "/does_not_exist.jsonl --out " + kDir + "/x") == 1);
    CHECK(run("generate --config " + kDir + "/does_not_exist.cfg --out " + kDir + "/x") == 1);
    std::ofstream(kDir + "/bad.cfg") << "corpus.n_quries = 16\n";
    CHECK(run("generate --config " + kDir + "/bad.cfg --out " + kDir + "/x") == 1);
}

TEST_CASE("generate twice with the same seed gives identical corpus hashes") {
    Setup s;
    REQUIRE(run("generate --config " + kDir + "/gen.cfg --seed 7 --out " + kDir + "/g1") == 0);
    REQUIRE(run("generate --config " + kDir + "/gen.cfg --seed 7 --out " + kDir + "/g2") == 0);
    RunManifest m1 = read_manifest(kDir + "/g1/manifest.json");
    RunManifest m2 = read_manifest(kDir + "/g2/manifest.json");
    CHECK(m1.command == "generate");
    CHECK(!m1.corpus_hash.empty());
    CHECK(m1.corpus_hash == m2.corpus_hash);
    CHECK(slurp(kDir + "/g1/corpus.jsonl") == slurp(kDir + "/g2/corpus.jsonl"));
    // stored hash matches a recomputation
    CHECK(m1.corpus_hash == file_hash_hex(kDir + "/g1/corpus.jsonl"));
    // a different seed changes the corpus
    REQUIRE(run("generate --config " + kDir + "/gen.cfg --seed 8 --out " + kDir + "/g3") == 0);
    CHECK(read_manifest(kDir + "/g3/manifest.json").corpus_hash != m1.corpus_hash);
}

TEST_CASE("filter on an all-wrong corpus exits 0 with an empty cleaned corpus") {
    Setup s;
    std::ofstream(kDir + "/allwrong.cfg") << "corpus.n_queries = 8\n"
                                             "corpus.paths_per_query = 3\n"
                                             "corpus.p_wrong = 1.0\n";
    REQUIRE(run("generate --config " + kDir + "/allwrong.cfg --seed 5 --out " + kDir + "/gw") == 0);
    REQUIRE(run("filter --corpus " + kDir + "/gw/corpus.jsonl --out " + kDir + "/fw") == 0);
    CHECK(read_corpus(kDir + "/fw/cleaned.jsonl").empty());
    std::ifstream report(kDir + "/fw/filter_report.jsonl");
    std::string header;
    REQUIRE(std::getline(report, header));
    CHECK(header.find("\"input\":24") != std::string::npos);
    CHECK(header.find("\"retained\":0") != std::string::npos);
    CHECK(header.find("\"queries_dropped\":8") != std::string::npos);
}

TEST_CASE("filter then train then evaluate and report run end to end") {
    Setup s;
    REQUIRE(run("generate --config " + kDir + "/gen.cfg --seed 7 --out " + kDir + "/g") == 0);
    REQUIRE(run("filter --corpus " + kDir + "/g/corpus.jsonl --out " + kDir + "/f") == 0);
    Corpus cleaned = read_corpus(kDir + "/f/cleaned.jsonl");
    CHECK(!cleaned.empty());
    for (const auto& e : cleaned)
        for (const auto& p : e.paths) CHECK(p.label_correct);

    REQUIRE(run("train --config " + kDir + "/train.cfg --seed 3 --corpus " + kDir +
                "/g/corpus.jsonl --out " + kDir + "/t") == 0);
    CHECK(std::filesystem::exists(kDir + "/t/metrics.csv"));
    CHECK(std::filesystem::exists(kDir + "/t/eval.csv"));
    CHECK(std::filesystem::exists(kDir + "/t/checkpoints/student1_final.ckpt"));
    RunManifest tm = read_manifest(kDir + "/t/manifest.json");
    CHECK(tm.command == "train");
    CHECK(tm.outputs.count("metrics") == 1);

    REQUIRE(run("evaluate --corpus " + kDir + "/g/corpus.jsonl --ckpt " + kDir +
                "/t/checkpoints --out " + kDir + "/e") == 0);
    CHECK(std::filesystem::exists(kDir + "/e/eval.csv"));

    REQUIRE(run("report --corpus " + kDir + "/g/corpus.jsonl --ckpt " + kDir +
                "/t/checkpoints --out " + kDir + "/r") == 0);
    CHECK(std::filesystem::exists(kDir + "/r/selection_by_style.csv"));
    CHECK(std::filesystem::exists(kDir + "/r/selection_by_difficulty.csv"));
}

TEST_CASE("train reruns are byte-identical: corpus, metrics, checkpoints") {
    Setup s;
    REQUIRE(run("generate --config " + kDir + "/gen.cfg --seed 7 --out " + kDir + "/g") == 0);
    REQUIRE(run("train --config " + kDir + "/train.cfg --seed 3 --corpus " + kDir +
                "/g/corpus.jsonl --out " + kDir + "/t1") == 0);
    REQUIRE(run("train --config " + kDir + "/train.cfg --seed 3 --corpus " + kDir +
                "/g/corpus.jsonl --out " + kDir + "/t2") == 0);
    CHECK(slurp(kDir + "/t1/metrics.csv") == slurp(kDir + "/t2/metrics.csv"));
    CHECK(slurp(kDir + "/t1/checkpoints/student0_final.ckpt") ==
          slurp(kDir + "/t2/checkpoints/student0_final.ckpt"));
    CHECK(slurp(kDir + "/t1/checkpoints/router_final.ckpt") ==
          slurp(kDir + "/t2/checkpoints/router_final.ckpt"));
}

TEST_CASE("ablation flags show up in the manifest") {
    Setup s;
    REQUIRE(run("generate --config " + kDir + "/gen.cfg --seed 7 --out " + kDir + "/g") == 0);
    REQUIRE(run("train --config " + kDir + "/train.cfg --seed 3 --corpus " + kDir +
                "/g/corpus.jsonl --out " + kDir + "/ta --no-qf --no-collab") == 0);
    RunManifest m = read_manifest(kDir + "/ta/manifest.json");
    bool has_qf = false, has_collab = false;
    for (const auto& f : m.flags) {
        has_qf |= f == "no-qf";
        has_collab |= f == "no-collab";
    }
    CHECK(has_qf);
    CHECK(has_collab);
}
