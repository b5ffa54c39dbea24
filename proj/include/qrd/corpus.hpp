#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qrd/vocab.hpp"

namespace qrd {

enum class TaskKind { ModularArithmetic, ListTransform, DateOffset, MultiHopFact };
enum class Style { Vanilla, Cot, Tot, Program, Backward, FactRetrieval };
enum class PathSource { Synthetic, External };

constexpr int kNumStyles = 6;
constexpr int kNumTaskKinds = 4;

const char* to_string(TaskKind k);
const char* to_string(Style s);
TaskKind task_kind_from_string(const std::string& s);
Style style_from_string(const std::string& s);

struct Query {
    int id = 0;
    TaskKind task_kind = TaskKind::ModularArithmetic;
    std::vector<int> prompt_tokens;  // excludes BOS
    std::string ground_truth;
    int difficulty = 1;  // 1..5
};

struct ReasoningPath {
    int query_id = 0;
    Style style = Style::Vanilla;
    std::vector<int> tokens;  // style marker ... ANSWER span ... EOS; excludes the prompt
    std::string extracted_answer;
    bool label_correct = false;   // meaningful only for synthetic paths
    bool label_spurious = false;  // meaningful only for synthetic paths
    PathSource source = PathSource::Synthetic;
    bool flagged = false;  // external path whose answer could not be extracted
};

struct CorpusEntry {
    Query query;
    std::vector<ReasoningPath> paths;
};

using Corpus = std::vector<CorpusEntry>;

// Which student archetype a style's planted pattern favours. Archetype 0 is
// the wide/shallow student (local bigram patterns), archetype 1 the narrow/
// deep one (copy patterns that need attention composition).
struct CorpusConfig {
    int n_queries = 96;
    int paths_per_query = 6;
    double p_wrong = 0.0;
    double p_spur = 0.0;
    std::uint64_t graph_seed = 1234;  // layout of the multi-hop fact graph
    int pattern_len = 12;             // tokens in each planted pattern block
    // utility[style][task][archetype] in [0,1]; the generator plants the
    // pattern family of the archetype with the larger utility.
    std::array<std::array<std::array<double, 2>, kNumTaskKinds>, kNumStyles> utility;

    CorpusConfig();
    int favored_archetype(Style s, TaskKind k) const;
};

// Deterministic generation: each query derives its RNG stream from
// (seed, query id), so the corpus is reproducible and per-query parallel.
Corpus generate_corpus(const CorpusConfig& config, std::uint64_t seed);

// Final-answer span after the last "answer" marker, detokenized.
std::string extract_answer(const std::vector<int>& tokens);
std::string detokenize(const std::vector<int>& tokens);

void write_corpus(const Corpus& corpus, const std::string& path);
Corpus read_corpus(const std::string& path);

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 1469598103934665603ull);
std::uint64_t fnv1a(const std::string& s);
std::string file_hash_hex(const std::string& path);

// Seed mixing for per-query RNG streams.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace qrd
