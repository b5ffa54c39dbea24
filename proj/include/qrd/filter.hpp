#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "qrd/corpus.hpp"
#include "qrd/teacher.hpp"

namespace qrd {

enum class JudgeKind { Oracle, Heuristic, ExternalLlm };
enum class FilterStage { WrongAnswer, Spurious, Retained };

struct PathVerdict {
    int query_id = 0;
    int path_index = 0;  // index within the query's path list
    FilterStage stage = FilterStage::Retained;
    bool flagged = false;
    std::string rationale;
};

struct FilterReport {
    long input = 0;
    long removed_wrong_answer = 0;
    long removed_spurious = 0;
    long retained = 0;
    long queries_dropped = 0;
    std::vector<PathVerdict> verdicts;
};

// Trim, lowercase, collapse internal whitespace, strip trailing punctuation.
std::string canonicalize_answer(const std::string& s);

// Step-2 judge. Oracle reads the planted label, heuristic flags "given"
// segments token-disjoint from the query prompt, external asks an
// adjudication endpoint for a VALID/INVALID verdict (fail-open on garbage).
class Judge {
public:
    virtual ~Judge() = default;
    virtual JudgeKind kind() const = 0;
    // returns true when the path is logically valid (keep it)
    virtual bool valid(const Query& query, const ReasoningPath& path, bool& flagged,
                       std::string& rationale) = 0;
};

std::unique_ptr<Judge> make_oracle_judge();
std::unique_ptr<Judge> make_heuristic_judge();
std::unique_ptr<Judge> make_external_judge(std::shared_ptr<TeacherClient> client,
                                           RetryPolicy retry = {});
std::unique_ptr<Judge> make_judge(const std::string& kind_name);

struct PathPartition {
    std::vector<ReasoningPath> retained;
    std::vector<ReasoningPath> removed;
};

PathPartition filter_wrong_answers(const std::vector<ReasoningPath>& paths,
                                   const std::string& ground_truth);
PathPartition filter_spurious(const Query& query, const std::vector<ReasoningPath>& paths,
                              Judge& judge, std::vector<PathVerdict>* verdicts = nullptr);

struct FilterResult {
    Corpus cleaned;
    FilterReport report;
};

FilterResult run_quality_filter(const Corpus& corpus, Judge& judge);

// Report persisted as line-delimited records with a summary header line.
void write_filter_report(const FilterReport& report, const std::string& path);

}  // namespace qrd
