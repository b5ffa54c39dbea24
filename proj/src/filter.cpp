#include "qrd/filter.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <fstream>
#include <thread>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

namespace qrd {

std::string canonicalize_answer(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    bool in_space = true;  // swallows leading whitespace
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            in_space = true;
            continue;
        }
        if (in_space && !out.empty()) out += ' ';
        in_space = false;
        out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    while (!out.empty() && std::ispunct(static_cast<unsigned char>(out.back()))) out.pop_back();
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

namespace {

class OracleJudge : public Judge {
public:
    JudgeKind kind() const override { return JudgeKind::Oracle; }
    bool valid(const Query&, const ReasoningPath& path, bool&, std::string& rationale) override {
        if (path.source != PathSource::Synthetic)
            throw std::invalid_argument("oracle judge needs synthetic paths with planted labels");
        rationale = path.label_spurious ? "planted spurious label" : "planted clean label";
        return !path.label_spurious;
    }
};

class HeuristicJudge : public Judge {
public:
    JudgeKind kind() const override { return JudgeKind::Heuristic; }
    bool valid(const Query& query, const ReasoningPath& path, bool&,
               std::string& rationale) override {
        const int given_id = vocab().id("given");
        std::unordered_set<int> context(query.prompt_tokens.begin(), query.prompt_tokens.end());
        for (size_t i = 0; i < path.tokens.size(); ++i) {
            if (path.tokens[i] != given_id) continue;
            bool overlap = false;
            size_t j = i + 1;
            for (; j < path.tokens.size() && !is_marker(path.tokens[j]); ++j)
                if (context.count(path.tokens[j])) overlap = true;
            if (j > i + 1 && !overlap) {
                rationale = "given-step disjoint from query context";
                return false;
            }
        }
        rationale = "all given-steps grounded in query context";
        return true;
    }

private:
    static bool is_marker(int t) {
        static const std::unordered_set<int> markers = [] {
            std::unordered_set<int> m;
            for (const char* n : {"step", "therefore", "answer", "branch", "join", "def", "ret",
                                  "given", "recall", "check"})
                m.insert(vocab().id(n));
            m.insert(Vocabulary::kEos);
            return m;
        }();
        return markers.count(t) > 0;
    }
};

class ExternalJudge : public Judge {
public:
    ExternalJudge(std::shared_ptr<TeacherClient> client, RetryPolicy retry)
        : client_(std::move(client)), retry_(retry) {}
    JudgeKind kind() const override { return JudgeKind::ExternalLlm; }

    bool valid(const Query& query, const ReasoningPath& path, bool& flagged,
               std::string& rationale) override {
        std::string prompt =
            "Judge whether this reasoning path contains hallucinated or spurious steps.\n"
            "Question: " + detokenize(query.prompt_tokens) +
            "\nPath: " + detokenize(path.tokens) +
            "\nReply with exactly VALID or INVALID.";
        TeacherReply reply;
        int delay_ms = retry_.backoff_base_ms;
        for (int attempt = 1; attempt <= retry_.max_attempts; ++attempt) {
            reply = client_->complete(prompt);
            if (reply.ok) break;
            if (!reply.transient || attempt == retry_.max_attempts)
                throw std::runtime_error("judge transport error: " + reply.error);
            if (delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
            delay_ms *= 2;
        }
        if (reply.text.find("INVALID") != std::string::npos) {
            rationale = "judge verdict INVALID";
            return false;
        }
        if (reply.text.find("VALID") != std::string::npos) {
            rationale = "judge verdict VALID";
            return true;
        }
        // Unparseable verdict: keep the path but flag it for audit.
        flagged = true;
        rationale = "unparseable judge verdict, retained fail-open";
        return true;
    }

private:
    std::shared_ptr<TeacherClient> client_;
    RetryPolicy retry_;
};

}  // namespace

std::unique_ptr<Judge> make_oracle_judge() { return std::make_unique<OracleJudge>(); }
std::unique_ptr<Judge> make_heuristic_judge() { return std::make_unique<HeuristicJudge>(); }
std::unique_ptr<Judge> make_external_judge(std::shared_ptr<TeacherClient> client,
                                           RetryPolicy retry) {
    return std::make_unique<ExternalJudge>(std::move(client), retry);
}

std::unique_ptr<Judge> make_judge(const std::string& kind_name) {
    if (kind_name == "oracle") return make_oracle_judge();
    if (kind_name == "heuristic") return make_heuristic_judge();
    throw std::invalid_argument("unknown judge kind '" + kind_name +
                                "' (expected oracle or heuristic)");
}

PathPartition filter_wrong_answers(const std::vector<ReasoningPath>& paths,
                                   const std::string& ground_truth) {
    PathPartition part;
    std::string truth = canonicalize_answer(ground_truth);
    for (const auto& p : paths) {
        std::string ans = canonicalize_answer(p.extracted_answer);
        if (!ans.empty() && ans == truth)
            part.retained.push_back(p);
        else
            part.removed.push_back(p);
    }
    return part;
}

PathPartition filter_spurious(const Query& query, const std::vector<ReasoningPath>& paths,
                              Judge& judge, std::vector<PathVerdict>* verdicts) {
    PathPartition part;
    for (size_t i = 0; i < paths.size(); ++i) {
        bool flagged = false;
        std::string rationale;
        bool keep = judge.valid(query, paths[i], flagged, rationale);
        if (verdicts)
            verdicts->push_back({query.id, static_cast<int>(i),
                                 keep ? FilterStage::Retained : FilterStage::Spurious, flagged,
                                 rationale});
        if (keep) {
            ReasoningPath kept = paths[i];
            kept.flagged = kept.flagged || flagged;
            part.retained.push_back(std::move(kept));
        } else {
            part.removed.push_back(paths[i]);
        }
    }
    return part;
}

FilterResult run_quality_filter(const Corpus& corpus, Judge& judge) {
    FilterResult result;
    for (const auto& entry : corpus) {
        result.report.input += static_cast<long>(entry.paths.size());
        std::string truth = canonicalize_answer(entry.query.ground_truth);
        std::vector<ReasoningPath> survivors;
        for (size_t i = 0; i < entry.paths.size(); ++i) {
            const auto& p = entry.paths[i];
            std::string ans = canonicalize_answer(p.extracted_answer);
            if (ans.empty() || ans != truth) {
                ++result.report.removed_wrong_answer;
                result.report.verdicts.push_back({entry.query.id, static_cast<int>(i),
                                                  FilterStage::WrongAnswer, false,
                                                  "final answer mismatch"});
                continue;
            }
            bool flagged = false;
            std::string rationale;
            bool keep = judge.valid(entry.query, p, flagged, rationale);
            result.report.verdicts.push_back(
                {entry.query.id, static_cast<int>(i),
                 keep ? FilterStage::Retained : FilterStage::Spurious, flagged, rationale});
            if (keep) {
                ReasoningPath kept = p;
                kept.flagged = kept.flagged || flagged;
                survivors.push_back(std::move(kept));
                ++result.report.retained;
            } else {
                ++result.report.removed_spurious;
            }
        }
        if (survivors.empty()) {
            ++result.report.queries_dropped;
            continue;
        }
        result.cleaned.push_back({entry.query, std::move(survivors)});
    }
    return result;
}

void write_filter_report(const FilterReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open filter report for writing: " + path);
    nlohmann::ordered_json header;
    header["record"] = "summary";
    header["input"] = report.input;
    header["removed_wrong_answer"] = report.removed_wrong_answer;
    header["removed_spurious"] = report.removed_spurious;
    header["retained"] = report.retained;
    header["queries_dropped"] = report.queries_dropped;
    out << header.dump() << "\n";
    for (const auto& vd : report.verdicts) {
        nlohmann::ordered_json rec;
        rec["record"] = "verdict";
        rec["query_id"] = vd.query_id;
        rec["path_index"] = vd.path_index;
        rec["stage"] = vd.stage == FilterStage::WrongAnswer
                           ? "wrong_answer"
                           : (vd.stage == FilterStage::Spurious ? "spurious" : "retained");
        rec["flagged"] = vd.flagged;
        rec["rationale"] = vd.rationale;
        out << rec.dump() << "\n";
    }
}

}  // namespace qrd
