#include "qrd/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

namespace qrd {

using json = nlohmann::ordered_json;

const char* to_string(TaskKind k) {
    switch (k) {
        case TaskKind::ModularArithmetic: return "modular-arithmetic";
        case TaskKind::ListTransform: return "list-transform";
        case TaskKind::DateOffset: return "date-offset";
        case TaskKind::MultiHopFact: return "multi-hop-fact";
    }
    return "?";
}

const char* to_string(Style s) {
    switch (s) {
        case Style::Vanilla: return "vanilla";
        case Style::Cot: return "cot";
        case Style::Tot: return "tot";
        case Style::Program: return "program";
        case Style::Backward: return "backward";
        case Style::FactRetrieval: return "fact_retrieval";
    }
    return "?";
}

TaskKind task_kind_from_string(const std::string& s) {
    for (int i = 0; i < kNumTaskKinds; ++i)
        if (s == to_string(static_cast<TaskKind>(i))) return static_cast<TaskKind>(i);
    throw std::invalid_argument("unknown task kind '" + s + "'");
}

Style style_from_string(const std::string& s) {
    for (int i = 0; i < kNumStyles; ++i)
        if (s == to_string(static_cast<Style>(i))) return static_cast<Style>(i);
    throw std::invalid_argument("unknown style '" + s + "'");
}

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t fnv1a(const std::string& s) { return fnv1a(s.data(), s.size()); }

std::string file_hash_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file for hashing: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string bytes = ss.str();
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a(bytes)));
    return buf;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

CorpusConfig::CorpusConfig() {
    // Defaults plant vanilla/cot/fact-retrieval for the wide-shallow student
    // and tot/program/backward for the deep one, uniformly over task kinds.
    for (int s = 0; s < kNumStyles; ++s) {
        int fav = (s == static_cast<int>(Style::Tot) || s == static_cast<int>(Style::Program) ||
                   s == static_cast<int>(Style::Backward))
                      ? 1
                      : 0;
        for (int t = 0; t < kNumTaskKinds; ++t) {
            utility[s][t][fav] = 0.9;
            utility[s][t][1 - fav] = 0.1;
        }
    }
}

int CorpusConfig::favored_archetype(Style s, TaskKind k) const {
    const auto& u = utility[static_cast<int>(s)][static_cast<int>(k)];
    return u[1] > u[0] ? 1 : 0;
}

namespace {

using Rng = std::mt19937_64;

int uniform_int(Rng& rng, int lo, int hi) {  // inclusive
    return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

struct WorldTables {
    // Corpus-global structures derived from graph_seed: students can learn
    // them because they repeat across queries.
    std::array<std::array<int, Vocabulary::kEntities>, Vocabulary::kRelations> fact_map;
    std::array<int, Vocabulary::kPatternA> bigram_succ;

    explicit WorldTables(std::uint64_t graph_seed) {
        Rng rng(mix_seed(graph_seed, 77));
        for (auto& m : fact_map)
            for (auto& v : m) v = uniform_int(rng, 0, Vocabulary::kEntities - 1);
        for (int i = 0; i < Vocabulary::kPatternA; ++i) bigram_succ[i] = i;
        std::shuffle(bigram_succ.begin(), bigram_succ.end(), rng);
    }
};

std::vector<int> digits_of(int value) {
    std::string s = std::to_string(value);
    std::vector<int> out;
    for (char c : s) out.push_back(vocab().digit(c - '0'));
    return out;
}

struct TaskInstance {
    std::vector<int> prompt;         // excludes BOS
    std::vector<int> answer_tokens;  // canonical answer
};

TaskInstance make_task(TaskKind kind, int difficulty, Rng& rng, const WorldTables& world) {
    const Vocabulary& v = vocab();
    TaskInstance t;
    switch (kind) {
        case TaskKind::ModularArithmetic: {
            bool times = uniform_int(rng, 0, 1) == 1;
            int hi = difficulty <= 2 ? 9 : 99;
            int a = uniform_int(rng, 0, hi), b = uniform_int(rng, 0, hi);
            t.prompt = {v.id("mod"), v.id(times ? "times" : "plus")};
            for (int d : digits_of(a)) t.prompt.push_back(d);
            t.prompt.push_back(Vocabulary::kSep);
            for (int d : digits_of(b)) t.prompt.push_back(d);
            t.prompt.push_back(Vocabulary::kSep);
            int ans = times ? (a * b) % 10 : (a + b) % 10;
            t.answer_tokens = {v.digit(ans)};
            break;
        }
        case TaskKind::ListTransform: {
            bool rev = uniform_int(rng, 0, 1) == 1;
            int len = 2 + std::min(difficulty, 4);
            std::vector<int> xs(len);
            for (int& x : xs) x = uniform_int(rng, 0, 9);
            t.prompt = {v.id("list"), v.id(rev ? "rev" : "sort")};
            for (int x : xs) t.prompt.push_back(v.digit(x));
            t.prompt.push_back(Vocabulary::kSep);
            std::vector<int> ys = xs;
            if (rev)
                std::reverse(ys.begin(), ys.end());
            else
                std::sort(ys.begin(), ys.end());
            for (int y : ys) t.answer_tokens.push_back(v.digit(y));
            break;
        }
        case TaskKind::DateOffset: {
            int d0 = uniform_int(rng, 0, 6);
            int n = difficulty <= 2 ? uniform_int(rng, 1, 9) : uniform_int(rng, 10, 99);
            t.prompt = {v.id("date"), v.day(d0), v.id("plus")};
            for (int d : digits_of(n)) t.prompt.push_back(d);
            t.prompt.push_back(Vocabulary::kSep);
            t.answer_tokens = {v.day((d0 + n) % 7)};
            break;
        }
        case TaskKind::MultiHopFact: {
            int hops = difficulty <= 2 ? 1 : (difficulty <= 4 ? 2 : 3);
            int e = uniform_int(rng, 0, Vocabulary::kEntities - 1);
            t.prompt = {v.id("fact"), v.entity(e)};
            int cur = e;
            for (int h = 0; h < hops; ++h) {
                int r = uniform_int(rng, 0, Vocabulary::kRelations - 1);
                t.prompt.push_back(v.relation(r));
                cur = world.fact_map[r][cur];
            }
            t.prompt.push_back(Vocabulary::kSep);
            t.answer_tokens = {v.entity(cur)};
            break;
        }
    }
    return t;
}

std::vector<int> wrong_answer_tokens(const TaskInstance& t, TaskKind kind, Rng& rng) {
    const Vocabulary& v = vocab();
    std::vector<int> out = t.answer_tokens;
    switch (kind) {
        case TaskKind::ModularArithmetic: {
            int cur = out[0] - v.digit(0);
            out[0] = v.digit((cur + uniform_int(rng, 1, 9)) % 10);
            break;
        }
        case TaskKind::ListTransform: {
            int i = uniform_int(rng, 0, static_cast<int>(out.size()) - 1);
            int cur = out[i] - v.digit(0);
            out[i] = v.digit((cur + uniform_int(rng, 1, 9)) % 10);
            break;
        }
        case TaskKind::DateOffset: {
            int cur = out[0] - v.day(0);
            out[0] = v.day((cur + uniform_int(rng, 1, 6)) % 7);
            break;
        }
        case TaskKind::MultiHopFact: {
            int cur = out[0] - v.entity(0);
            out[0] = v.entity((cur + uniform_int(rng, 1, Vocabulary::kEntities - 1)) %
                              Vocabulary::kEntities);
            break;
        }
    }
    return out;
}

// Ramps to fully random at difficulty 5: the hardest queries give neither
// student architecture an edge, so routing has nothing to prefer there.
double pattern_noise(int difficulty) { return std::min(1.0, 0.25 * (difficulty - 1)); }

std::vector<int> bigram_block(int len, double noise, Rng& rng, const WorldTables& world) {
    const Vocabulary& v = vocab();
    std::vector<int> out;
    for (int i = 0; i < len / 2; ++i) {
        int x = uniform_int(rng, 0, Vocabulary::kPatternA - 1);
        out.push_back(v.pattern_a(x));
        int succ = uniform01(rng) < noise ? uniform_int(rng, 0, Vocabulary::kPatternA - 1)
                                          : world.bigram_succ[x];
        out.push_back(v.pattern_a(succ));
    }
    return out;
}

std::vector<int> copy_block(int len, double noise, Rng& rng) {
    const Vocabulary& v = vocab();
    int m = len / 2;
    std::vector<int> first(m);
    for (int& x : first) x = v.pattern_b(uniform_int(rng, 0, Vocabulary::kPatternB - 1));
    std::vector<int> out = first;
    for (int x : first)
        out.push_back(uniform01(rng) < noise
                          ? v.pattern_b(uniform_int(rng, 0, Vocabulary::kPatternB - 1))
                          : x);
    return out;
}

std::vector<int> prompt_content(const std::vector<int>& prompt) {
    std::vector<int> out;
    for (int t : prompt)
        if (t != Vocabulary::kSep) out.push_back(t);
    return out;
}

// Three donor tokens sharing nothing with this query's prompt, for spurious
// step injection. Falls back to entity tokens when donors overlap everywhere.
std::vector<int> spurious_tokens(const CorpusConfig& cfg, std::uint64_t seed, int qid,
                                 const std::unordered_set<int>& own, Rng& rng,
                                 const WorldTables& world) {
    for (int attempt = 0; attempt < 8; ++attempt) {
        int donor = (qid + 1 + uniform_int(rng, 0, std::max(1, cfg.n_queries - 2))) %
                    std::max(1, cfg.n_queries);
        if (donor == qid) continue;
        Rng drng(mix_seed(seed, static_cast<std::uint64_t>(donor)));
        TaskKind dkind = static_cast<TaskKind>(donor % kNumTaskKinds);
        int ddiff = 1 + (donor / kNumTaskKinds) % 5;
        TaskInstance dt = make_task(dkind, ddiff, drng, world);
        std::vector<int> cand;
        for (int t : prompt_content(dt.prompt))
            if (!own.count(t)) cand.push_back(t);
        if (cand.size() >= 3) {
            std::vector<int> out;
            for (int i = 0; i < 3; ++i)
                out.push_back(cand[uniform_int(rng, 0, static_cast<int>(cand.size()) - 1)]);
            return out;
        }
    }
    std::vector<int> out;
    while (out.size() < 3) {
        int t = vocab().entity(uniform_int(rng, 0, Vocabulary::kEntities - 1));
        if (!own.count(t)) out.push_back(t);
    }
    return out;
}

}  // namespace

std::string detokenize(const std::vector<int>& tokens) {
    std::string out;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += vocab().name(tokens[i]);
    }
    return out;
}

std::string extract_answer(const std::vector<int>& tokens) {
    const int ans_id = vocab().id("answer");
    int pos = -1;
    for (size_t i = 0; i < tokens.size(); ++i)
        if (tokens[i] == ans_id) pos = static_cast<int>(i);
    if (pos < 0) return "";
    std::vector<int> span;
    for (size_t i = pos + 1; i < tokens.size() && tokens[i] != Vocabulary::kEos; ++i)
        span.push_back(tokens[i]);
    return detokenize(span);
}

Corpus generate_corpus(const CorpusConfig& cfg, std::uint64_t seed) {
    if (cfg.n_queries < 1 || cfg.paths_per_query < 1)
        throw std::invalid_argument("generate_corpus: n_queries and paths_per_query must be >= 1");
    const Vocabulary& v = vocab();
    WorldTables world(cfg.graph_seed);
    Corpus corpus;
    corpus.reserve(cfg.n_queries);

    for (int qid = 0; qid < cfg.n_queries; ++qid) {
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(qid)));
        TaskKind kind = static_cast<TaskKind>(qid % kNumTaskKinds);
        int difficulty = 1 + (qid / kNumTaskKinds) % 5;
        TaskInstance task = make_task(kind, difficulty, rng, world);

        CorpusEntry entry;
        entry.query = {qid, kind, task.prompt, detokenize(task.answer_tokens), difficulty};
        // Teacher errors are systematic, not diffuse: every wrong path of a
        // query agrees on one wrong answer, so unfiltered training data
        // actively teaches the misconception instead of spreading probability
        // mass over many different wrong answers.
        std::vector<int> consistent_wrong = wrong_answer_tokens(task, kind, rng);
        std::vector<int> restate = prompt_content(task.prompt);
        std::unordered_set<int> own(restate.begin(), restate.end());

        for (int j = 0; j < cfg.paths_per_query; ++j) {
            Style style = static_cast<Style>(j % kNumStyles);
            bool wrong = uniform01(rng) < cfg.p_wrong;
            bool spurious = uniform01(rng) < cfg.p_spur;
            bool benign_given = uniform01(rng) < 0.25;

            // A wrong final answer is the product of broken reasoning: the
            // path's pattern block carries no planted structure at all, so
            // keeping such paths in training data hurts pattern learning,
            // not just the answer token.
            double noise = wrong ? 1.0 : pattern_noise(difficulty);
            std::vector<int> block = cfg.favored_archetype(style, kind) == 1
                                         ? copy_block(cfg.pattern_len, noise, rng)
                                         : bigram_block(cfg.pattern_len, noise, rng, world);

            std::vector<int> body;
            auto append = [&body](const std::vector<int>& xs) {
                body.insert(body.end(), xs.begin(), xs.end());
            };
            switch (style) {
                case Style::Vanilla:
                    body.push_back(v.id("step"));
                    append(restate);
                    body.push_back(v.id("therefore"));
                    append(block);
                    break;
                case Style::Cot:
                    body.push_back(v.id("step"));
                    append(restate);
                    body.push_back(v.id("step"));
                    append(block);
                    body.push_back(v.id("therefore"));
                    break;
                case Style::Tot:
                    body.push_back(v.id("branch"));
                    append(restate);
                    body.push_back(v.id("branch"));
                    append(block);
                    body.push_back(v.id("join"));
                    break;
                case Style::Program:
                    body.push_back(v.id("def"));
                    append(restate);
                    append(block);
                    body.push_back(v.id("ret"));
                    break;
                case Style::Backward: {
                    body.push_back(v.id("check"));
                    std::vector<int> rev(restate.rbegin(), restate.rend());
                    append(rev);
                    append(block);
                    break;
                }
                case Style::FactRetrieval:
                    body.push_back(v.id("recall"));
                    append(restate);
                    append(block);
                    break;
            }
            if (benign_given && !restate.empty()) {
                std::vector<int> g{v.id("given")};
                g.push_back(restate[uniform_int(rng, 0, static_cast<int>(restate.size()) - 1)]);
                g.push_back(restate[uniform_int(rng, 0, static_cast<int>(restate.size()) - 1)]);
                body.insert(body.begin() + 1, g.begin(), g.end());
            }
            if (spurious) {
                std::vector<int> bad = spurious_tokens(cfg, seed, qid, own, rng, world);
                bad.insert(bad.begin(), v.id("given"));
                size_t at = std::min<size_t>(body.size(), 1 + body.size() / 2);
                body.insert(body.begin() + at, bad.begin(), bad.end());
            }

            std::vector<int> answer = wrong ? consistent_wrong : task.answer_tokens;

            ReasoningPath path;
            path.query_id = qid;
            path.style = style;
            path.tokens.push_back(v.style_token(static_cast<int>(style)));
            path.tokens.insert(path.tokens.end(), body.begin(), body.end());
            path.tokens.push_back(v.id("answer"));
            path.tokens.insert(path.tokens.end(), answer.begin(), answer.end());
            path.tokens.push_back(Vocabulary::kEos);
            path.extracted_answer = detokenize(answer);
            path.label_correct = !wrong;
            path.label_spurious = spurious;
            path.source = PathSource::Synthetic;
            entry.paths.push_back(std::move(path));
        }
        corpus.push_back(std::move(entry));
    }
    return corpus;
}

void write_corpus(const Corpus& corpus, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open corpus file for writing: " + path);
    for (const auto& entry : corpus) {
        if (entry.paths.empty())
            throw std::invalid_argument("write_corpus: query " + std::to_string(entry.query.id) +
                                        " has no paths");
        for (const auto& p : entry.paths) {
            json rec;
            rec["query_id"] = entry.query.id;
            rec["task_kind"] = to_string(entry.query.task_kind);
            rec["difficulty"] = entry.query.difficulty;
            rec["prompt"] = detokenize(entry.query.prompt_tokens);
            rec["ground_truth"] = entry.query.ground_truth;
            rec["style"] = to_string(p.style);
            rec["tokens"] = p.tokens;
            rec["extracted_answer"] = p.extracted_answer;
            if (p.source == PathSource::Synthetic) {
                rec["label_correct"] = p.label_correct;
                rec["label_spurious"] = p.label_spurious;
            }
            rec["source"] = p.source == PathSource::Synthetic ? "synthetic" : "external";
            out << rec.dump() << "\n";
        }
    }
}

Corpus read_corpus(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open corpus file: " + path);
    Corpus corpus;
    std::string line;
    int line_no = 0;
    const Vocabulary& v = vocab();
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            throw std::runtime_error("corpus parse error at line " + std::to_string(line_no) +
                                     ": " + e.what());
        }
        try {
            int qid = rec.at("query_id").get<int>();
            if (corpus.empty() || corpus.back().query.id != qid) {
                Query q;
                q.id = qid;
                q.task_kind = task_kind_from_string(rec.at("task_kind").get<std::string>());
                q.difficulty = rec.at("difficulty").get<int>();
                if (q.difficulty < 1 || q.difficulty > 5)
                    throw std::invalid_argument("difficulty out of range");
                std::istringstream ps(rec.at("prompt").get<std::string>());
                std::string tok;
                while (ps >> tok) q.prompt_tokens.push_back(v.id(tok));
                q.ground_truth = rec.at("ground_truth").get<std::string>();
                if (q.ground_truth.empty())
                    throw std::invalid_argument("empty ground_truth");
                corpus.push_back({std::move(q), {}});
            }
            ReasoningPath p;
            p.query_id = qid;
            p.style = style_from_string(rec.at("style").get<std::string>());
            p.tokens = rec.at("tokens").get<std::vector<int>>();
            if (p.tokens.empty()) throw std::invalid_argument("empty token sequence");
            for (int t : p.tokens) v.name(t);  // range check
            p.extracted_answer = rec.at("extracted_answer").get<std::string>();
            std::string src = rec.at("source").get<std::string>();
            p.source = src == "synthetic" ? PathSource::Synthetic : PathSource::External;
            if (p.source == PathSource::Synthetic) {
                p.label_correct = rec.at("label_correct").get<bool>();
                p.label_spurious = rec.at("label_spurious").get<bool>();
            }
            corpus.back().paths.push_back(std::move(p));
        } catch (const std::exception& e) {
            throw std::runtime_error("corpus schema error at line " + std::to_string(line_no) +
                                     ": " + e.what());
        }
    }
    return corpus;
}

}  // namespace qrd
