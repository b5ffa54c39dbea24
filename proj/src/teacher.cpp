#include "qrd/teacher.hpp"

#include <chrono>
#include <cstdlib>
#include <regex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace qrd {

namespace {
constexpr const char* kAnswerPattern = R"((?:answer is|ANSWER:)\s*([A-Za-z0-9 ]+))";
}

const std::vector<PromptTemplate>& default_templates() {
    static const std::vector<PromptTemplate> templates = {
        {Style::Vanilla, "Answer the question directly with brief linear reasoning.",
         kAnswerPattern},
        {Style::Cot, "Think step by step, writing each intermediate step before the answer.",
         kAnswerPattern},
        {Style::Tot,
         "Explore at least two candidate solution branches, then converge on one answer.",
         kAnswerPattern},
        {Style::Program, "Write Python-like pseudocode that computes the answer, then run it.",
         kAnswerPattern},
        {Style::Backward,
         "Start from a candidate answer and reason backward to check it against the question.",
         kAnswerPattern},
        {Style::FactRetrieval,
         "First recall the relevant facts, then use them to derive the answer.", kAnswerPattern},
    };
    return templates;
}

const PromptTemplate& template_for(Style style) {
    return default_templates()[static_cast<int>(style)];
}

TeacherReply StubTeacherClient::complete(const std::string& prompt) {
    ++calls_;
    prompts_.push_back(prompt);
    if (replies_.empty()) return {false, false, "", "stub: no scripted reply"};
    TeacherReply r = std::move(replies_.front());
    replies_.pop_front();
    return r;
}

namespace {

class HttpTeacherClient : public TeacherClient {
public:
    explicit HttpTeacherClient(HttpTeacherConfig cfg) : cfg_(std::move(cfg)) {}

    TeacherReply complete(const std::string& prompt) override {
        httplib::Client cli(cfg_.endpoint);
        cli.set_connection_timeout(10);
        cli.set_read_timeout(60);
        httplib::Headers headers;
        if (!cfg_.auth_token.empty())
            headers.emplace("Authorization", "Bearer " + cfg_.auth_token);
        nlohmann::json body{{"model", cfg_.model},
                            {"prompt", prompt},
                            {"temperature", cfg_.temperature}};
        auto res = cli.Post(cfg_.path, headers, body.dump(), "application/json");
        if (!res) return {false, true, "", "connection failure to " + cfg_.endpoint};
        if (res->status >= 500)
            return {false, true, "", "server error " + std::to_string(res->status)};
        if (res->status != 200)
            return {false, false, "", "request rejected with status " + std::to_string(res->status)};
        try {
            auto j = nlohmann::json::parse(res->body);
            return {true, false, j.at("text").get<std::string>(), ""};
        } catch (const std::exception& e) {
            return {false, false, "", std::string("malformed teacher response: ") + e.what()};
        }
    }

private:
    HttpTeacherConfig cfg_;
};

}  // namespace

std::unique_ptr<TeacherClient> make_http_teacher(const HttpTeacherConfig& config) {
    if (config.endpoint.empty())
        throw std::invalid_argument("http teacher: endpoint not configured");
    return std::make_unique<HttpTeacherClient>(config);
}

HttpTeacherConfig http_teacher_config_from_env() {
    HttpTeacherConfig cfg;
    if (const char* e = std::getenv("TEACHER_ENDPOINT")) cfg.endpoint = e;
    if (const char* t = std::getenv("TEACHER_TOKEN")) cfg.auth_token = t;
    if (const char* m = std::getenv("TEACHER_MODEL")) cfg.model = m;
    return cfg;
}

ReasoningPath external_teacher_generate(const Query& query, const PromptTemplate& tmpl,
                                        TeacherClient& client, const RetryPolicy& retry) {
    std::string prompt =
        tmpl.instruction_text + "\nQuestion: " + detokenize(query.prompt_tokens);

    TeacherReply reply;
    int delay_ms = retry.backoff_base_ms;
    for (int attempt = 1; attempt <= retry.max_attempts; ++attempt) {
        reply = client.complete(prompt);
        if (reply.ok) break;
        if (!reply.transient)
            throw std::runtime_error("teacher request failed: " + reply.error);
        if (attempt == retry.max_attempts)
            throw std::runtime_error("teacher transport error after " +
                                     std::to_string(retry.max_attempts) +
                                     " attempts: " + reply.error);
        if (delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
        delay_ms *= 2;
    }

    ReasoningPath path;
    path.query_id = query.id;
    path.style = tmpl.style;
    path.source = PathSource::External;
    path.tokens.push_back(vocab().style_token(static_cast<int>(tmpl.style)));
    std::istringstream words(reply.text);
    std::string w;
    while (words >> w)
        if (vocab().contains(w)) path.tokens.push_back(vocab().id(w));

    std::smatch m;
    std::regex re(tmpl.answer_extraction_pattern);
    if (std::regex_search(reply.text, m, re) && m.size() > 1) {
        std::string ans = m[1].str();
        while (!ans.empty() && ans.back() == ' ') ans.pop_back();
        path.extracted_answer = ans;
    } else {
        path.extracted_answer.clear();
        path.flagged = true;
    }
    return path;
}

}  // namespace qrd
