#pragma once

#include <deque>
#include <memory>
#include <string>
#include <vector>

#include "qrd/corpus.hpp"

namespace qrd {

struct PromptTemplate {
    Style style;
    std::string instruction_text;
    std::string answer_extraction_pattern;  // first capture group is the answer
};

// One template per style, mirroring the six corpus styles.
const std::vector<PromptTemplate>& default_templates();
const PromptTemplate& template_for(Style style);

struct TeacherReply {
    bool ok = false;
    bool transient = false;  // retryable failure
    std::string text;
    std::string error;
};

// Black-box completion transport: text in, text out, no logits.
class TeacherClient {
public:
    virtual ~TeacherClient() = default;
    virtual TeacherReply complete(const std::string& prompt) = 0;
};

// Scripted client for tests: replies are consumed in order.
class StubTeacherClient : public TeacherClient {
public:
    void push_reply(TeacherReply r) { replies_.push_back(std::move(r)); }
    TeacherReply complete(const std::string& prompt) override;
    int calls() const { return calls_; }
    const std::vector<std::string>& prompts() const { return prompts_; }

private:
    std::deque<TeacherReply> replies_;
    std::vector<std::string> prompts_;
    int calls_ = 0;
};

struct HttpTeacherConfig {
    std::string endpoint;  // host[:port], e.g. "api.example.com:443"
    std::string path = "/v1/complete";
    std::string auth_token;
    std::string model;
    double temperature = 0.7;
};

// Thin JSON-over-HTTP adapter; credentials come from the environment
// (TEACHER_ENDPOINT / TEACHER_TOKEN), never from config files.
std::unique_ptr<TeacherClient> make_http_teacher(const HttpTeacherConfig& config);
HttpTeacherConfig http_teacher_config_from_env();

struct RetryPolicy {
    int max_attempts = 5;
    int backoff_base_ms = 100;  // doubles per attempt; 0 in tests
};

ReasoningPath external_teacher_generate(const Query& query, const PromptTemplate& tmpl,
                                        TeacherClient& client, const RetryPolicy& retry = {});

}  // namespace qrd
