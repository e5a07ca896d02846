#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "corpusforge/records.hpp"

namespace corpusforge {

struct ModelEndpoint {
    std::string model_id;
    std::string base_url;        // server root; requests go to <base_url>/v1/chat/completions
    std::string auth_token_env;  // env var holding the bearer token; empty = no auth header
    int request_timeout_s = 60;
};

struct ChatRequest {
    std::optional<std::string> system;
    std::string prompt;
    GenerationParams params;
};

struct TokenUsage {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
};

struct ChatResponse {
    std::string text;
    std::string model_id;
    std::int64_t latency_ms = 0;
    std::optional<TokenUsage> usage;
};

enum class ErrorKind { None, Transport, Protocol, Config };

// Per-request outcome. Generation never throws on the hot path so that batch
// slots can carry individual failures.
struct ChatOutcome {
    ChatResponse response;
    ErrorKind error = ErrorKind::None;
    std::string error_message;
    int attempts = 0;

    bool ok() const { return error == ErrorKind::None; }
};

struct RetryPolicy {
    int max_attempts = 5;
    int base_delay_ms = 500;
    double factor = 2.0;
    double jitter = 0.2;  // +/- fraction of the computed delay
};

// Raw transport result of a single POST, before protocol interpretation.
struct RawResponse {
    bool transport_ok = false;
    int status = 0;
    std::string body;
    std::string error;
};

struct ParsedUrl {
    std::string scheme;
    std::string host;
    int port = 0;
    std::string path;  // "" when absent
};
ParsedUrl parse_url(const std::string& url);  // ConfigError on malformed input

// One HTTP POST of a JSON body; shared by the chat and scorer clients.
RawResponse http_post_json(const std::string& url, const std::string& body,
                           int timeout_s, const std::string& bearer_token = {});

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    // One POST of the OpenAI-shaped payload. No retries at this level.
    virtual RawResponse post_chat(const ModelEndpoint& endpoint, const ojson& payload) = 0;
};

class HttpBackend : public ChatBackend {
public:
    RawResponse post_chat(const ModelEndpoint& endpoint, const ojson& payload) override;
};

struct MockBackendOptions {
    std::uint64_t seed = 0;
    int latency_ms_max = 0;  // > 0: sleep a deterministic pseudo-random amount
};

// Deterministic stand-in for a model server: replies with text derived from a
// seeded hash of (model, system, prompt), wrapped in the same JSON shape the
// HTTP backend parses. When the prompt asks for "exactly N" items it returns
// an enumerated list of N entries so the brainstorm splitter has something to
// chew on. Tracks in-flight calls so tests can assert concurrency bounds.
class MockBackend : public ChatBackend {
public:
    explicit MockBackend(MockBackendOptions options = {});

    RawResponse post_chat(const ModelEndpoint& endpoint, const ojson& payload) override;

    int peak_in_flight() const { return peak_.load(); }

private:
    MockBackendOptions options_;
    std::atomic<int> in_flight_{0};
    std::atomic<int> peak_{0};
};

// Deterministic text used by MockBackend; exposed for tests.
std::string mock_completion_text(std::uint64_t seed, const std::string& model_id,
                                 const std::string& system, const std::string& prompt);

// pool[item_index % pool.size()]; over N items per-model counts differ by <= 1.
const ModelEndpoint& route_even(const std::vector<ModelEndpoint>& pool, std::size_t item_index);

class LlmGateway {
public:
    explicit LlmGateway(ChatBackend& backend, RetryPolicy retry = {});

    // Retries transient failures (transport errors, 429, 5xx) with capped
    // exponential backoff; 4xx other than 429 fail immediately.
    ChatOutcome generate(const ModelEndpoint& endpoint, const ChatRequest& request);

    // Runs requests against route_even(pool, i) with at most max_in_flight
    // outstanding at a time. Result i always corresponds to request i.
    std::vector<ChatOutcome> generate_batch(const std::vector<ModelEndpoint>& pool,
                                            const std::vector<ChatRequest>& requests,
                                            int max_in_flight);

private:
    ChatBackend& backend_;
    RetryPolicy retry_;
};

}  // namespace corpusforge
