#include "corpusforge/gateway.hpp"

#include <cctype>
#include <chrono>
#include <cstdlib>
#include <random>
#include <regex>
#include <thread>

#include <httplib.h>

#include "corpusforge/errors.hpp"
#include "corpusforge/ids.hpp"

namespace corpusforge {

namespace {

std::int64_t now_ms() {
    using namespace std::chrono;
    return duration_cast<milliseconds>(steady_clock::now().time_since_epoch()).count();
}

bool retryable_status(int status) {
    return status == 429 || (status >= 500 && status < 600);
}

}  // namespace

ParsedUrl parse_url(const std::string& url) {
    ParsedUrl out;
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("malformed URL '" + url + "': missing scheme");
    }
    out.scheme = url.substr(0, scheme_end);
    if (out.scheme != "http" && out.scheme != "https" && out.scheme != "mock") {
        throw ConfigError("unsupported URL scheme '" + out.scheme + "'");
    }
    std::string rest = url.substr(scheme_end + 3);
    const auto path_start = rest.find('/');
    if (path_start != std::string::npos) {
        out.path = rest.substr(path_start);
        rest = rest.substr(0, path_start);
    }
    const auto colon = rest.find(':');
    if (colon != std::string::npos) {
        out.host = rest.substr(0, colon);
        try {
            out.port = std::stoi(rest.substr(colon + 1));
        } catch (const std::exception&) {
            throw ConfigError("malformed URL '" + url + "': bad port");
        }
    } else {
        out.host = rest;
        out.port = out.scheme == "https" ? 443 : 80;
    }
    if (out.host.empty()) {
        throw ConfigError("malformed URL '" + url + "': missing host");
    }
    return out;
}

RawResponse http_post_json(const std::string& url, const std::string& body, int timeout_s,
                           const std::string& bearer_token) {
    const ParsedUrl parsed = parse_url(url);
    RawResponse out;

    httplib::Client client(parsed.scheme + "://" + parsed.host + ":" + std::to_string(parsed.port));
    client.set_connection_timeout(timeout_s, 0);
    client.set_read_timeout(timeout_s, 0);
    client.set_write_timeout(timeout_s, 0);

    httplib::Headers headers;
    if (!bearer_token.empty()) {
        headers.emplace("Authorization", "Bearer " + bearer_token);
    }
    const std::string path = parsed.path.empty() ? "/" : parsed.path;
    auto res = client.Post(path, headers, body, "application/json");
    if (!res) {
        out.error = "transport failure: " + httplib::to_string(res.error());
        return out;
    }
    out.transport_ok = true;
    out.status = res->status;
    out.body = res->body;
    return out;
}

RawResponse HttpBackend::post_chat(const ModelEndpoint& endpoint, const ojson& payload) {
    std::string token;
    if (!endpoint.auth_token_env.empty()) {
        const char* value = std::getenv(endpoint.auth_token_env.c_str());
        if (value == nullptr || *value == '\0') {
            // Signalled through status 0 + error so the gateway can classify
            // it as a config problem without a throw across threads.
            RawResponse out;
            out.error = "missing credential: environment variable '" + endpoint.auth_token_env +
                        "' is not set";
            out.status = -1;
            return out;
        }
        token = value;
    }
    return http_post_json(endpoint.base_url + "/v1/chat/completions", payload.dump(),
                          endpoint.request_timeout_s, token);
}

// ---------------------------------------------------------------------------
// Mock backend
// ---------------------------------------------------------------------------

namespace {

constexpr const char* kMockVocab[] = {
    "morning",  "window",   "garden",   "letter",  "coffee",  "river",    "quietly", "neighbor",
    "kitchen",  "evening",  "bicycle",  "jacket",  "station", "notebook", "weather", "hallway",
    "whisper",  "shoulder", "curtain",  "lantern", "pocket",  "sidewalk", "blanket", "doorway",
    "umbrella", "corner",   "village",  "harbor",  "message", "teacher",  "stairs",  "market",
    "bridge",   "autumn",   "winter",   "summer",  "orchard", "library",  "pencil",  "mirror",
    "suitcase", "ticket",   "grocery",  "balcony", "chimney", "meadow",   "valley",  "thunder",
    "sunrise",  "midnight", "football", "grandma", "cousin",  "workshop", "canteen", "festival",
    "painting", "journal",  "backpack", "compass", "sweater", "reunion",  "holiday", "postcard",
};
constexpr std::size_t kMockVocabSize = sizeof(kMockVocab) / sizeof(kMockVocab[0]);

std::string mock_sentence(std::mt19937_64& rng) {
    const int words = 8 + static_cast<int>(rng() % 5);
    std::string s;
    for (int w = 0; w < words; ++w) {
        std::string word = kMockVocab[rng() % kMockVocabSize];
        if (w == 0) {
            word[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(word[0])));
        }
        if (w > 0) {
            s += ' ';
        }
        s += word;
    }
    s += '.';
    return s;
}

std::string mock_passage(std::mt19937_64& rng, int sentences) {
    std::string s;
    for (int i = 0; i < sentences; ++i) {
        if (i > 0) {
            s += ' ';
        }
        s += mock_sentence(rng);
    }
    return s;
}

}  // namespace

std::string mock_completion_text(std::uint64_t seed, const std::string& model_id,
                                 const std::string& system, const std::string& prompt) {
    std::uint64_t h = fnv1a64(model_id, seed ^ 0x6d6f636bULL);
    h = fnv1a64(system, h);
    h = fnv1a64(prompt, h);
    std::mt19937_64 rng(h);

    // Prompts that ask for "exactly N" items get an enumerated list of N
    // distinct three-sentence passages; anything else gets one passage.
    static const std::regex kExactly("exactly ([0-9]{1,3})");
    std::smatch m;
    if (std::regex_search(prompt, m, kExactly)) {
        const int count = std::stoi(m[1].str());
        std::string text;
        for (int i = 1; i <= count; ++i) {
            text += std::to_string(i);
            text += ". ";
            text += mock_passage(rng, 3);
            text += '\n';
        }
        return text;
    }
    return mock_passage(rng, 3);
}

MockBackend::MockBackend(MockBackendOptions options) : options_(options) {}

RawResponse MockBackend::post_chat(const ModelEndpoint& endpoint, const ojson& payload) {
    const int current = in_flight_.fetch_add(1) + 1;
    int peak = peak_.load();
    while (current > peak && !peak_.compare_exchange_weak(peak, current)) {
    }

    std::string system;
    std::string prompt;
    for (const auto& message : payload.at("messages")) {
        const std::string role = message.at("role").get<std::string>();
        if (role == "system") {
            system = message.at("content").get<std::string>();
        } else if (role == "user") {
            prompt = message.at("content").get<std::string>();
        }
    }
    std::uint64_t seed = options_.seed;
    if (payload.contains("seed")) {
        seed ^= static_cast<std::uint64_t>(payload["seed"].get<std::int64_t>());
    }
    const std::string text = mock_completion_text(seed, endpoint.model_id, system, prompt);

    if (options_.latency_ms_max > 0) {
        const std::uint64_t h = fnv1a64(prompt, options_.seed);
        std::this_thread::sleep_for(std::chrono::milliseconds(
            h % static_cast<std::uint64_t>(options_.latency_ms_max)));
    }

    ojson body = {
        {"id", "mock-cmpl"},
        {"object", "chat.completion"},
        {"model", endpoint.model_id},
        {"choices",
         ojson::array({ojson{{"index", 0},
                             {"message", ojson{{"role", "assistant"}, {"content", text}}},
                             {"finish_reason", "stop"}}})},
        {"usage", ojson{{"prompt_tokens", static_cast<std::int64_t>(prompt.size() / 4)},
                        {"completion_tokens", static_cast<std::int64_t>(text.size() / 4)}}},
    };

    RawResponse out;
    out.transport_ok = true;
    out.status = 200;
    out.body = body.dump();
    in_flight_.fetch_sub(1);
    return out;
}

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

const ModelEndpoint& route_even(const std::vector<ModelEndpoint>& pool, std::size_t item_index) {
    if (pool.empty()) {
        throw ConfigError("model pool is empty");
    }
    return pool[item_index % pool.size()];
}

LlmGateway::LlmGateway(ChatBackend& backend, RetryPolicy retry) : backend_(backend), retry_(retry) {}

ChatOutcome LlmGateway::generate(const ModelEndpoint& endpoint, const ChatRequest& request) {
    ChatOutcome outcome;
    if (request.prompt.empty()) {
        outcome.error = ErrorKind::Config;
        outcome.error_message = "chat request has an empty prompt";
        return outcome;
    }
    try {
        request.params.validate();
    } catch (const ValidationError& e) {
        outcome.error = ErrorKind::Config;
        outcome.error_message = e.what();
        return outcome;
    }

    ojson payload = {
        {"model", endpoint.model_id},
        {"messages", ojson::array()},
        {"temperature", request.params.temperature},
        {"top_p", request.params.top_p},
        {"max_tokens", request.params.max_tokens},
    };
    if (request.system) {
        payload["messages"].push_back(ojson{{"role", "system"}, {"content", *request.system}});
    }
    payload["messages"].push_back(ojson{{"role", "user"}, {"content", request.prompt}});
    if (request.params.seed) {
        payload["seed"] = *request.params.seed;
    }

    thread_local std::mt19937_64 jitter_rng{std::random_device{}()};
    const std::int64_t start = now_ms();

    for (int attempt = 1; attempt <= retry_.max_attempts; ++attempt) {
        outcome.attempts = attempt;
        const RawResponse raw = backend_.post_chat(endpoint, payload);

        if (raw.status == -1) {
            outcome.error = ErrorKind::Config;
            outcome.error_message = raw.error;
            return outcome;
        }

        const bool transient = !raw.transport_ok || retryable_status(raw.status);
        if (raw.transport_ok && raw.status == 200) {
            ojson body = ojson::parse(raw.body, nullptr, false);
            if (body.is_discarded() || !body.contains("choices") || body["choices"].empty() ||
                !body["choices"][0].contains("message") ||
                !body["choices"][0]["message"].contains("content") ||
                !body["choices"][0]["message"]["content"].is_string()) {
                outcome.error = ErrorKind::Protocol;
                outcome.error_message = "malformed chat completion body";
                return outcome;
            }
            outcome.response.text = body["choices"][0]["message"]["content"].get<std::string>();
            outcome.response.model_id =
                body.contains("model") && body["model"].is_string()
                    ? body["model"].get<std::string>()
                    : endpoint.model_id;
            if (body.contains("usage") && body["usage"].is_object()) {
                TokenUsage usage;
                usage.prompt_tokens = body["usage"].value("prompt_tokens", std::int64_t{0});
                usage.completion_tokens = body["usage"].value("completion_tokens", std::int64_t{0});
                outcome.response.usage = usage;
            }
            outcome.response.latency_ms = now_ms() - start;
            outcome.error = ErrorKind::None;
            return outcome;
        }

        if (!transient) {
            outcome.error = ErrorKind::Transport;
            outcome.error_message = "HTTP " + std::to_string(raw.status) + " (not retried)";
            return outcome;
        }

        outcome.error = ErrorKind::Transport;
        outcome.error_message = raw.transport_ok
                                    ? "HTTP " + std::to_string(raw.status)
                                    : raw.error;

        if (attempt < retry_.max_attempts && retry_.base_delay_ms > 0) {
            double delay = retry_.base_delay_ms;
            for (int i = 1; i < attempt; ++i) {
                delay *= retry_.factor;
            }
            std::uniform_real_distribution<double> dist(1.0 - retry_.jitter, 1.0 + retry_.jitter);
            delay *= dist(jitter_rng);
            std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<std::int64_t>(delay)));
        }
    }

    outcome.error_message =
        "exhausted " + std::to_string(outcome.attempts) + " attempts: " + outcome.error_message;
    return outcome;
}

std::vector<ChatOutcome> LlmGateway::generate_batch(const std::vector<ModelEndpoint>& pool,
                                                    const std::vector<ChatRequest>& requests,
                                                    int max_in_flight) {
    if (max_in_flight < 1) {
        throw ConfigError("max_in_flight must be >= 1");
    }
    if (pool.empty()) {
        throw ConfigError("model pool is empty");
    }
    std::vector<ChatOutcome> outcomes(requests.size());
    if (requests.empty()) {
        return outcomes;
    }

    const int workers =
        static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(max_in_flight),
                                               requests.size()));
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        threads.emplace_back([&] {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= requests.size()) {
                    return;
                }
                outcomes[i] = generate(route_even(pool, i), requests[i]);
            }
        });
    }
    for (auto& t : threads) {
        t.join();
    }
    return outcomes;
}

}  // namespace corpusforge
