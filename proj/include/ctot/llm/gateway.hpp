#pragma once

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <openssl/evp.h>

#include "httplib.h"
#include "json.hpp"

namespace ctot::llm {

struct Message {
    std::string role; // system, user or assistant
    std::string content;
};

struct ChatRequest {
    std::string model;
    std::vector<Message> messages;
    double temperature = 0.7;
    std::optional<int> max_tokens;

    void validate() const {
        if (messages.empty()) throw std::invalid_argument("chat request needs at least one message");
        for (const auto& m : messages)
            if (m.role != "system" && m.role != "user" && m.role != "assistant")
                throw std::invalid_argument("unknown message role: " + m.role);
        if (!(temperature >= 0)) throw std::invalid_argument("temperature must be >= 0");
        if (max_tokens && *max_tokens < 1) throw std::invalid_argument("max_tokens must be >= 1");
    }

    /// OpenAI-compatible request body.
    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["model"] = model;
        j["messages"] = nlohmann::ordered_json::array();
        for (const auto& m : messages) j["messages"].push_back({{"role", m.role}, {"content", m.content}});
        j["temperature"] = temperature;
        if (max_tokens) j["max_tokens"] = *max_tokens;
        return j;
    }

    static ChatRequest user(std::string model, std::string prompt, double temperature) {
        return {std::move(model), {{"user", std::move(prompt)}}, temperature, std::nullopt};
    }
};

struct ChatResponse {
    std::string text;
    std::uint64_t prompt_tokens = 0;
    std::uint64_t completion_tokens = 0;

    nlohmann::ordered_json to_json() const {
        return {{"text", text}, {"prompt_tokens", prompt_tokens}, {"completion_tokens", completion_tokens}};
    }
    static ChatResponse from_json(const nlohmann::json& j) {
        return {j.at("text").get<std::string>(), j.at("prompt_tokens").get<std::uint64_t>(),
                j.at("completion_tokens").get<std::uint64_t>()};
    }
    bool operator==(const ChatResponse&) const = default;
};

struct GatewayError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct AuthError : GatewayError {
    using GatewayError::GatewayError;
};
struct RateLimitError : GatewayError {
    using GatewayError::GatewayError;
};
struct MalformedResponse : GatewayError {
    using GatewayError::GatewayError;
};
struct TransportError : GatewayError {
    using GatewayError::GatewayError;
};
struct ReplayMiss : GatewayError {
    using GatewayError::GatewayError;
};

/// Per-token prices in currency units; configuration, not constants.
struct Prices {
    double input = 0;
    double output = 0;
};

/// Running token totals; safe to update from many threads.
class UsageLedger {
public:
    explicit UsageLedger(Prices prices = {}) : prices_(prices) {}

    struct Totals {
        std::uint64_t prompt_tokens = 0;
        std::uint64_t completion_tokens = 0;
        bool operator==(const Totals&) const = default;
    };

    void add(std::uint64_t prompt, std::uint64_t completion) {
        prompt_.fetch_add(prompt, std::memory_order_relaxed);
        completion_.fetch_add(completion, std::memory_order_relaxed);
        calls_.fetch_add(1, std::memory_order_relaxed);
    }
    Totals totals() const { return {prompt_tokens(), completion_tokens()}; }
    std::uint64_t prompt_tokens() const { return prompt_.load(std::memory_order_relaxed); }
    std::uint64_t completion_tokens() const { return completion_.load(std::memory_order_relaxed); }
    std::uint64_t calls() const { return calls_.load(std::memory_order_relaxed); }
    double cost() const {
        return static_cast<double>(prompt_tokens()) * prices_.input + static_cast<double>(completion_tokens()) * prices_.output;
    }
    const Prices& prices() const { return prices_; }

private:
    Prices prices_;
    std::atomic<std::uint64_t> prompt_{0}, completion_{0}, calls_{0};
};

/// Hex SHA-256 of the canonical request (model, ordered messages,
/// temperature, max_tokens).
inline std::string cache_key(const ChatRequest& req) {
    const auto canonical = req.to_json().dump();
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(canonical.data(), canonical.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

class Transport {
public:
    virtual ~Transport() = default;
    virtual ChatResponse send(const ChatRequest& req) = 0;
};

struct HttpConfig {
    std::string base_url = "https://api.openai.com";
    std::string path = "/v1/chat/completions";
    std::string api_key_env = "OPENAI_API_KEY";
    int max_retries = 4;
    std::chrono::milliseconds initial_backoff{500};
    std::chrono::seconds timeout{60};
};

/// Parses an OpenAI-style chat completion body.
inline ChatResponse parse_completion_body(const std::string& body) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
        throw MalformedResponse(std::string("response is not JSON: ") + e.what());
    }
    try {
        const auto& choice = j.at("choices").at(0);
        ChatResponse r;
        const auto& content = choice.at("message").at("content");
        r.text = content.is_null() ? "" : content.get<std::string>();
        if (j.contains("usage")) {
            r.prompt_tokens = j["usage"].value("prompt_tokens", std::uint64_t{0});
            r.completion_tokens = j["usage"].value("completion_tokens", std::uint64_t{0});
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw MalformedResponse(std::string("unexpected response shape: ") + e.what());
    }
}

class HttpTransport final : public Transport {
public:
    explicit HttpTransport(HttpConfig cfg = {}) : cfg_(std::move(cfg)) {
        if (const char* k = std::getenv(cfg_.api_key_env.c_str())) api_key_ = k;
    }

    ChatResponse send(const ChatRequest& req) override {
        if (api_key_.empty() && cfg_.base_url.rfind("https://", 0) == 0)
            throw AuthError("no API key in $" + cfg_.api_key_env);
        httplib::Client client(cfg_.base_url);
        client.set_connection_timeout(cfg_.timeout);
        client.set_read_timeout(cfg_.timeout);
        httplib::Headers headers;
        if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
        const auto body = req.to_json().dump();

        auto backoff = cfg_.initial_backoff;
        std::string last_error;
        bool rate_limited = false;
        for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(backoff);
                backoff *= 2;
            }
            auto res = client.Post(cfg_.path, headers, body, "application/json");
            if (!res) {
                last_error = "connection failed: " + httplib::to_string(res.error());
                rate_limited = false;
                continue;
            }
            if (res->status == 401 || res->status == 403) throw AuthError("HTTP " + std::to_string(res->status) + ": " + res->body);
            if (res->status == 429) {
                rate_limited = true;
                last_error = "HTTP 429";
                continue;
            }
            if (res->status >= 500) {
                rate_limited = false;
                last_error = "HTTP " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200) throw TransportError("HTTP " + std::to_string(res->status) + ": " + res->body);
            return parse_completion_body(res->body);
        }
        if (rate_limited) throw RateLimitError("rate limit persisted after retries");
        throw TransportError(last_error);
    }

private:
    HttpConfig cfg_;
    std::string api_key_;
};

enum class GatewayMode { live, record, replay };

inline const char* to_string(GatewayMode m) {
    switch (m) {
    case GatewayMode::live: return "live";
    case GatewayMode::record: return "record";
    case GatewayMode::replay: return "replay";
    }
    return "?";
}

inline GatewayMode parse_gateway_mode(const std::string& s) {
    if (s == "live") return GatewayMode::live;
    if (s == "record") return GatewayMode::record;
    if (s == "replay") return GatewayMode::replay;
    throw std::invalid_argument("gateway mode must be live, record or replay");
}

struct GatewayConfig {
    GatewayMode mode = GatewayMode::live;
    std::string cassette_path; // record/replay
    bool cache = false;        // serve repeats from memory, temperature 0 only
    bool force_cache = false;  // ... at any temperature
    int max_concurrency = 4;
    Prices prices;
};

/// Cassette: JSONL of {key, occurrence, request, response}. The n-th call
/// with a given key replays the n-th recording of that key.
class Cassette {
public:
    static Cassette load(const std::string& path) {
        Cassette c;
        std::ifstream in(path);
        if (!in) throw GatewayError("cannot open cassette " + path);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto j = nlohmann::json::parse(line);
            c.entries_[{j.at("key").get<std::string>(), j.at("occurrence").get<int>()}] =
                ChatResponse::from_json(j.at("response"));
        }
        return c;
    }

    std::optional<ChatResponse> find(const std::string& key, int occurrence) const {
        auto it = entries_.find({key, occurrence});
        if (it == entries_.end()) return std::nullopt;
        return it->second;
    }

    void append(const std::string& key, int occurrence, const ChatRequest& req, const ChatResponse& res) {
        entries_[{key, occurrence}] = res;
        nlohmann::ordered_json j;
        j["key"] = key;
        j["occurrence"] = occurrence;
        j["request"] = req.to_json();
        j["response"] = res.to_json();
        lines_.push_back(j.dump());
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw GatewayError("cannot write cassette " + path);
        for (const auto& l : lines_) out << l << '\n';
    }

    std::size_t size() const { return entries_.size(); }

private:
    std::map<std::pair<std::string, int>, ChatResponse> entries_;
    std::vector<std::string> lines_;
};

/// Front door for all model calls: mode handling, cache, concurrency limit
/// and usage accounting.
class Gateway {
public:
    Gateway(GatewayConfig cfg, std::unique_ptr<Transport> transport = nullptr)
        : cfg_(std::move(cfg)), transport_(std::move(transport)), ledger_(cfg_.prices),
          slots_(std::max(1, cfg_.max_concurrency)) {
        if (cfg_.mode == GatewayMode::replay) {
            cassette_ = Cassette::load(cfg_.cassette_path);
        } else if (!transport_) {
            transport_ = std::make_unique<HttpTransport>();
        }
        if (cfg_.mode == GatewayMode::record && cfg_.cassette_path.empty())
            throw std::invalid_argument("record mode needs a cassette path");
    }

    ~Gateway() {
        if (cfg_.mode == GatewayMode::record) {
            try {
                save();
            } catch (...) {
            }
        }
    }

    ChatResponse chat(const ChatRequest& req) {
        req.validate();
        const auto key = cache_key(req);
        const bool cacheable = cfg_.force_cache || (cfg_.cache && req.temperature == 0);
        int occurrence;
        {
            std::lock_guard lock(mu_);
            if (cacheable)
                if (auto it = cache_.find(key); it != cache_.end()) {
                    cache_hits_.fetch_add(1, std::memory_order_relaxed);
                    return it->second;
                }
            occurrence = occurrences_[key]++;
        }

        ChatResponse res;
        if (cfg_.mode == GatewayMode::replay) {
            auto hit = cassette_.find(key, occurrence);
            if (!hit) throw ReplayMiss("no cassette entry for request " + key.substr(0, 16) + " occurrence " + std::to_string(occurrence));
            res = *hit;
        } else {
            slots_.acquire();
            try {
                res = transport_->send(req);
            } catch (...) {
                slots_.release();
                throw;
            }
            slots_.release();
        }
        ledger_.add(res.prompt_tokens, res.completion_tokens);
        std::lock_guard lock(mu_);
        if (cfg_.mode == GatewayMode::record) cassette_.append(key, occurrence, req, res);
        if (cacheable) cache_.emplace(key, res);
        return res;
    }

    void save() const {
        std::lock_guard lock(mu_);
        cassette_.save(cfg_.cassette_path);
    }

    UsageLedger& ledger() { return ledger_; }
    const UsageLedger& ledger() const { return ledger_; }
    const GatewayConfig& config() const { return cfg_; }
    std::uint64_t cache_hits() const { return cache_hits_.load(std::memory_order_relaxed); }

private:
    GatewayConfig cfg_;
    std::unique_ptr<Transport> transport_;
    UsageLedger ledger_;
    std::counting_semaphore<> slots_;
    mutable std::mutex mu_;
    Cassette cassette_;
    std::map<std::string, ChatResponse> cache_;
    std::map<std::string, int> occurrences_;
    std::atomic<std::uint64_t> cache_hits_{0};
};

} // namespace ctot::llm
