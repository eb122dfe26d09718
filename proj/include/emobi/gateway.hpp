#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emobi/types.hpp"

namespace emobi {

struct CompletionRequest {
    std::string prompt;
    std::string model_id;
    double temperature = 0.0;
    int max_tokens = 512;
    std::vector<std::string> stop;

    bool operator==(const CompletionRequest&) const = default;
};

struct CompletionResponse {
    std::string text;
    std::map<std::string, std::string> provider_meta;
    bool cached = false;
};

struct RetryPolicy {
    int max_attempts = 3;
    // Delay before retry attempt i is backoff_ms[min(i-1, size-1)]; an empty
    // schedule means no delay.
    std::vector<int> backoff_ms = {250, 1000, 4000};

    bool operator==(const RetryPolicy&) const = default;
};

// One scripted response. The rule matches when every entry of `contains`
// appears in the prompt. One-shot rules are consumed after answering once.
// fail_count > 0 makes the rule raise that many transient errors before it
// answers, which is how tests exercise the retry path.
struct MockRule {
    std::vector<std::string> contains;
    std::string response;
    bool one_shot = false;
    int fail_count = 0;

    bool operator==(const MockRule&) const = default;
};

enum class ProviderKind { http_api, scripted_mock };

std::string to_string(ProviderKind k);
ProviderKind provider_kind_from_string(const std::string& s);

// Payload field names for the chat/completions-style JSON POST, so the same
// client can talk to differently shaped endpoints.
struct HttpShape {
    std::string model_field = "model";
    std::string messages_field = "messages";
    std::string role = "user";
    std::string temperature_field = "temperature";
    std::string max_tokens_field = "max_tokens";
    std::string stop_field = "stop";
    std::string response_text_path = "choices.0.message.content";

    bool operator==(const HttpShape&) const = default;
};

struct ProviderConfig {
    ProviderKind kind = ProviderKind::scripted_mock;
    std::string endpoint;        // http_api only
    std::string credential_env;  // name of the env var holding the key
    RetryPolicy retry;
    std::vector<MockRule> script;  // scripted_mock only
    HttpShape http;
    int max_in_flight = 4;

    void validate() const;  // throws ConfigError naming the field
    bool operator==(const ProviderConfig&) const = default;
};

void to_json(nlohmann::json& j, const RetryPolicy& p);
void from_json(const nlohmann::json& j, RetryPolicy& p);
void to_json(nlohmann::json& j, const MockRule& r);
void from_json(const nlohmann::json& j, MockRule& r);
void to_json(nlohmann::json& j, const HttpShape& h);
void from_json(const nlohmann::json& j, HttpShape& h);
void to_json(nlohmann::json& j, const ProviderConfig& c);
void from_json(const nlohmann::json& j, ProviderConfig& c);

// Stable content hash over (prompt, model_id, temperature, max_tokens, stop).
std::string cache_key(const CompletionRequest& req);

// Content-addressed response store, one file per key under
// <dir>/<first-2-hex>/<digest>.json, written via temp-file-then-rename.
class ResponseCache {
  public:
    explicit ResponseCache(std::filesystem::path dir);

    // Returns the stored text, or nullopt on miss. A corrupt entry is
    // treated as a miss with a warning on stderr.
    std::optional<std::string> lookup(const std::string& key) const;
    void store(const std::string& key, const CompletionRequest& req,
               const std::string& text) const;

    struct Stats {
        std::size_t entries = 0;
        std::uintmax_t bytes = 0;
    };
    Stats stats() const;
    void clear() const;

    const std::filesystem::path& dir() const { return dir_; }

  private:
    std::filesystem::path dir_;
};

struct TranscriptEntry {
    CompletionRequest request;
    CompletionResponse response;
};

// Provider-agnostic completion front end. Safe for concurrent callers;
// http_api traffic is throttled by max_in_flight.
class Gateway {
  public:
    explicit Gateway(ProviderConfig cfg);
    ~Gateway();

    Gateway(const Gateway&) = delete;
    Gateway& operator=(const Gateway&) = delete;

    // Issues the request, retrying transient failures per policy.
    CompletionResponse complete(const CompletionRequest& req);

    // Cache hit returns the stored text with cached=true and no provider
    // call; a miss delegates to complete() and persists the result.
    CompletionResponse cached_complete(const CompletionRequest& req, ResponseCache& cache);

    // Ordered record of every completion issued through this gateway,
    // including cache hits (flagged as such).
    std::vector<TranscriptEntry> transcript() const;
    void clear_transcript();

    // Attempts made against the underlying provider (cache hits add none).
    long provider_invocations() const { return invocations_.load(); }

    const ProviderConfig& config() const { return cfg_; }

  private:
    CompletionResponse complete_once(const CompletionRequest& req);
    CompletionResponse run_mock(const CompletionRequest& req);
    CompletionResponse run_http(const CompletionRequest& req);
    void record(const CompletionRequest& req, const CompletionResponse& resp);

    ProviderConfig cfg_;

    struct RuleState {
        bool used = false;
        int fails_left = 0;
    };
    std::mutex mock_mu_;
    std::vector<RuleState> rule_state_;

    mutable std::mutex transcript_mu_;
    std::vector<TranscriptEntry> transcript_;

    std::atomic<long> invocations_{0};

    struct Limiter;
    std::unique_ptr<Limiter> limiter_;
};

}  // namespace emobi
