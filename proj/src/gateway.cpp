#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "emobi/gateway.hpp"

#include <chrono>
#include <condition_variable>
#include <fstream>
#include <iostream>
#include <regex>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "emobi/digest.hpp"
#include "emobi/text_util.hpp"

namespace emobi {

using nlohmann::json;

std::string to_string(ProviderKind k) {
    return k == ProviderKind::http_api ? "http_api" : "scripted_mock";
}

ProviderKind provider_kind_from_string(const std::string& s) {
    if (s == "http_api" || s == "http") return ProviderKind::http_api;
    if (s == "scripted_mock" || s == "mock") return ProviderKind::scripted_mock;
    throw ConfigError("provider.kind: unknown value '" + s + "'");
}

void ProviderConfig::validate() const {
    if (kind == ProviderKind::http_api) {
        if (endpoint.empty()) throw ConfigError("provider.endpoint: required for http_api");
        if (credential_env.empty())
            throw ConfigError("provider.credential_env: required for http_api");
    } else {
        if (script.empty()) throw ConfigError("provider.script: scripted_mock needs rules");
        for (const auto& rule : script) {
            if (rule.contains.empty())
                throw ConfigError("provider.script: rule with empty match pattern");
        }
    }
    if (retry.max_attempts < 1) throw ConfigError("provider.retry.max_attempts: must be >= 1");
    if (max_in_flight < 1) throw ConfigError("provider.max_in_flight: must be >= 1");
}

namespace {

void validate_request(const CompletionRequest& req) {
    if (trim(req.prompt).empty()) throw ConfigError("request.prompt: must be non-empty");
    if (req.temperature < 0.0) throw ConfigError("request.temperature: must be >= 0");
    if (req.max_tokens < 1) throw ConfigError("request.max_tokens: must be >= 1");
}

json request_to_json(const CompletionRequest& req) {
    return json{{"prompt", req.prompt},
                {"model_id", req.model_id},
                {"temperature", req.temperature},
                {"max_tokens", req.max_tokens},
                {"stop", req.stop}};
}

}  // namespace

std::string cache_key(const CompletionRequest& req) {
    // nlohmann::json keeps keys sorted, so dump() is a canonical form.
    return sha256_hex(request_to_json(req).dump());
}

void to_json(json& j, const RetryPolicy& p) {
    j = json{{"max_attempts", p.max_attempts}, {"backoff_ms", p.backoff_ms}};
}

void from_json(const json& j, RetryPolicy& p) {
    p = RetryPolicy{};
    if (j.contains("max_attempts")) j.at("max_attempts").get_to(p.max_attempts);
    if (j.contains("backoff_ms")) j.at("backoff_ms").get_to(p.backoff_ms);
}

void to_json(json& j, const MockRule& r) {
    j = json{{"contains", r.contains}, {"response", r.response}};
    if (r.one_shot) j["one_shot"] = true;
    if (r.fail_count != 0) j["fail_count"] = r.fail_count;
}

void from_json(const json& j, MockRule& r) {
    r = MockRule{};
    if (j.contains("pattern")) {
        // single-substring shorthand
        r.contains = {j.at("pattern").get<std::string>()};
    } else {
        j.at("contains").get_to(r.contains);
    }
    j.at("response").get_to(r.response);
    if (j.contains("one_shot")) j.at("one_shot").get_to(r.one_shot);
    if (j.contains("fail_count")) j.at("fail_count").get_to(r.fail_count);
}

void to_json(json& j, const HttpShape& h) {
    j = json{{"model_field", h.model_field},
             {"messages_field", h.messages_field},
             {"role", h.role},
             {"temperature_field", h.temperature_field},
             {"max_tokens_field", h.max_tokens_field},
             {"stop_field", h.stop_field},
             {"response_text_path", h.response_text_path}};
}

void from_json(const json& j, HttpShape& h) {
    h = HttpShape{};
    if (j.contains("model_field")) j.at("model_field").get_to(h.model_field);
    if (j.contains("messages_field")) j.at("messages_field").get_to(h.messages_field);
    if (j.contains("role")) j.at("role").get_to(h.role);
    if (j.contains("temperature_field")) j.at("temperature_field").get_to(h.temperature_field);
    if (j.contains("max_tokens_field")) j.at("max_tokens_field").get_to(h.max_tokens_field);
    if (j.contains("stop_field")) j.at("stop_field").get_to(h.stop_field);
    if (j.contains("response_text_path"))
        j.at("response_text_path").get_to(h.response_text_path);
}

void to_json(json& j, const ProviderConfig& c) {
    j = json{{"kind", to_string(c.kind)},
             {"retry", c.retry},
             {"max_in_flight", c.max_in_flight}};
    if (c.kind == ProviderKind::http_api) {
        j["endpoint"] = c.endpoint;
        j["credential_env"] = c.credential_env;
        j["http"] = c.http;
    } else {
        j["script"] = c.script;
    }
}

void from_json(const json& j, ProviderConfig& c) {
    c = ProviderConfig{};
    if (j.contains("kind")) c.kind = provider_kind_from_string(j.at("kind"));
    if (j.contains("endpoint")) j.at("endpoint").get_to(c.endpoint);
    if (j.contains("credential_env")) j.at("credential_env").get_to(c.credential_env);
    if (j.contains("retry")) j.at("retry").get_to(c.retry);
    if (j.contains("script")) j.at("script").get_to(c.script);
    if (j.contains("http")) j.at("http").get_to(c.http);
    if (j.contains("max_in_flight")) j.at("max_in_flight").get_to(c.max_in_flight);
}

// ---------------------------------------------------------------------------
// ResponseCache

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

namespace {

std::filesystem::path entry_path(const std::filesystem::path& dir, const std::string& key) {
    return dir / key.substr(0, 2) / (key + ".json");
}

}  // namespace

std::optional<std::string> ResponseCache::lookup(const std::string& key) const {
    const auto path = entry_path(dir_, key);
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    try {
        json j = json::parse(in);
        return j.at("response").at("text").get<std::string>();
    } catch (const std::exception& e) {
        std::cerr << "[warn] corrupt cache entry " << path.string() << ": " << e.what()
                  << " (treated as miss)\n";
        return std::nullopt;
    }
}

void ResponseCache::store(const std::string& key, const CompletionRequest& req,
                          const std::string& text) const {
    const auto path = entry_path(dir_, key);
    std::filesystem::create_directories(path.parent_path());

    static std::atomic<unsigned> counter{0};
    std::ostringstream tmp_name;
    tmp_name << key << ".tmp." << std::this_thread::get_id() << "." << counter++;
    const auto tmp = path.parent_path() / tmp_name.str();

    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw DataError("cache directory not writable: " + dir_.string());
        json j{{"key", key},
               {"request", request_to_json(req)},
               {"response", json{{"text", text}}}};
        out << j.dump(2) << '\n';
    }
    // rename within one directory is atomic; concurrent writers of the same
    // key race benignly to identical content
    std::filesystem::rename(tmp, path);
}

ResponseCache::Stats ResponseCache::stats() const {
    Stats s;
    if (!std::filesystem::exists(dir_)) return s;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir_)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
            ++s.entries;
            s.bytes += entry.file_size();
        }
    }
    return s;
}

void ResponseCache::clear() const {
    if (!std::filesystem::exists(dir_)) return;
    for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
        std::filesystem::remove_all(entry.path());
    }
}

// ---------------------------------------------------------------------------
// Gateway

// Runtime-sized in-flight limiter for the HTTP path.
struct Gateway::Limiter {
    explicit Limiter(int n) : available(n) {}
    void acquire() {
        std::unique_lock lock(mu);
        cv.wait(lock, [&] { return available > 0; });
        --available;
    }
    void release() {
        {
            std::lock_guard lock(mu);
            ++available;
        }
        cv.notify_one();
    }
    std::mutex mu;
    std::condition_variable cv;
    int available;
};

Gateway::Gateway(ProviderConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    rule_state_.resize(cfg_.script.size());
    for (std::size_t i = 0; i < cfg_.script.size(); ++i) {
        rule_state_[i].fails_left = cfg_.script[i].fail_count;
    }
    limiter_ = std::make_unique<Limiter>(cfg_.max_in_flight);
}

Gateway::~Gateway() = default;

CompletionResponse Gateway::complete(const CompletionRequest& req) {
    validate_request(req);
    const int max_attempts = cfg_.retry.max_attempts;
    for (int attempt = 1;; ++attempt) {
        try {
            CompletionResponse resp = complete_once(req);
            record(req, resp);
            return resp;
        } catch (const ProviderError& e) {
            if (!e.transient() || attempt >= max_attempts) {
                if (e.transient()) {
                    throw ProviderError("retries exhausted after " + std::to_string(attempt) +
                                            " attempts: " + e.what(),
                                        false);
                }
                throw;
            }
            const auto& schedule = cfg_.retry.backoff_ms;
            if (!schedule.empty()) {
                const auto idx = std::min<std::size_t>(attempt - 1, schedule.size() - 1);
                std::this_thread::sleep_for(std::chrono::milliseconds(schedule[idx]));
            }
        }
    }
}

CompletionResponse Gateway::complete_once(const CompletionRequest& req) {
    ++invocations_;
    return cfg_.kind == ProviderKind::scripted_mock ? run_mock(req) : run_http(req);
}

CompletionResponse Gateway::run_mock(const CompletionRequest& req) {
    std::lock_guard lock(mock_mu_);
    for (std::size_t i = 0; i < cfg_.script.size(); ++i) {
        const auto& rule = cfg_.script[i];
        auto& state = rule_state_[i];
        if (rule.one_shot && state.used) continue;
        bool matches = true;
        for (const auto& needle : rule.contains) {
            if (!contains(req.prompt, needle)) {
                matches = false;
                break;
            }
        }
        if (!matches) continue;
        if (state.fails_left > 0) {
            --state.fails_left;
            throw ProviderError("scripted transient failure (rule " + std::to_string(i) + ")",
                                true);
        }
        if (rule.one_shot) state.used = true;
        CompletionResponse resp;
        resp.text = rule.response;
        resp.provider_meta["rule_index"] = std::to_string(i);
        return resp;
    }
    // A missing rule is a fixture gap, never a silent default.
    throw ProviderError(
        "no mock rule matches prompt (fixture gap): " + req.prompt.substr(0, 120), false);
}

namespace {

struct ParsedEndpoint {
    std::string base;  // scheme://host[:port]
    std::string path;
};

ParsedEndpoint parse_endpoint(const std::string& endpoint) {
    static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)", std::regex::icase);
    std::smatch m;
    if (!std::regex_match(endpoint, m, url_re)) {
        throw ConfigError("provider.endpoint: cannot parse URL '" + endpoint + "'");
    }
    ParsedEndpoint p;
    p.base = m[1].str();
    p.path = m[2].matched && !m[2].str().empty() ? m[2].str() : "/";
    return p;
}

const json* walk_path(const json& root, const std::string& dotted) {
    const json* cur = &root;
    std::size_t start = 0;
    while (start <= dotted.size()) {
        const auto dot = dotted.find('.', start);
        const std::string part =
            dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (cur->is_array() && !part.empty() &&
            part.find_first_not_of("0123456789") == std::string::npos) {
            const auto idx = std::stoul(part);
            if (idx >= cur->size()) return nullptr;
            cur = &(*cur)[idx];
        } else if (cur->is_object() && cur->contains(part)) {
            cur = &(*cur)[part];
        } else {
            return nullptr;
        }
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    return cur;
}

}  // namespace

CompletionResponse Gateway::run_http(const CompletionRequest& req) {
    const char* key = std::getenv(cfg_.credential_env.c_str());
    if (key == nullptr || *key == '\0') {
        throw ProviderError("credential environment variable '" + cfg_.credential_env +
                                "' is not set",
                            false);
    }

    const auto ep = parse_endpoint(cfg_.endpoint);
    const auto& shape = cfg_.http;
    json payload{{shape.model_field, req.model_id},
                 {shape.messages_field, json::array({json{{"role", shape.role},
                                                          {"content", req.prompt}}})},
                 {shape.temperature_field, req.temperature},
                 {shape.max_tokens_field, req.max_tokens}};
    if (!req.stop.empty()) payload[shape.stop_field] = req.stop;

    limiter_->acquire();
    struct Release {
        Limiter* l;
        ~Release() { l->release(); }
    } release{limiter_.get()};

    const auto started = std::chrono::steady_clock::now();
    httplib::Client client(ep.base);
    client.set_connection_timeout(30);
    client.set_read_timeout(120);
    httplib::Headers headers{{"Authorization", std::string("Bearer ") + key}};
    auto res = client.Post(ep.path, headers, payload.dump(), "application/json");
    const auto elapsed_ms = std::chrono::duration<double, std::milli>(
                                std::chrono::steady_clock::now() - started)
                                .count();

    if (!res) {
        throw ProviderError("network error: " + httplib::to_string(res.error()), true);
    }
    if (res->status >= 500 || res->status == 429 || res->status == 408) {
        throw ProviderError("provider returned status " + std::to_string(res->status), true);
    }
    if (res->status < 200 || res->status >= 300) {
        throw ProviderError("provider returned status " + std::to_string(res->status) + ": " +
                                res->body.substr(0, 200),
                            false);
    }

    json body;
    try {
        body = json::parse(res->body);
    } catch (const json::exception& e) {
        throw ProviderError(std::string("unparseable provider response: ") + e.what(), false);
    }
    const json* text = walk_path(body, shape.response_text_path);
    if (text == nullptr || !text->is_string()) {
        throw ProviderError("provider response lacks text at '" + shape.response_text_path + "'",
                            false);
    }

    CompletionResponse resp;
    resp.text = text->get<std::string>();
    resp.provider_meta["http_status"] = std::to_string(res->status);
    resp.provider_meta["latency_ms"] = std::to_string(elapsed_ms);
    if (const json* usage = walk_path(body, "usage.total_tokens");
        usage != nullptr && usage->is_number()) {
        resp.provider_meta["total_tokens"] = std::to_string(usage->get<long>());
    }
    return resp;
}

CompletionResponse Gateway::cached_complete(const CompletionRequest& req, ResponseCache& cache) {
    validate_request(req);
    const std::string key = cache_key(req);
    if (auto hit = cache.lookup(key)) {
        CompletionResponse resp;
        resp.text = *hit;
        resp.cached = true;
        record(req, resp);
        return resp;
    }
    CompletionResponse resp = complete(req);
    cache.store(key, req, resp.text);
    return resp;
}

void Gateway::record(const CompletionRequest& req, const CompletionResponse& resp) {
    std::lock_guard lock(transcript_mu_);
    transcript_.push_back({req, resp});
}

std::vector<TranscriptEntry> Gateway::transcript() const {
    std::lock_guard lock(transcript_mu_);
    return transcript_;
}

void Gateway::clear_transcript() {
    std::lock_guard lock(transcript_mu_);
    transcript_.clear();
}

}  // namespace emobi
