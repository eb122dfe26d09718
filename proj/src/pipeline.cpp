#include "emobi/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <regex>
#include <thread>

#include "emobi/digest.hpp"
#include "emobi/text_util.hpp"

namespace emobi {

using nlohmann::json;

std::string to_string(RunMode m) {
    switch (m) {
        case RunMode::emobi: return "emobi";
        case RunMode::separate: return "separate";
        case RunMode::together: return "together";
        case RunMode::baseline_standard: return "baseline_standard";
        case RunMode::baseline_cot: return "baseline_cot";
    }
    return "emobi";
}

RunMode run_mode_from_string(const std::string& s) {
    if (s == "emobi") return RunMode::emobi;
    if (s == "separate") return RunMode::separate;
    if (s == "together") return RunMode::together;
    if (s == "baseline_standard") return RunMode::baseline_standard;
    if (s == "baseline_cot") return RunMode::baseline_cot;
    throw ConfigError("run_mode: unknown value '" + s + "'");
}

void PipelineConfig::validate() const {
    if (max_verification_rounds < 0)
        throw ConfigError("pipeline.max_verification_rounds: must be >= 0");
    if (temperature < 0.0) throw ConfigError("pipeline.temperature: must be >= 0");
    if (max_tokens < 1) throw ConfigError("pipeline.max_tokens: must be >= 1");
}

void to_json(json& j, const PipelineConfig& c) {
    j = json{{"use_emotion", c.use_emotion},
             {"use_domain", c.use_domain},
             {"use_interaction", c.use_interaction},
             {"use_verification", c.use_verification},
             {"max_verification_rounds", c.max_verification_rounds},
             {"run_mode", to_string(c.run_mode)},
             {"model_id", c.model_id},
             {"temperature", c.temperature},
             {"max_tokens", c.max_tokens}};
}

void from_json(const json& j, PipelineConfig& c) {
    c = PipelineConfig{};
    if (j.contains("use_emotion")) j.at("use_emotion").get_to(c.use_emotion);
    if (j.contains("use_domain")) j.at("use_domain").get_to(c.use_domain);
    if (j.contains("use_interaction")) j.at("use_interaction").get_to(c.use_interaction);
    if (j.contains("use_verification")) j.at("use_verification").get_to(c.use_verification);
    if (j.contains("max_verification_rounds"))
        j.at("max_verification_rounds").get_to(c.max_verification_rounds);
    if (j.contains("run_mode")) c.run_mode = run_mode_from_string(j.at("run_mode"));
    if (j.contains("model_id")) j.at("model_id").get_to(c.model_id);
    if (j.contains("temperature")) j.at("temperature").get_to(c.temperature);
    if (j.contains("max_tokens")) j.at("max_tokens").get_to(c.max_tokens);
    c.validate();
}

// ---------------------------------------------------------------------------
// Parsing

int parse_label(const std::string& text, const std::string& marker) {
    const std::regex re(marker + R"(\s*:\s*\**\s*(yes|no)\b)", std::regex::icase);
    auto begin = std::sregex_iterator(text.begin(), text.end(), re);
    auto end = std::sregex_iterator();
    std::optional<int> label;
    for (auto it = begin; it != end; ++it) {
        // last occurrence wins
        label = to_lower((*it)[1].str()) == "yes" ? 1 : 0;
    }
    if (!label) {
        throw ParseError("no '" + marker + ": <yes|no>' line in response: " +
                         text.substr(0, 160));
    }
    return *label;
}

DomainMapping parse_domain_mapping(const std::string& raw) {
    DomainMapping dm;
    dm.raw = raw;
    for (const auto& line : split_lines(raw)) {
        std::string t = trim(line);
        // tolerate list markers in front of the structured lines
        while (!t.empty() && (t.front() == '-' || t.front() == '*')) t = trim(t.substr(1));
        const std::string lower = to_lower(t);
        auto take = [&](const char* prefix) -> std::optional<std::string> {
            const std::size_t n = std::string(prefix).size();
            if (lower.rfind(prefix, 0) != 0) return std::nullopt;
            auto rest = trim(t.substr(n));
            if (!rest.empty() && rest.front() == ':') rest = trim(rest.substr(1));
            else return std::nullopt;
            if (rest.empty()) return std::nullopt;
            return rest;
        };
        if (!dm.source_domain) {
            if (auto v = take("source domain")) dm.source_domain = v;
        }
        if (!dm.target_domain) {
            if (auto v = take("target domain")) dm.target_domain = v;
        }
        if (!dm.connection) {
            if (auto v = take("connection")) dm.connection = v;
        }
    }
    return dm;
}

// ---------------------------------------------------------------------------
// PipelineRunner

PipelineRunner::PipelineRunner(Gateway& gateway, const PromptLibrary& prompts,
                               PipelineConfig cfg, ResponseCache* cache,
                               std::string config_fingerprint)
    : gateway_(gateway),
      prompts_(prompts),
      cfg_(std::move(cfg)),
      cache_(cache),
      fingerprint_(std::move(config_fingerprint)) {
    cfg_.validate();
    if (fingerprint_.empty()) {
        fingerprint_ = sha256_hex(json(cfg_).dump()).substr(0, 16);
    }
}

CompletionResponse PipelineRunner::call(const RenderedPrompt& prompt,
                                        const std::string& stage_name,
                                        PipelineTrace* trace) const {
    CompletionRequest req;
    req.prompt = prompt.text;
    req.model_id = cfg_.model_id;
    req.temperature = cfg_.temperature;
    req.max_tokens = cfg_.max_tokens;

    const auto started = std::chrono::steady_clock::now();
    CompletionResponse resp;
    try {
        resp = cache_ != nullptr ? gateway_.cached_complete(req, *cache_)
                                 : gateway_.complete(req);
    } catch (const std::exception& e) {
        throw ProviderError("stage " + stage_name + ": " + e.what(), false);
    }
    const double elapsed_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
            .count();

    if (trace != nullptr) {
        trace->stages.push_back({stage_name, prompt.text, resp.text, resp.cached, elapsed_ms});
    }
    return resp;
}

EmotionAnalysis PipelineRunner::analyze_emotion(const std::string& sentence,
                                                PipelineTrace* trace) const {
    StageContext ctx;
    ctx.sentence = sentence;
    const auto resp = call(prompts_.render_emotion(ctx), "emotion", trace);
    return {resp.text};
}

DomainMapping PipelineRunner::map_domains(const StageContext& ctx, PipelineTrace* trace) const {
    const auto resp = call(prompts_.render_domain(ctx), "domain", trace);
    return parse_domain_mapping(resp.text);
}

RhetoricInfo PipelineRunner::derive_cross_info(const StageContext& ctx,
                                               PipelineTrace* trace) const {
    const auto resp =
        call(prompts_.render_cross_info(ctx), "cross_info:" + to_string(ctx.device), trace);
    return {ctx.device, resp.text};
}

LabelDecision PipelineRunner::detect_label(const StageContext& ctx, PipelineTrace* trace) const {
    const std::string stage_name = "final_label:" + to_string(ctx.device);
    const auto resp = call(prompts_.render_final_label(ctx), stage_name, trace);
    LabelDecision decision;
    decision.device = ctx.device;
    decision.rationale = resp.text;
    try {
        decision.label = parse_label(resp.text);
    } catch (const ParseError& e) {
        throw ParseError("stage " + stage_name + ": " + e.what());
    }
    return decision;
}

LabelDecision PipelineRunner::verify(LabelDecision decision, const StageContext& ctx,
                                     PipelineTrace* trace) const {
    if (!cfg_.use_verification || cfg_.max_verification_rounds <= 0) return decision;

    const int initial = decision.label;
    int current = decision.label;
    int rounds = 0;
    for (int round = 1; round <= cfg_.max_verification_rounds; ++round) {
        const std::string stage_name =
            "verification:" + to_string(ctx.device) + ":" + std::to_string(round);
        const auto resp = call(prompts_.render_verification(ctx, current), stage_name, trace);
        rounds = round;
        int reissued = 0;
        try {
            reissued = parse_label(resp.text);
        } catch (const ParseError& e) {
            // Keep the prior label; the round still counts.
            if (trace != nullptr) {
                trace->notes.push_back(stage_name + ": unparseable re-evaluation, keeping '" +
                                       (current == 1 ? std::string("yes") : std::string("no")) +
                                       "' (" + e.what() + ")");
            }
            break;
        }
        if (reissued == current) break;  // agreement stops the loop
        current = reissued;
    }
    decision.label = current;
    decision.verification_rounds = rounds;
    decision.flipped = current != initial;
    return decision;
}

void PipelineRunner::run_emobi(PipelineTrace& trace) const {
    StageContext base;
    base.sentence = trace.record.text;
    base.emotion_expected = cfg_.use_emotion;
    base.domain_expected = cfg_.use_domain;
    base.cross_info_expected = cfg_.use_interaction;

    if (cfg_.use_emotion) {
        trace.emotion = analyze_emotion(trace.record.text, &trace);
        base.emotion = trace.emotion->raw;
    }
    if (cfg_.use_domain) {
        trace.domain_mapping = map_domains(base, &trace);
        base.domain_mapping = trace.domain_mapping->raw;
    }
    if (cfg_.use_interaction) {
        StageContext ctx = base;
        ctx.device = Device::metaphor;
        trace.metaphor_info = derive_cross_info(ctx, &trace);
        ctx.device = Device::hyperbole;
        trace.hyperbole_info = derive_cross_info(ctx, &trace);
    }

    for (Device device : {Device::hyperbole, Device::metaphor}) {
        StageContext ctx = base;
        ctx.device = device;
        if (cfg_.use_interaction) {
            // Each decision is conditioned on the *other* device's analysis.
            ctx.cross_info = device == Device::hyperbole ? trace.metaphor_info->raw
                                                         : trace.hyperbole_info->raw;
        }
        LabelDecision decision = detect_label(ctx, &trace);
        ctx.rationale = decision.rationale;
        decision = verify(std::move(decision), ctx, &trace);
        (device == Device::hyperbole ? trace.hyperbole : trace.metaphor) = std::move(decision);
    }
}

void PipelineRunner::run_separate(PipelineTrace& trace) const {
    // Two independent single-task chains: emotion, domain, final label.
    for (Device device : {Device::hyperbole, Device::metaphor}) {
        const std::string suffix = ":" + to_string(device);
        StageContext ctx;
        ctx.sentence = trace.record.text;
        ctx.cross_info_expected = false;
        ctx.device = device;

        const auto emotion_resp = call(prompts_.render_emotion(ctx), "emotion" + suffix, &trace);
        ctx.emotion = emotion_resp.text;
        const auto domain_resp = call(prompts_.render_domain(ctx), "domain" + suffix, &trace);
        ctx.domain_mapping = domain_resp.text;
        if (device == Device::hyperbole) {
            trace.emotion = EmotionAnalysis{emotion_resp.text};
            trace.domain_mapping = parse_domain_mapping(domain_resp.text);
        }

        LabelDecision decision = detect_label(ctx, &trace);
        (device == Device::hyperbole ? trace.hyperbole : trace.metaphor) = std::move(decision);
    }
}

void PipelineRunner::run_joint(PipelineTrace& trace, BaselineMode mode,
                               const std::string& stage_name) const {
    const auto prompt = prompts_.render_baseline(trace.record.text, mode);
    const auto resp = call(prompt, stage_name, &trace);
    for (Device device : {Device::hyperbole, Device::metaphor}) {
        LabelDecision decision;
        decision.device = device;
        decision.rationale = resp.text;
        const std::string marker = device == Device::hyperbole ? "Hyperbole" : "Metaphor";
        try {
            decision.label = parse_label(resp.text, marker);
        } catch (const ParseError& e) {
            throw ParseError("stage " + stage_name + ": " + e.what());
        }
        (device == Device::hyperbole ? trace.hyperbole : trace.metaphor) = std::move(decision);
    }
}

PipelineTrace PipelineRunner::run_pipeline(const SentenceRecord& record) const {
    PipelineTrace trace;
    trace.record = record;
    trace.template_version = prompts_.version();
    trace.config_fingerprint = fingerprint_;
    trace.run_mode = cfg_.run_mode;
    try {
        switch (cfg_.run_mode) {
            case RunMode::emobi: run_emobi(trace); break;
            case RunMode::separate: run_separate(trace); break;
            case RunMode::together:
                run_joint(trace, BaselineMode::together, "baseline_together");
                break;
            case RunMode::baseline_standard:
                run_joint(trace, BaselineMode::standard, "baseline_standard");
                break;
            case RunMode::baseline_cot:
                run_joint(trace, BaselineMode::cot, "baseline_cot");
                break;
        }
    } catch (const std::exception& e) {
        trace.failed = true;
        trace.error = e.what();
    }
    return trace;
}

BatchResult PipelineRunner::run_batch(std::span<const SentenceRecord> records,
                                      int concurrency) const {
    const std::size_t n = records.size();
    std::vector<PipelineTrace> results(n);
    const std::size_t workers =
        std::clamp<std::size_t>(concurrency < 1 ? 1 : static_cast<std::size_t>(concurrency), 1,
                                n == 0 ? 1 : n);

    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            results[i] = run_pipeline(records[i]);
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }

    BatchResult batch;
    for (std::size_t i = 0; i < n; ++i) {
        if (results[i].failed) {
            batch.failures.push_back(
                {i, results[i].record.id, results[i].error, std::move(results[i])});
        } else {
            batch.traces.push_back(std::move(results[i]));
        }
    }
    return batch;
}

// ---------------------------------------------------------------------------
// Trace serialization

namespace {

json decision_to_json(const LabelDecision& d) {
    return json{{"device", to_string(d.device)},
                {"label", d.label},
                {"rationale", d.rationale},
                {"verification_rounds", d.verification_rounds},
                {"flipped", d.flipped}};
}

json domain_mapping_to_json(const DomainMapping& dm) {
    json j{{"raw", dm.raw}};
    if (dm.source_domain) j["source_domain"] = *dm.source_domain;
    if (dm.target_domain) j["target_domain"] = *dm.target_domain;
    if (dm.connection) j["connection"] = *dm.connection;
    return j;
}

}  // namespace

json trace_to_json(const PipelineTrace& trace, bool with_timing) {
    json stages = json::array();
    for (const auto& s : trace.stages) {
        json stage{{"stage", s.stage},
                   {"prompt", s.prompt},
                   {"response", s.response},
                   {"cached", s.cached}};
        if (with_timing) stage["elapsed_ms"] = s.elapsed_ms;
        stages.push_back(std::move(stage));
    }

    json j{{"record",
            json{{"id", trace.record.id},
                 {"text", trace.record.text},
                 {"hyperbole_gold", trace.record.hyperbole_gold},
                 {"metaphor_gold", trace.record.metaphor_gold},
                 {"source_dataset", to_string(trace.record.source_dataset)}}},
           {"run_mode", to_string(trace.run_mode)},
           {"template_version", trace.template_version},
           {"config_fingerprint", trace.config_fingerprint},
           {"stages", std::move(stages)},
           {"notes", trace.notes},
           {"failed", trace.failed}};
    if (trace.failed) j["error"] = trace.error;
    if (trace.emotion) j["emotion"] = trace.emotion->raw;
    if (trace.domain_mapping) j["domain_mapping"] = domain_mapping_to_json(*trace.domain_mapping);
    if (trace.metaphor_info) j["metaphor_info"] = trace.metaphor_info->raw;
    if (trace.hyperbole_info) j["hyperbole_info"] = trace.hyperbole_info->raw;
    json decisions = json::object();
    if (trace.hyperbole) decisions["hyperbole"] = decision_to_json(*trace.hyperbole);
    if (trace.metaphor) decisions["metaphor"] = decision_to_json(*trace.metaphor);
    j["decisions"] = std::move(decisions);
    return j;
}

}  // namespace emobi
