#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emobi/corpus.hpp"
#include "emobi/gateway.hpp"
#include "emobi/prompts.hpp"
#include "emobi/types.hpp"

namespace emobi {

enum class RunMode { emobi, separate, together, baseline_standard, baseline_cot };

std::string to_string(RunMode m);
RunMode run_mode_from_string(const std::string& s);

struct PipelineConfig {
    bool use_emotion = true;
    bool use_domain = true;
    bool use_interaction = true;
    bool use_verification = true;
    int max_verification_rounds = 1;
    RunMode run_mode = RunMode::emobi;
    std::string model_id = "mock";
    double temperature = 0.0;
    int max_tokens = 512;

    void validate() const;
    bool operator==(const PipelineConfig&) const = default;
};

void to_json(nlohmann::json& j, const PipelineConfig& c);
void from_json(const nlohmann::json& j, PipelineConfig& c);

struct EmotionAnalysis {
    std::string raw;
};

struct DomainMapping {
    std::string raw;
    std::optional<std::string> source_domain;
    std::optional<std::string> target_domain;
    std::optional<std::string> connection;
};

struct RhetoricInfo {
    Device device = Device::metaphor;
    std::string raw;
};

struct LabelDecision {
    Device device = Device::hyperbole;
    int label = 0;
    std::string rationale;
    int verification_rounds = 0;
    bool flipped = false;
};

struct StageCall {
    std::string stage;  // e.g. "emotion", "cross_info:metaphor", "verification:hyperbole:1"
    std::string prompt;
    std::string response;
    bool cached = false;
    double elapsed_ms = 0.0;
};

struct PipelineTrace {
    SentenceRecord record;
    std::vector<StageCall> stages;
    std::optional<EmotionAnalysis> emotion;
    std::optional<DomainMapping> domain_mapping;
    std::optional<RhetoricInfo> metaphor_info;   // feeds the hyperbole decision
    std::optional<RhetoricInfo> hyperbole_info;  // feeds the metaphor decision
    std::optional<LabelDecision> hyperbole;
    std::optional<LabelDecision> metaphor;
    std::vector<std::string> notes;
    std::string template_version;
    std::string config_fingerprint;
    RunMode run_mode = RunMode::emobi;
    bool failed = false;
    std::string error;
};

// Pulls structured Source domain / Target domain / Connection lines out of a
// domain-mapping response when present; the raw text is always retained.
DomainMapping parse_domain_mapping(const std::string& raw);

// Scans for the last "<marker>: yes|no" line, case-insensitive, tolerating
// trailing punctuation. Throws ParseError when no such line exists.
int parse_label(const std::string& text, const std::string& marker = "Label");

struct BatchResult {
    struct Failure {
        std::size_t index = 0;
        std::string record_id;
        std::string error;
        PipelineTrace partial;
    };
    std::vector<PipelineTrace> traces;    // successful sentences, input order
    std::vector<Failure> failures;        // failed sentences, input order
};

// Executes the stage graph for one sentence at a time. Stages within a
// sentence are sequential; run_batch runs sentences concurrently up to a
// limit. A non-null cache routes every call through cached_complete.
class PipelineRunner {
  public:
    PipelineRunner(Gateway& gateway, const PromptLibrary& prompts, PipelineConfig cfg,
                   ResponseCache* cache = nullptr, std::string config_fingerprint = "");

    EmotionAnalysis analyze_emotion(const std::string& sentence,
                                    PipelineTrace* trace = nullptr) const;
    DomainMapping map_domains(const StageContext& ctx, PipelineTrace* trace = nullptr) const;
    RhetoricInfo derive_cross_info(const StageContext& ctx,
                                   PipelineTrace* trace = nullptr) const;
    LabelDecision detect_label(const StageContext& ctx, PipelineTrace* trace = nullptr) const;
    LabelDecision verify(LabelDecision decision, const StageContext& ctx,
                         PipelineTrace* trace = nullptr) const;

    // Runs the configured mode end to end. Stage errors mark the trace
    // failed and keep everything recorded up to the failure.
    PipelineTrace run_pipeline(const SentenceRecord& record) const;

    BatchResult run_batch(std::span<const SentenceRecord> records, int concurrency) const;

    const PipelineConfig& config() const { return cfg_; }
    const std::string& fingerprint() const { return fingerprint_; }

  private:
    CompletionResponse call(const RenderedPrompt& prompt, const std::string& stage_name,
                            PipelineTrace* trace) const;
    void run_emobi(PipelineTrace& trace) const;
    void run_separate(PipelineTrace& trace) const;
    void run_joint(PipelineTrace& trace, BaselineMode mode, const std::string& stage_name) const;

    Gateway& gateway_;
    const PromptLibrary& prompts_;
    PipelineConfig cfg_;
    ResponseCache* cache_;
    std::string fingerprint_;
};

// Trace serialization for the line-delimited trace artifact. Timing is
// wall-clock and excluded when byte-stable output is required.
nlohmann::json trace_to_json(const PipelineTrace& trace, bool with_timing = true);

}  // namespace emobi
