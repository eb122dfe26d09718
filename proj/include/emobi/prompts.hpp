#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "emobi/types.hpp"

namespace emobi {

enum class Stage {
    emotion,
    domain,
    cross_info,
    final_label,
    verification,
    baseline_standard,
    baseline_cot,
    baseline_together,
};

std::string to_string(Stage s);

enum class BaselineMode { standard, cot, together };

// Everything a stage template may draw on. Upstream artifacts are optional;
// the *_expected flags say whether an absent artifact is an intentional
// ablation (section omitted) or a caller bug (render fails).
struct StageContext {
    std::string sentence;
    std::optional<std::string> emotion;
    std::optional<std::string> domain_mapping;
    std::optional<std::string> cross_info;  // the opposite device's analysis
    std::optional<std::string> rationale;   // prior decision text, verification only
    Device device = Device::hyperbole;
    bool emotion_expected = true;
    bool domain_expected = true;
    bool cross_info_expected = true;
};

struct RenderedPrompt {
    std::string text;
    Stage stage = Stage::emotion;
    // Line markers the label parser scans for ("Label", or
    // "Hyperbole"/"Metaphor" for the joint baselines). Empty for free-text
    // stages.
    std::vector<std::string> answer_markers;
};

// Loads a template set from disk and renders the staged prompts. Templates
// use {name} placeholders and {?name}...{/name} blocks that are dropped
// when the named value is absent. Rendering is pure.
class PromptLibrary {
  public:
    explicit PromptLibrary(const std::filesystem::path& template_dir);

    RenderedPrompt render_emotion(const StageContext& ctx) const;
    RenderedPrompt render_domain(const StageContext& ctx) const;
    RenderedPrompt render_cross_info(const StageContext& ctx) const;
    RenderedPrompt render_final_label(const StageContext& ctx) const;
    RenderedPrompt render_verification(const StageContext& ctx, int prior_label) const;
    RenderedPrompt render_baseline(const std::string& sentence, BaselineMode mode) const;

    // Content hash over the template set, recorded in run artifacts.
    const std::string& version() const { return version_; }
    const std::filesystem::path& dir() const { return dir_; }

  private:
    const std::string& tmpl(const std::string& name) const;

    std::filesystem::path dir_;
    std::map<std::string, std::string> templates_;
    std::string version_;
};

// Substitutes {name} placeholders and resolves {?name}...{/name} blocks.
// Unresolved placeholders throw ConfigError naming the placeholder.
std::string render_template(const std::string& tmpl,
                            const std::map<std::string, std::string>& values);

}  // namespace emobi
