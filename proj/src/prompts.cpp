#include "emobi/prompts.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "emobi/digest.hpp"
#include "emobi/text_util.hpp"

namespace emobi {

std::string to_string(Stage s) {
    switch (s) {
        case Stage::emotion: return "emotion";
        case Stage::domain: return "domain";
        case Stage::cross_info: return "cross_info";
        case Stage::final_label: return "final_label";
        case Stage::verification: return "verification";
        case Stage::baseline_standard: return "baseline_standard";
        case Stage::baseline_cot: return "baseline_cot";
        case Stage::baseline_together: return "baseline_together";
    }
    return "emotion";
}

std::string render_template(const std::string& tmpl,
                            const std::map<std::string, std::string>& values) {
    // Pass 1: conditional blocks {?name}...{/name}, kept only when the named
    // value is present. Blocks do not nest.
    std::string text;
    text.reserve(tmpl.size());
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        const auto open = tmpl.find("{?", pos);
        if (open == std::string::npos) {
            text.append(tmpl, pos, std::string::npos);
            break;
        }
        text.append(tmpl, pos, open - pos);
        const auto open_end = tmpl.find('}', open);
        if (open_end == std::string::npos) throw ConfigError("template: unterminated {? tag");
        const std::string name = tmpl.substr(open + 2, open_end - open - 2);
        const std::string close_tag = "{/" + name + "}";
        const auto close = tmpl.find(close_tag, open_end);
        if (close == std::string::npos) {
            throw ConfigError("template: missing " + close_tag);
        }
        if (values.count(name) != 0) {
            text.append(tmpl, open_end + 1, close - open_end - 1);
        }
        pos = close + close_tag.size();
    }

    // Pass 2: {name} placeholders.
    std::string out;
    out.reserve(text.size());
    pos = 0;
    while (pos < text.size()) {
        const auto open = text.find('{', pos);
        if (open == std::string::npos) {
            out.append(text, pos, std::string::npos);
            break;
        }
        out.append(text, pos, open - pos);
        const auto close = text.find('}', open);
        const std::string name =
            close == std::string::npos ? "" : text.substr(open + 1, close - open - 1);
        const bool is_placeholder =
            !name.empty() &&
            name.find_first_not_of("abcdefghijklmnopqrstuvwxyz_") == std::string::npos;
        if (!is_placeholder) {
            out.push_back('{');
            pos = open + 1;
            continue;
        }
        auto it = values.find(name);
        if (it == values.end()) {
            throw ConfigError("template: no value for placeholder {" + name + "}");
        }
        out.append(it->second);
        pos = close + 1;
    }
    return out;
}

namespace {

const char* kTemplateNames[] = {
    "emotion", "domain", "cross_info", "final_label", "verification",
    "baseline_standard", "baseline_cot",
};

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("template_set: cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string capitalize(std::string s) {
    if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s;
}

}  // namespace

PromptLibrary::PromptLibrary(const std::filesystem::path& template_dir) : dir_(template_dir) {
    std::string hash_input;
    for (const char* name : kTemplateNames) {
        std::string content = read_file(dir_ / (std::string(name) + ".txt"));
        hash_input += name;
        hash_input += '\0';
        hash_input += content;
        hash_input += '\0';
        templates_[name] = std::move(content);
    }
    version_ = sha256_hex(hash_input).substr(0, 12);
}

const std::string& PromptLibrary::tmpl(const std::string& name) const {
    return templates_.at(name);
}

RenderedPrompt PromptLibrary::render_emotion(const StageContext& ctx) const {
    if (trim(ctx.sentence).empty()) {
        throw std::invalid_argument("emotion prompt: sentence is empty");
    }
    return {render_template(tmpl("emotion"), {{"sentence", ctx.sentence}}), Stage::emotion, {}};
}

RenderedPrompt PromptLibrary::render_domain(const StageContext& ctx) const {
    if (trim(ctx.sentence).empty()) {
        throw std::invalid_argument("domain prompt: sentence is empty");
    }
    if (ctx.emotion_expected && !ctx.emotion) {
        throw std::invalid_argument("domain prompt: emotion analysis is missing");
    }
    std::map<std::string, std::string> values{{"sentence", ctx.sentence}};
    if (ctx.emotion) values["emotion"] = *ctx.emotion;
    return {render_template(tmpl("domain"), values), Stage::domain, {}};
}

RenderedPrompt PromptLibrary::render_cross_info(const StageContext& ctx) const {
    if (trim(ctx.sentence).empty()) {
        throw std::invalid_argument("cross-info prompt: sentence is empty");
    }
    if (ctx.emotion_expected && !ctx.emotion) {
        throw std::invalid_argument("cross-info prompt: emotion analysis is missing");
    }
    if (ctx.domain_expected && !ctx.domain_mapping) {
        throw std::invalid_argument("cross-info prompt: domain mapping is missing");
    }
    std::map<std::string, std::string> values{{"sentence", ctx.sentence},
                                              {"device", to_string(ctx.device)}};
    if (ctx.emotion) values["emotion"] = *ctx.emotion;
    if (ctx.domain_mapping) values["domain_mapping"] = *ctx.domain_mapping;
    return {render_template(tmpl("cross_info"), values), Stage::cross_info, {}};
}

RenderedPrompt PromptLibrary::render_final_label(const StageContext& ctx) const {
    if (trim(ctx.sentence).empty()) {
        throw std::invalid_argument("final-label prompt: sentence is empty");
    }
    if (ctx.emotion_expected && !ctx.emotion) {
        throw std::invalid_argument("final-label prompt: emotion analysis is missing");
    }
    if (ctx.domain_expected && !ctx.domain_mapping) {
        throw std::invalid_argument("final-label prompt: domain mapping is missing");
    }
    if (ctx.cross_info_expected && !ctx.cross_info) {
        throw std::invalid_argument("final-label prompt: cross-device analysis is missing");
    }
    const std::string cross_device = to_string(other_device(ctx.device));
    std::map<std::string, std::string> values{{"sentence", ctx.sentence},
                                              {"device", to_string(ctx.device)},
                                              {"cross_device", cross_device},
                                              {"cross_device_title", capitalize(cross_device)}};
    if (ctx.emotion) values["emotion"] = *ctx.emotion;
    if (ctx.domain_mapping) values["domain_mapping"] = *ctx.domain_mapping;
    if (ctx.cross_info) values["cross_info"] = *ctx.cross_info;
    return {render_template(tmpl("final_label"), values), Stage::final_label, {"Label"}};
}

RenderedPrompt PromptLibrary::render_verification(const StageContext& ctx,
                                                  int prior_label) const {
    if (trim(ctx.sentence).empty()) {
        throw std::invalid_argument("verification prompt: sentence is empty");
    }
    if (prior_label != 0 && prior_label != 1) {
        throw std::invalid_argument("verification prompt: prior label must be 0 or 1");
    }
    const std::string cross_device = to_string(other_device(ctx.device));
    std::map<std::string, std::string> values{{"sentence", ctx.sentence},
                                              {"device", to_string(ctx.device)},
                                              {"cross_device", cross_device},
                                              {"cross_device_title", capitalize(cross_device)},
                                              {"prior_label", prior_label == 1 ? "yes" : "no"}};
    if (ctx.emotion) values["emotion"] = *ctx.emotion;
    if (ctx.domain_mapping) values["domain_mapping"] = *ctx.domain_mapping;
    if (ctx.cross_info) values["cross_info"] = *ctx.cross_info;
    if (ctx.rationale) values["rationale"] = *ctx.rationale;
    return {render_template(tmpl("verification"), values), Stage::verification, {"Label"}};
}

RenderedPrompt PromptLibrary::render_baseline(const std::string& sentence,
                                              BaselineMode mode) const {
    if (trim(sentence).empty()) {
        throw std::invalid_argument("baseline prompt: sentence is empty");
    }
    // The "together" comparison runs the standard joint template under its
    // own stage tag.
    const char* name = mode == BaselineMode::cot ? "baseline_cot" : "baseline_standard";
    Stage stage = mode == BaselineMode::standard ? Stage::baseline_standard
                  : mode == BaselineMode::cot    ? Stage::baseline_cot
                                                 : Stage::baseline_together;
    return {render_template(tmpl(name), {{"sentence", sentence}}), stage,
            {"Hyperbole", "Metaphor"}};
}

}  // namespace emobi
