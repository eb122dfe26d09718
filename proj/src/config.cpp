#include "emobi/config.hpp"

#include <cmath>
#include <fstream>

#include "emobi/digest.hpp"

namespace emobi {

using nlohmann::json;

void ExperimentConfig::validate() const {
    if (datasets.empty()) throw ConfigError("datasets: at least one dataset is required");
    for (const auto& spec : datasets) {
        if (spec.path.empty()) {
            throw ConfigError("datasets.path: required for " + to_string(spec.name));
        }
        if (spec.split) {
            const auto& s = *spec.split;
            if (s.train_fraction < 0.0 || s.train_fraction > 1.0 || s.test_fraction < 0.0 ||
                s.test_fraction > 1.0 ||
                std::abs(s.train_fraction + s.test_fraction - 1.0) > 1e-9) {
                throw ConfigError("datasets.split: fractions must lie in [0,1] and sum to 1");
            }
        }
    }
    pipeline.validate();
    provider.validate();
    if (concurrency < 1) throw ConfigError("concurrency: must be >= 1");
    if (eval_split != "all" && eval_split != "train" && eval_split != "test") {
        throw ConfigError("eval_split: expected all|train|test, got '" + eval_split + "'");
    }
    if (template_set.empty()) throw ConfigError("template_set: must name a directory");
}

json to_json(const ExperimentConfig& cfg) {
    json j{{"datasets", cfg.datasets},
           {"pipeline", cfg.pipeline},
           {"provider", cfg.provider},
           {"template_set", cfg.template_set},
           {"out_dir", cfg.out_dir.string()},
           {"cache_dir", cfg.cache_dir.string()},
           {"concurrency", cfg.concurrency},
           {"report_format", to_string(cfg.report_format)},
           {"macro_metrics", cfg.macro_metrics},
           {"eval_split", cfg.eval_split}};
    if (cfg.reference_table) j["reference_table"] = cfg.reference_table->string();
    return j;
}

ExperimentConfig experiment_config_from_json(const json& j) {
    ExperimentConfig cfg;
    if (!j.contains("datasets")) throw ConfigError("datasets: missing");
    j.at("datasets").get_to(cfg.datasets);
    if (j.contains("pipeline")) j.at("pipeline").get_to(cfg.pipeline);
    if (j.contains("provider")) j.at("provider").get_to(cfg.provider);
    if (j.contains("template_set")) j.at("template_set").get_to(cfg.template_set);
    if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
    if (j.contains("cache_dir")) cfg.cache_dir = j.at("cache_dir").get<std::string>();
    if (j.contains("concurrency")) j.at("concurrency").get_to(cfg.concurrency);
    if (j.contains("report_format")) {
        cfg.report_format = report_format_from_string(j.at("report_format"));
    }
    if (j.contains("reference_table")) {
        cfg.reference_table = std::filesystem::path(j.at("reference_table").get<std::string>());
    }
    if (j.contains("macro_metrics")) j.at("macro_metrics").get_to(cfg.macro_metrics);
    if (j.contains("eval_split")) j.at("eval_split").get_to(cfg.eval_split);
    cfg.validate();
    return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("config file: cannot read " + file.string());
    json j;
    try {
        j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::exception& e) {
        throw ConfigError("config file: " + std::string(e.what()));
    }
    return experiment_config_from_json(j);
}

std::string config_fingerprint(const ExperimentConfig& cfg) {
    return sha256_hex(to_json(cfg).dump()).substr(0, 16);
}

}  // namespace emobi
