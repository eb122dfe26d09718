#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emobi/corpus.hpp"
#include "emobi/eval.hpp"
#include "emobi/gateway.hpp"
#include "emobi/pipeline.hpp"

namespace emobi {

// Declarative description of one experiment run. Round-trips losslessly
// through its JSON file form. Credentials never appear here; the provider
// names an environment variable instead.
struct ExperimentConfig {
    std::vector<DatasetSpec> datasets;
    PipelineConfig pipeline;
    ProviderConfig provider;
    std::string template_set = "templates/default";
    std::filesystem::path out_dir = "runs";
    std::filesystem::path cache_dir;  // empty disables the response cache
    int concurrency = 4;
    ReportFormat report_format = ReportFormat::text;
    std::optional<std::filesystem::path> reference_table;
    bool macro_metrics = false;
    // Which part of a configured split to evaluate: all | train | test.
    // Ignored (treated as all) for datasets without a split.
    std::string eval_split = "test";

    void validate() const;
    bool operator==(const ExperimentConfig&) const = default;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& file);

// Canonical content hash of the effective config; embedded in every artifact.
std::string config_fingerprint(const ExperimentConfig& cfg);

}  // namespace emobi
