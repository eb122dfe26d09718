#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "emobi/config.hpp"

namespace emobi::cli {

// Flag overrides applied on top of the config file.
struct Overrides {
    std::optional<std::string> dataset;  // restrict the run to one dataset
    std::optional<std::string> mode;
    std::optional<std::string> provider;
    std::optional<std::string> model;
    std::optional<double> temperature;
    std::optional<int> max_verification_rounds;
    std::optional<int> concurrency;
    std::optional<std::string> report_format;
    std::optional<std::filesystem::path> cache_dir;
    std::optional<std::filesystem::path> out_dir;
};

ExperimentConfig effective_config(const std::filesystem::path& config_file,
                                  const Overrides& overrides);

// Exit codes: 0 success, 1 fatal error, 2 completed with per-sentence
// failures logged.
int cmd_run(const std::filesystem::path& config_file, const Overrides& overrides = {});
int cmd_ablate(const std::filesystem::path& config_file, const Overrides& overrides = {});
int cmd_cache_stats(const std::filesystem::path& cache_dir);
int cmd_cache_clear(const std::filesystem::path& cache_dir);

// Result of one cmd_run invocation, exposed for embedding and tests.
struct RunArtifacts {
    std::filesystem::path run_dir;
    RunResult result;
    std::size_t failures = 0;
    std::string report;
    long provider_invocations = 0;
};

RunArtifacts execute_run(const ExperimentConfig& cfg, const std::string& run_label = "run");

struct AblateArtifacts {
    RunArtifacts full;
    std::vector<std::pair<std::string, RunArtifacts>> ablations;
    std::string report;
    std::filesystem::path report_path;
    std::size_t failures = 0;
};

AblateArtifacts execute_ablate(const ExperimentConfig& cfg);

}  // namespace emobi::cli
