#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <string>

#include "emobi/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"emotion-guided hyperbole/metaphor detection pipeline"};
    app.require_subcommand(1);

    std::string config_file;
    emobi::cli::Overrides overrides;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_file, "experiment config file (JSON)")
            ->required();
        cmd->add_option_function<std::string>(
            "--dataset", [&](const std::string& v) { overrides.dataset = v; },
            "restrict to one dataset (HYPO, HYPO-L, LCC, TroFi)");
        cmd->add_option_function<std::string>(
            "--mode", [&](const std::string& v) { overrides.mode = v; },
            "run mode: emobi|separate|together|baseline_standard|baseline_cot");
        cmd->add_option_function<std::string>(
            "--provider", [&](const std::string& v) { overrides.provider = v; },
            "provider kind: http_api|scripted_mock");
        cmd->add_option_function<std::string>(
            "--model", [&](const std::string& v) { overrides.model = v; }, "model id");
        cmd->add_option_function<double>(
            "--temperature", [&](double v) { overrides.temperature = v; },
            "sampling temperature");
        cmd->add_option_function<int>(
            "--max-verification-rounds",
            [&](int v) { overrides.max_verification_rounds = v; },
            "verification round cap");
        cmd->add_option_function<int>(
            "--concurrency", [&](int v) { overrides.concurrency = v; },
            "concurrent sentences");
        cmd->add_option_function<std::string>(
            "--report-format", [&](const std::string& v) { overrides.report_format = v; },
            "text|csv|markdown");
        cmd->add_option_function<std::string>(
            "--cache-dir", [&](const std::string& v) { overrides.cache_dir = v; },
            "response cache directory");
        cmd->add_option_function<std::string>(
            "--out-dir", [&](const std::string& v) { overrides.out_dir = v; },
            "artifact output directory");
    };

    auto* run = app.add_subcommand("run", "run one experiment end to end");
    add_common(run);

    auto* ablate = app.add_subcommand("ablate", "run the full model plus the four ablations");
    add_common(ablate);

    auto* cache = app.add_subcommand("cache", "manage the response cache");
    std::string cache_action;
    std::string cache_dir;
    cache->add_option("action", cache_action, "stats|clear")->required();
    cache->add_option("--cache-dir", cache_dir, "response cache directory")->required();

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) return emobi::cli::cmd_run(config_file, overrides);
    if (ablate->parsed()) return emobi::cli::cmd_ablate(config_file, overrides);
    if (cache->parsed()) {
        if (cache_action == "stats") return emobi::cli::cmd_cache_stats(cache_dir);
        if (cache_action == "clear") return emobi::cli::cmd_cache_clear(cache_dir);
        std::cerr << "usage error: cache action must be stats|clear, got '" << cache_action
                  << "'\n";
        return 1;
    }
    return 1;
}
