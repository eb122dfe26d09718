#include "emobi/cli.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include "emobi/text_util.hpp"

namespace emobi::cli {

using nlohmann::json;

ExperimentConfig effective_config(const std::filesystem::path& config_file,
                                  const Overrides& o) {
    ExperimentConfig cfg = load_experiment_config(config_file);
    if (o.dataset) {
        const Dataset wanted = dataset_from_string(*o.dataset);
        std::vector<DatasetSpec> kept;
        for (const auto& spec : cfg.datasets) {
            if (spec.name == wanted) kept.push_back(spec);
        }
        if (kept.empty()) {
            throw ConfigError("dataset: '" + *o.dataset + "' not present in config");
        }
        cfg.datasets = std::move(kept);
    }
    if (o.mode) cfg.pipeline.run_mode = run_mode_from_string(*o.mode);
    if (o.provider) cfg.provider.kind = provider_kind_from_string(*o.provider);
    if (o.model) cfg.pipeline.model_id = *o.model;
    if (o.temperature) cfg.pipeline.temperature = *o.temperature;
    if (o.max_verification_rounds) {
        cfg.pipeline.max_verification_rounds = *o.max_verification_rounds;
    }
    if (o.concurrency) cfg.concurrency = *o.concurrency;
    if (o.report_format) cfg.report_format = report_format_from_string(*o.report_format);
    if (o.cache_dir) cfg.cache_dir = *o.cache_dir;
    if (o.out_dir) cfg.out_dir = *o.out_dir;
    cfg.validate();
    return cfg;
}

namespace {

std::string timestamp_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", &tm);
    return buf;
}

std::vector<SentenceRecord> load_eval_records(const ExperimentConfig& cfg) {
    std::vector<SentenceRecord> all;
    for (const auto& spec : cfg.datasets) {
        auto records = load_dataset(spec);
        if (spec.split && cfg.eval_split != "all") {
            auto [train, test] = split_dataset(records, *spec.split);
            records = cfg.eval_split == "train" ? std::move(train) : std::move(test);
        }
        all.insert(all.end(), records.begin(), records.end());
    }
    return all;
}

std::string report_extension(ReportFormat f) {
    switch (f) {
        case ReportFormat::text: return ".txt";
        case ReportFormat::csv: return ".csv";
        case ReportFormat::markdown: return ".md";
    }
    return ".txt";
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << content;
}

}  // namespace

RunArtifacts execute_run(const ExperimentConfig& cfg, const std::string& run_label) {
    const std::string fingerprint = config_fingerprint(cfg);
    const auto records = load_eval_records(cfg);

    Gateway gateway(cfg.provider);
    PromptLibrary prompts(cfg.template_set);
    std::optional<ResponseCache> cache;
    if (!cfg.cache_dir.empty()) cache.emplace(cfg.cache_dir);

    PipelineRunner runner(gateway, prompts, cfg.pipeline, cache ? &*cache : nullptr,
                          fingerprint);
    const BatchResult batch = runner.run_batch(records, cfg.concurrency);

    // run_id stays deterministic so a cached rerun reproduces the report
    // byte for byte; the wall-clock timestamp only names the directory.
    const std::string run_id = run_label + "-" + to_string(cfg.pipeline.run_mode);
    RunResult result = score_traces(batch.traces, run_id, fingerprint, cfg.macro_metrics);

    RunArtifacts artifacts;
    artifacts.run_dir = cfg.out_dir / (timestamp_now() + "-" + fingerprint + "-" + run_label);
    std::filesystem::create_directories(artifacts.run_dir);

    write_file(artifacts.run_dir / "config.json", to_json(cfg).dump(2) + "\n");

    {
        std::ofstream out(artifacts.run_dir / "dataset.jsonl", std::ios::binary);
        dump_records(records, out);
    }
    {
        std::ofstream out(artifacts.run_dir / "traces.jsonl", std::ios::binary);
        for (const auto& trace : batch.traces) out << trace_to_json(trace).dump() << '\n';
        for (const auto& failure : batch.failures) {
            out << trace_to_json(failure.partial).dump() << '\n';
        }
    }
    if (!batch.failures.empty()) {
        std::ofstream out(artifacts.run_dir / "failures.log", std::ios::binary);
        for (const auto& f : batch.failures) {
            out << "record " << f.record_id << " (index " << f.index << "): " << f.error << '\n';
        }
    }
    write_file(artifacts.run_dir / "metrics.json", run_result_to_json(result).dump(2) + "\n");

    std::optional<ReferenceTable> reference;
    if (cfg.reference_table) reference = ReferenceTable::load(*cfg.reference_table);
    artifacts.report = compare_report({result}, reference, cfg.report_format);
    // CSV stays machine-pure; the other formats carry their provenance line.
    std::string report_file = artifacts.report;
    if (cfg.report_format != ReportFormat::csv) {
        report_file += "config fingerprint: " + fingerprint + "\n";
    }
    write_file(artifacts.run_dir / ("report" + report_extension(cfg.report_format)),
               report_file);

    artifacts.result = std::move(result);
    artifacts.failures = batch.failures.size();
    artifacts.provider_invocations = gateway.provider_invocations();
    return artifacts;
}

AblateArtifacts execute_ablate(const ExperimentConfig& cfg) {
    struct Variant {
        std::string label;
        bool PipelineConfig::* flag;
    };
    static const std::vector<Variant> variants = {
        {"w/o emotion", &PipelineConfig::use_emotion},
        {"w/o interaction", &PipelineConfig::use_interaction},
        {"w/o domain", &PipelineConfig::use_domain},
        {"w/o verification", &PipelineConfig::use_verification},
    };

    ExperimentConfig full_cfg = cfg;
    full_cfg.pipeline.run_mode = RunMode::emobi;
    full_cfg.pipeline.use_emotion = true;
    full_cfg.pipeline.use_domain = true;
    full_cfg.pipeline.use_interaction = true;
    full_cfg.pipeline.use_verification = true;

    AblateArtifacts out;
    out.full = execute_run(full_cfg, "full");
    out.failures = out.full.failures;

    std::vector<std::pair<std::string, RunResult>> ablation_results;
    for (const auto& variant : variants) {
        ExperimentConfig variant_cfg = full_cfg;
        variant_cfg.pipeline.*variant.flag = false;
        RunArtifacts artifacts = execute_run(variant_cfg, "wo_" + variant.label.substr(4));
        out.failures += artifacts.failures;
        RunResult result = artifacts.result;
        result.run_id = variant.label;
        ablation_results.emplace_back(variant.label, result);
        out.ablations.emplace_back(variant.label, std::move(artifacts));
    }

    RunResult full_result = out.full.result;
    full_result.run_id = "full";
    out.report = ablation_report(full_result, ablation_results, cfg.report_format);

    out.report_path = cfg.out_dir / (timestamp_now() + "-" + config_fingerprint(full_cfg) +
                                     "-ablation_report" + report_extension(cfg.report_format));
    std::filesystem::create_directories(cfg.out_dir);
    std::string report_file = out.report;
    if (cfg.report_format != ReportFormat::csv) {
        report_file += "config fingerprint: " + config_fingerprint(full_cfg) + "\n";
    }
    write_file(out.report_path, report_file);
    return out;
}

int cmd_run(const std::filesystem::path& config_file, const Overrides& overrides) {
    try {
        const ExperimentConfig cfg = effective_config(config_file, overrides);
        const RunArtifacts artifacts = execute_run(cfg);
        std::cout << artifacts.report;
        std::cout << "run artifacts: " << artifacts.run_dir.string() << "\n";
        if (artifacts.failures > 0) {
            std::cerr << artifacts.failures << " sentence(s) failed; see failures.log\n";
            return 2;
        }
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

int cmd_ablate(const std::filesystem::path& config_file, const Overrides& overrides) {
    try {
        const ExperimentConfig cfg = effective_config(config_file, overrides);
        const AblateArtifacts artifacts = execute_ablate(cfg);
        std::cout << artifacts.report;
        std::cout << "ablation report: " << artifacts.report_path.string() << "\n";
        if (artifacts.failures > 0) {
            std::cerr << artifacts.failures << " sentence(s) failed across runs\n";
            return 2;
        }
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

int cmd_cache_stats(const std::filesystem::path& cache_dir) {
    if (!std::filesystem::exists(cache_dir)) {
        std::cerr << "cache directory does not exist: " << cache_dir.string() << "\n";
        return 1;
    }
    const ResponseCache cache(cache_dir);
    const auto stats = cache.stats();
    std::cout << "entries: " << stats.entries << "\nbytes: " << stats.bytes << "\n";
    return 0;
}

int cmd_cache_clear(const std::filesystem::path& cache_dir) {
    if (!std::filesystem::exists(cache_dir)) {
        std::cerr << "cache directory does not exist: " << cache_dir.string() << "\n";
        return 1;
    }
    const ResponseCache cache(cache_dir);
    cache.clear();
    std::cout << "cache cleared: " << cache_dir.string() << "\n";
    return 0;
}

}  // namespace emobi::cli
