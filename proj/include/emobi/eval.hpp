#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "emobi/pipeline.hpp"
#include "emobi/types.hpp"

namespace emobi {

struct ConfusionMatrix {
    long long tp = 0;
    long long fp = 0;
    long long fn = 0;
    long long tn = 0;

    long long total() const { return tp + fp + fn + tn; }
    bool operator==(const ConfusionMatrix&) const = default;
};

// Counts agreement between binary predictions and golds (positive class = 1).
// Throws std::invalid_argument on length mismatch or out-of-range values.
ConfusionMatrix score(std::span<const int> predictions, std::span<const int> golds);

struct TaskMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    long long support = 0;   // positive-class count in the golds
    bool degenerate = false; // some denominator was zero and yielded 0

    bool operator==(const TaskMetrics&) const = default;
};

// Positive-class precision/recall/F1. Zero denominators yield 0 and set the
// degeneracy flag.
TaskMetrics metrics(const ConfusionMatrix& cm);

// Macro average over the positive and negative class.
TaskMetrics macro_metrics(const ConfusionMatrix& cm);

struct TaskPair {
    TaskMetrics hyperbole;
    TaskMetrics metaphor;
    bool operator==(const TaskPair&) const = default;
};

struct RunResult {
    std::string run_id;
    std::string config_fingerprint;
    // One entry per dataset, insertion order preserved for rendering.
    std::vector<std::pair<std::string, TaskPair>> per_dataset;

    bool operator==(const RunResult&) const = default;
};

// Scores a batch of traces against the gold labels, grouped by source
// dataset. Failed traces carry no predictions and are skipped.
RunResult score_traces(const std::vector<PipelineTrace>& traces, std::string run_id,
                       std::string config_fingerprint, bool macro = false);

nlohmann::json run_result_to_json(const RunResult& r);
RunResult run_result_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Stored reference numbers (reported constants, used only for rendering
// comparisons in reports — never as test ground truth for the pipeline).

struct ReferenceCell {
    double precision = 0.0;  // percent scale, as reported
    double recall = 0.0;
    double f1 = 0.0;
};

struct ReferenceMethod {
    std::string name;
    bool baseline = true;  // non-baseline rows are excluded from delta anchors
    ReferenceCell hyperbole;
    ReferenceCell metaphor;
};

struct ReferenceTable {
    std::vector<std::pair<std::string, std::vector<ReferenceMethod>>> per_dataset;
    // Ablation F1 cells keyed dataset -> run label -> task, percent scale.
    struct AblationRow {
        std::string label;  // "full", "w/o emotion", ...
        double hyperbole_f1 = 0.0;
        double metaphor_f1 = 0.0;
    };
    std::vector<std::pair<std::string, std::vector<AblationRow>>> ablations;

    static ReferenceTable load(const std::filesystem::path& file);

    // Builds a RunResult (fractional metrics) from a stored method row.
    RunResult to_run_result(const std::string& method) const;
};

// ---------------------------------------------------------------------------
// Report rendering. Values render as percentages with one decimal; deltas
// are computed on the rounded values so rendered tables re-parse exactly.

enum class ReportFormat { text, csv, markdown };

std::string to_string(ReportFormat f);
ReportFormat report_format_from_string(const std::string& s);

std::string format_percent(double percent);
std::string format_compare_delta(double delta_percent);   // "(+2.7%)", zero -> "(+0.0%)"
std::string format_ablation_delta(double delta_percent);  // "(-4.6)",  zero -> "(-0.0)"

// Side-by-side table of results (and optional stored baselines) per dataset
// and task. With a reference, result rows carry bracketed deltas against the
// best baseline for each metric.
std::string compare_report(const std::vector<RunResult>& results,
                           const std::optional<ReferenceTable>& reference,
                           ReportFormat format);

// Table-2-style view: F1 per dataset/task for the full run and each
// ablation, with the bracketed change against the full run.
std::string ablation_report(const RunResult& full,
                            const std::vector<std::pair<std::string, RunResult>>& ablations,
                            ReportFormat format);

}  // namespace emobi
