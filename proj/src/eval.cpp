#include "emobi/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "emobi/text_util.hpp"

namespace emobi {

using nlohmann::json;

ConfusionMatrix score(std::span<const int> predictions, std::span<const int> golds) {
    if (predictions.size() != golds.size()) {
        throw std::invalid_argument("score: " + std::to_string(predictions.size()) +
                                    " predictions vs " + std::to_string(golds.size()) +
                                    " golds");
    }
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const int p = predictions[i];
        const int g = golds[i];
        if ((p != 0 && p != 1) || (g != 0 && g != 1)) {
            throw std::invalid_argument("score: value out of {0,1} at index " +
                                        std::to_string(i));
        }
        if (p == 1 && g == 1) ++cm.tp;
        else if (p == 1 && g == 0) ++cm.fp;
        else if (p == 0 && g == 1) ++cm.fn;
        else ++cm.tn;
    }
    return cm;
}

TaskMetrics metrics(const ConfusionMatrix& cm) {
    TaskMetrics m;
    m.support = cm.tp + cm.fn;
    if (cm.tp + cm.fp > 0) {
        m.precision = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
    } else {
        m.degenerate = true;
    }
    if (cm.tp + cm.fn > 0) {
        m.recall = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
    } else {
        m.degenerate = true;
    }
    if (m.precision + m.recall > 0.0) {
        m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    } else {
        m.degenerate = true;
    }
    return m;
}

TaskMetrics macro_metrics(const ConfusionMatrix& cm) {
    const TaskMetrics pos = metrics(cm);
    const TaskMetrics neg = metrics({cm.tn, cm.fn, cm.fp, cm.tp});
    TaskMetrics m;
    m.precision = (pos.precision + neg.precision) / 2.0;
    m.recall = (pos.recall + neg.recall) / 2.0;
    m.f1 = (pos.f1 + neg.f1) / 2.0;
    m.support = pos.support;
    m.degenerate = pos.degenerate || neg.degenerate;
    return m;
}

RunResult score_traces(const std::vector<PipelineTrace>& traces, std::string run_id,
                       std::string config_fingerprint, bool macro) {
    struct Group {
        std::vector<int> hyp_pred, hyp_gold, met_pred, met_gold;
    };
    std::vector<std::pair<std::string, Group>> groups;
    auto group_for = [&](const std::string& name) -> Group& {
        for (auto& [n, g] : groups) {
            if (n == name) return g;
        }
        groups.emplace_back(name, Group{});
        return groups.back().second;
    };

    for (const auto& t : traces) {
        if (t.failed || !t.hyperbole || !t.metaphor) continue;
        auto& g = group_for(to_string(t.record.source_dataset));
        g.hyp_pred.push_back(t.hyperbole->label);
        g.hyp_gold.push_back(t.record.hyperbole_gold);
        g.met_pred.push_back(t.metaphor->label);
        g.met_gold.push_back(t.record.metaphor_gold);
    }

    RunResult result;
    result.run_id = std::move(run_id);
    result.config_fingerprint = std::move(config_fingerprint);
    auto compute = macro ? macro_metrics : metrics;
    for (auto& [name, g] : groups) {
        TaskPair pair;
        pair.hyperbole = compute(score(g.hyp_pred, g.hyp_gold));
        pair.metaphor = compute(score(g.met_pred, g.met_gold));
        result.per_dataset.emplace_back(name, pair);
    }
    return result;
}

namespace {

json task_metrics_to_json(const TaskMetrics& m) {
    return json{{"precision", m.precision},
                {"recall", m.recall},
                {"f1", m.f1},
                {"support", m.support},
                {"degenerate", m.degenerate}};
}

TaskMetrics task_metrics_from_json(const json& j) {
    TaskMetrics m;
    j.at("precision").get_to(m.precision);
    j.at("recall").get_to(m.recall);
    j.at("f1").get_to(m.f1);
    if (j.contains("support")) j.at("support").get_to(m.support);
    if (j.contains("degenerate")) j.at("degenerate").get_to(m.degenerate);
    return m;
}

}  // namespace

json run_result_to_json(const RunResult& r) {
    json datasets = json::array();
    for (const auto& [name, pair] : r.per_dataset) {
        datasets.push_back(json{{"dataset", name},
                                {"hyperbole", task_metrics_to_json(pair.hyperbole)},
                                {"metaphor", task_metrics_to_json(pair.metaphor)}});
    }
    return json{{"run_id", r.run_id},
                {"config_fingerprint", r.config_fingerprint},
                {"per_dataset", std::move(datasets)}};
}

RunResult run_result_from_json(const json& j) {
    RunResult r;
    j.at("run_id").get_to(r.run_id);
    j.at("config_fingerprint").get_to(r.config_fingerprint);
    for (const auto& d : j.at("per_dataset")) {
        TaskPair pair;
        pair.hyperbole = task_metrics_from_json(d.at("hyperbole"));
        pair.metaphor = task_metrics_from_json(d.at("metaphor"));
        r.per_dataset.emplace_back(d.at("dataset").get<std::string>(), pair);
    }
    return r;
}

// ---------------------------------------------------------------------------
// Reference table

ReferenceTable ReferenceTable::load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("reference_table: cannot read " + file.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("reference_table: " + std::string(e.what()));
    }

    ReferenceTable table;
    auto cell = [](const json& c) {
        ReferenceCell out;
        c.at("p").get_to(out.precision);
        c.at("r").get_to(out.recall);
        c.at("f1").get_to(out.f1);
        return out;
    };
    for (const auto& block : j.at("main_results")) {
        std::vector<ReferenceMethod> methods;
        for (const auto& m : block.at("methods")) {
            ReferenceMethod method;
            m.at("name").get_to(method.name);
            if (m.contains("baseline")) m.at("baseline").get_to(method.baseline);
            method.hyperbole = cell(m.at("hyperbole"));
            method.metaphor = cell(m.at("metaphor"));
            methods.push_back(std::move(method));
        }
        table.per_dataset.emplace_back(block.at("dataset").get<std::string>(),
                                       std::move(methods));
    }
    if (j.contains("ablations")) {
        for (const auto& block : j.at("ablations")) {
            std::vector<AblationRow> rows;
            for (const auto& r : block.at("rows")) {
                AblationRow row;
                r.at("label").get_to(row.label);
                r.at("hyperbole_f1").get_to(row.hyperbole_f1);
                r.at("metaphor_f1").get_to(row.metaphor_f1);
                rows.push_back(std::move(row));
            }
            table.ablations.emplace_back(block.at("dataset").get<std::string>(),
                                         std::move(rows));
        }
    }
    return table;
}

RunResult ReferenceTable::to_run_result(const std::string& method) const {
    RunResult result;
    result.run_id = method;
    result.config_fingerprint = "reference";
    auto to_metrics = [](const ReferenceCell& c) {
        TaskMetrics m;
        m.precision = c.precision / 100.0;
        m.recall = c.recall / 100.0;
        m.f1 = c.f1 / 100.0;
        return m;
    };
    for (const auto& [dataset, methods] : per_dataset) {
        for (const auto& m : methods) {
            if (m.name == method) {
                result.per_dataset.emplace_back(
                    dataset, TaskPair{to_metrics(m.hyperbole), to_metrics(m.metaphor)});
                break;
            }
        }
    }
    if (result.per_dataset.empty()) {
        throw ConfigError("reference_table: method '" + method + "' not present");
    }
    return result;
}

// ---------------------------------------------------------------------------
// Rendering

std::string to_string(ReportFormat f) {
    switch (f) {
        case ReportFormat::text: return "text";
        case ReportFormat::csv: return "csv";
        case ReportFormat::markdown: return "markdown";
    }
    return "text";
}

ReportFormat report_format_from_string(const std::string& s) {
    if (s == "text" || s == "txt") return ReportFormat::text;
    if (s == "csv") return ReportFormat::csv;
    if (s == "markdown" || s == "md") return ReportFormat::markdown;
    throw ConfigError("report_format: unknown value '" + s + "'");
}

namespace {

// All rendered numbers go through tenths so that deltas computed on the
// rounded values match the rendered cells exactly.
long long tenths(double percent) { return std::llround(percent * 10.0); }

std::string render_tenths(long long t) {
    std::ostringstream out;
    if (t < 0) out << '-';
    const long long a = std::llabs(t);
    out << a / 10 << '.' << a % 10;
    return out.str();
}

}  // namespace

std::string format_percent(double percent) { return render_tenths(tenths(percent)); }

std::string format_compare_delta(double delta_percent) {
    const long long t = tenths(delta_percent);
    if (t == 0) return "(+0.0%)";
    return std::string("(") + (t > 0 ? "+" : "-") + render_tenths(std::llabs(t)) + "%)";
}

std::string format_ablation_delta(double delta_percent) {
    const long long t = tenths(delta_percent);
    if (t == 0) return "(-0.0)";
    return std::string("(") + (t > 0 ? "+" : "-") + render_tenths(std::llabs(t)) + ")";
}

namespace {

constexpr const char* kTaskNames[2] = {"hyperbole", "metaphor"};
constexpr const char* kMetricNames[3] = {"P", "R", "F1"};

struct ReportRow {
    std::string name;
    bool is_result = false;
    // tenths of a percent, [task][metric] with metric order P, R, F1
    long long value[2][3] = {};
    bool has_delta = false;
    long long delta[2][3] = {};
};

long long metric_tenths(const TaskMetrics& m, int metric) {
    const double v = metric == 0 ? m.precision : metric == 1 ? m.recall : m.f1;
    return tenths(v * 100.0);
}

long long cell_tenths(const ReferenceCell& c, int metric) {
    const double v = metric == 0 ? c.precision : metric == 1 ? c.recall : c.f1;
    return tenths(v);
}

std::string pad(std::string s, std::size_t width) {
    if (s.size() < width) s.append(width - s.size(), ' ');
    return s;
}

std::string cell_text(const ReportRow& row, int task, int metric) {
    std::string s = render_tenths(row.value[task][metric]);
    if (row.has_delta) {
        s += " " + format_compare_delta(static_cast<double>(row.delta[task][metric]) / 10.0);
    }
    return s;
}

// best/second-best per column; used for markdown emphasis
void rank_column(const std::vector<ReportRow>& rows, int task, int metric, long long& best,
                 long long& second) {
    std::set<long long, std::greater<>> values;
    for (const auto& r : rows) values.insert(r.value[task][metric]);
    auto it = values.begin();
    best = it != values.end() ? *it : 0;
    second = it != values.end() && ++it != values.end() ? *it : best;
}

}  // namespace

std::string compare_report(const std::vector<RunResult>& results,
                           const std::optional<ReferenceTable>& reference,
                           ReportFormat format) {
    if (results.empty()) throw std::invalid_argument("compare_report: no results");

    // Dataset order: first result's order, then any extras from later results.
    std::vector<std::string> datasets;
    for (const auto& r : results) {
        for (const auto& [name, pair] : r.per_dataset) {
            if (std::find(datasets.begin(), datasets.end(), name) == datasets.end()) {
                datasets.push_back(name);
            }
        }
    }

    std::ostringstream out;
    if (format == ReportFormat::csv) {
        out << "dataset,method,task,precision,recall,f1";
        if (reference) out << ",precision_delta,recall_delta,f1_delta";
        out << '\n';
    }

    for (const auto& dataset : datasets) {
        std::vector<ReportRow> rows;

        const std::vector<ReferenceMethod>* ref_methods = nullptr;
        if (reference) {
            for (const auto& [name, methods] : reference->per_dataset) {
                if (name == dataset) {
                    ref_methods = &methods;
                    break;
                }
            }
            if (ref_methods == nullptr) {
                throw ConfigError("reference table has no dataset '" + dataset + "'");
            }
            for (const auto& m : *ref_methods) {
                if (!m.baseline) continue;
                ReportRow row;
                row.name = m.name;
                for (int metric = 0; metric < 3; ++metric) {
                    row.value[0][metric] = cell_tenths(m.hyperbole, metric);
                    row.value[1][metric] = cell_tenths(m.metaphor, metric);
                }
                rows.push_back(std::move(row));
            }
        }
        const std::size_t n_baselines = rows.size();

        for (const auto& r : results) {
            for (const auto& [name, pair] : r.per_dataset) {
                if (name != dataset) continue;
                ReportRow row;
                row.name = r.run_id;
                row.is_result = true;
                for (int metric = 0; metric < 3; ++metric) {
                    row.value[0][metric] = metric_tenths(pair.hyperbole, metric);
                    row.value[1][metric] = metric_tenths(pair.metaphor, metric);
                }
                if (n_baselines > 0) {
                    row.has_delta = true;
                    for (int task = 0; task < 2; ++task) {
                        for (int metric = 0; metric < 3; ++metric) {
                            long long best = rows[0].value[task][metric];
                            for (std::size_t b = 1; b < n_baselines; ++b) {
                                best = std::max(best, rows[b].value[task][metric]);
                            }
                            row.delta[task][metric] = row.value[task][metric] - best;
                        }
                    }
                }
                rows.push_back(std::move(row));
            }
        }

        if (format == ReportFormat::csv) {
            for (const auto& row : rows) {
                for (int task = 0; task < 2; ++task) {
                    out << dataset << ',' << row.name << ',' << kTaskNames[task];
                    for (int metric = 0; metric < 3; ++metric) {
                        out << ',' << render_tenths(row.value[task][metric]);
                    }
                    if (reference) {
                        for (int metric = 0; metric < 3; ++metric) {
                            out << ',';
                            if (row.has_delta) {
                                out << format_compare_delta(
                                    static_cast<double>(row.delta[task][metric]) / 10.0);
                            }
                        }
                    }
                    out << '\n';
                }
            }
            continue;
        }

        constexpr std::size_t kName = 18;
        constexpr std::size_t kCell = 15;

        if (format == ReportFormat::text) {
            out << "=== " << dataset << " ===\n";
            out << pad("method", kName);
            for (int task = 0; task < 2; ++task) {
                for (int metric = 0; metric < 3; ++metric) {
                    out << "| " << pad(std::string(kTaskNames[task]) + " " + kMetricNames[metric],
                                       kCell);
                }
            }
            out << '\n';
            for (const auto& row : rows) {
                out << pad(row.name, kName);
                for (int task = 0; task < 2; ++task) {
                    for (int metric = 0; metric < 3; ++metric) {
                        out << "| " << pad(cell_text(row, task, metric), kCell);
                    }
                }
                out << '\n';
            }
            out << '\n';
        } else {  // markdown
            out << "### " << dataset << "\n\n";
            out << "| method |";
            for (int task = 0; task < 2; ++task) {
                for (int metric = 0; metric < 3; ++metric) {
                    out << ' ' << kTaskNames[task] << ' ' << kMetricNames[metric] << " |";
                }
            }
            out << "\n|---|---|---|---|---|---|---|\n";
            for (const auto& row : rows) {
                out << "| " << row.name << " |";
                for (int task = 0; task < 2; ++task) {
                    for (int metric = 0; metric < 3; ++metric) {
                        long long best = 0;
                        long long second = 0;
                        rank_column(rows, task, metric, best, second);
                        std::string value = render_tenths(row.value[task][metric]);
                        if (rows.size() > 1 && row.value[task][metric] == best) {
                            value = "**" + value + "**";
                        } else if (rows.size() > 1 && row.value[task][metric] == second) {
                            value = "_" + value + "_";
                        }
                        if (row.has_delta) {
                            value += " " + format_compare_delta(
                                               static_cast<double>(row.delta[task][metric]) /
                                               10.0);
                        }
                        out << ' ' << value << " |";
                    }
                }
                out << '\n';
            }
            out << '\n';
        }
    }
    return out.str();
}

std::string ablation_report(const RunResult& full,
                            const std::vector<std::pair<std::string, RunResult>>& ablations,
                            ReportFormat format) {
    // All runs must cover the same datasets, in any order.
    std::set<std::string> full_sets;
    for (const auto& [name, pair] : full.per_dataset) full_sets.insert(name);
    for (const auto& [label, run] : ablations) {
        std::set<std::string> sets;
        for (const auto& [name, pair] : run.per_dataset) sets.insert(name);
        if (sets != full_sets) {
            throw std::invalid_argument("ablation_report: run '" + label +
                                        "' covers different datasets than the full run");
        }
    }

    auto find_pair = [](const RunResult& r, const std::string& dataset) -> const TaskPair& {
        for (const auto& [name, pair] : r.per_dataset) {
            if (name == dataset) return pair;
        }
        throw std::invalid_argument("ablation_report: missing dataset " + dataset);
    };

    std::ostringstream out;
    if (format == ReportFormat::csv) {
        out << "dataset,run,hyperbole_f1,hyperbole_delta,metaphor_f1,metaphor_delta\n";
    }

    for (const auto& [dataset, full_pair] : full.per_dataset) {
        const long long full_h = metric_tenths(full_pair.hyperbole, 2);
        const long long full_m = metric_tenths(full_pair.metaphor, 2);

        struct Row {
            std::string label;
            long long h;
            long long m;
            bool is_full;
        };
        std::vector<Row> rows;
        rows.push_back({full.run_id, full_h, full_m, true});
        for (const auto& [label, run] : ablations) {
            const auto& pair = find_pair(run, dataset);
            rows.push_back({label, metric_tenths(pair.hyperbole, 2),
                            metric_tenths(pair.metaphor, 2), false});
        }

        auto cell = [&](const Row& row, long long value, long long full_value) {
            std::string s = render_tenths(value);
            if (!row.is_full) {
                s += " " + format_ablation_delta(static_cast<double>(value - full_value) / 10.0);
            }
            return s;
        };

        if (format == ReportFormat::csv) {
            for (const auto& row : rows) {
                out << dataset << ',' << row.label << ',' << render_tenths(row.h) << ','
                    << (row.is_full
                            ? ""
                            : format_ablation_delta(static_cast<double>(row.h - full_h) / 10.0))
                    << ',' << render_tenths(row.m) << ','
                    << (row.is_full
                            ? ""
                            : format_ablation_delta(static_cast<double>(row.m - full_m) / 10.0))
                    << '\n';
            }
        } else if (format == ReportFormat::text) {
            constexpr std::size_t kName = 20;
            constexpr std::size_t kCell = 16;
            out << "=== " << dataset << " ===\n";
            out << pad("run", kName) << "| " << pad("hyperbole F1", kCell) << "| "
                << pad("metaphor F1", kCell) << '\n';
            for (const auto& row : rows) {
                out << pad(row.label, kName) << "| " << pad(cell(row, row.h, full_h), kCell)
                    << "| " << pad(cell(row, row.m, full_m), kCell) << '\n';
            }
            out << '\n';
        } else {
            out << "### " << dataset << "\n\n| run | hyperbole F1 | metaphor F1 |\n|---|---|---|\n";
            for (const auto& row : rows) {
                out << "| " << row.label << " | " << cell(row, row.h, full_h) << " | "
                    << cell(row, row.m, full_m) << " |\n";
            }
            out << '\n';
        }
    }
    return out.str();
}

}  // namespace emobi
