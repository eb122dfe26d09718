#include "emobi/corpus.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "emobi/text_util.hpp"

namespace emobi {

using nlohmann::json;

std::string to_string(Device d) {
    return d == Device::hyperbole ? "hyperbole" : "metaphor";
}

Device device_from_string(const std::string& s) {
    if (s == "hyperbole") return Device::hyperbole;
    if (s == "metaphor") return Device::metaphor;
    throw ConfigError("device: unknown value '" + s + "'");
}

std::string to_string(Dataset d) {
    switch (d) {
        case Dataset::HYPO: return "HYPO";
        case Dataset::HYPO_L: return "HYPO-L";
        case Dataset::LCC: return "LCC";
        case Dataset::TROFI: return "TroFi";
    }
    return "HYPO";
}

Dataset dataset_from_string(const std::string& s) {
    if (s == "HYPO") return Dataset::HYPO;
    if (s == "HYPO-L" || s == "HYPO_L") return Dataset::HYPO_L;
    if (s == "LCC") return Dataset::LCC;
    if (s == "TroFi" || s == "TROFI") return Dataset::TROFI;
    throw ConfigError("dataset: unknown value '" + s + "'");
}

int normalize_label(const std::string& value) {
    const std::string v = to_lower(trim(value));
    if (v == "1" || v == "yes" || v == "true") return 1;
    if (v == "0" || v == "no" || v == "false") return 0;
    throw DataError("unnormalizable label value '" + value + "'");
}

namespace {

// RFC-4180-style parsing: fields may be quoted with ", a doubled "" inside a
// quoted field is a literal quote. Rows are physical lines except where a
// quoted field spans a newline.
std::vector<std::vector<std::string>> parse_delimited(std::istream& in, char delimiter) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool row_started = false;
    char c;
    while (in.get(c)) {
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field.push_back('"');
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        if (c == '"') {
            in_quotes = true;
            row_started = true;
        } else if (c == delimiter) {
            row.push_back(field);
            field.clear();
            row_started = true;
        } else if (c == '\n') {
            if (row_started || !field.empty()) {
                row.push_back(field);
                rows.push_back(std::move(row));
            }
            row.clear();
            field.clear();
            row_started = false;
        } else if (c == '\r') {
            // swallowed; \r\n and bare \n both terminate rows
        } else {
            field.push_back(c);
            row_started = true;
        }
    }
    if (in_quotes) throw DataError("unterminated quoted field at end of file");
    if (row_started || !field.empty()) {
        row.push_back(field);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::size_t resolve_column(const std::string& column, const std::vector<std::string>& header,
                           bool has_header, const char* what) {
    if (has_header) {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (trim(header[i]) == column) return i;
        }
    }
    if (!column.empty() && column.find_first_not_of("0123456789") == std::string::npos) {
        return static_cast<std::size_t>(std::stoul(column));
    }
    throw DataError(std::string(what) + " column '" + column + "' not found" +
                    (has_header ? " in file header" : " (no header; use a 0-based index)"));
}

}  // namespace

std::vector<SentenceRecord> load_dataset(const DatasetSpec& spec) {
    std::ifstream in(spec.path, std::ios::binary);
    if (!in) throw DataError("cannot open dataset file: " + spec.path.string());

    auto rows = parse_delimited(in, spec.format.delimiter);
    std::vector<SentenceRecord> records;
    if (rows.empty()) return records;

    std::vector<std::string> header;
    std::size_t first_data_row = 0;
    if (spec.format.has_header) {
        header = rows[0];
        first_data_row = 1;
    }

    const std::size_t text_idx =
        resolve_column(spec.format.text_column, header, spec.format.has_header, "text");
    const std::size_t hyp_idx = resolve_column(spec.format.hyperbole_column, header,
                                               spec.format.has_header, "hyperbole");
    const std::size_t met_idx =
        resolve_column(spec.format.metaphor_column, header, spec.format.has_header, "metaphor");
    std::optional<std::size_t> id_idx;
    if (!spec.format.id_column.empty()) {
        id_idx = resolve_column(spec.format.id_column, header, spec.format.has_header, "id");
    }

    const std::size_t expected_cols =
        spec.format.has_header ? header.size()
                               : std::max({text_idx, hyp_idx, met_idx,
                                           id_idx.value_or(0)}) + 1;

    records.reserve(rows.size() - first_data_row);
    std::unordered_map<std::string, std::size_t> seen_ids;
    for (std::size_t r = first_data_row; r < rows.size(); ++r) {
        const auto& row = rows[r];
        const std::size_t row_number = r + 1;  // 1-based, header included
        if (spec.format.has_header ? row.size() != expected_cols : row.size() < expected_cols) {
            std::ostringstream msg;
            msg << "row " << row_number << ": expected " << expected_cols << " columns, got "
                << row.size();
            throw DataError(msg.str());
        }
        SentenceRecord rec;
        rec.source_dataset = spec.name;
        rec.text = trim(row[text_idx]);
        if (rec.text.empty()) {
            throw DataError("row " + std::to_string(row_number) + ": empty sentence text");
        }
        try {
            rec.hyperbole_gold = normalize_label(row[hyp_idx]);
            rec.metaphor_gold = normalize_label(row[met_idx]);
        } catch (const DataError& e) {
            throw DataError("row " + std::to_string(row_number) + ": " + e.what());
        }
        rec.id = id_idx ? trim(row[*id_idx]) : std::to_string(records.size() + 1);
        auto [it, inserted] = seen_ids.emplace(rec.id, row_number);
        if (!inserted) {
            throw DataError("row " + std::to_string(row_number) + ": duplicate id '" + rec.id +
                            "' (first seen at row " + std::to_string(it->second) + ")");
        }
        records.push_back(std::move(rec));
    }
    return records;
}

std::pair<std::vector<SentenceRecord>, std::vector<SentenceRecord>> split_dataset(
    const std::vector<SentenceRecord>& records, const SplitSpec& split) {
    if (split.train_fraction < 0.0 || split.train_fraction > 1.0 || split.test_fraction < 0.0 ||
        split.test_fraction > 1.0 ||
        std::abs(split.train_fraction + split.test_fraction - 1.0) > 1e-9) {
        throw ConfigError("split: fractions must lie in [0,1] and sum to 1");
    }

    std::vector<std::size_t> order(records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    // Explicit Fisher-Yates so the partition is identical across standard
    // library implementations, not just across runs.
    std::mt19937_64 gen(split.seed);
    for (std::size_t i = order.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(gen() % i);
        std::swap(order[i - 1], order[j]);
    }

    const auto n_train =
        static_cast<std::size_t>(std::llround(split.train_fraction * records.size()));
    std::pair<std::vector<SentenceRecord>, std::vector<SentenceRecord>> out;
    out.first.reserve(n_train);
    out.second.reserve(records.size() - n_train);
    for (std::size_t i = 0; i < order.size(); ++i) {
        (i < n_train ? out.first : out.second).push_back(records[order[i]]);
    }
    return out;
}

DatasetStats dataset_stats(const std::vector<SentenceRecord>& records) {
    DatasetStats stats;
    stats.count = records.size();
    for (const auto& r : records) {
        stats.hyperbole_positive += static_cast<std::size_t>(r.hyperbole_gold);
        stats.metaphor_positive += static_cast<std::size_t>(r.metaphor_gold);
    }
    if (!records.empty()) {
        stats.hyperbole_rate =
            static_cast<double>(stats.hyperbole_positive) / static_cast<double>(stats.count);
        stats.metaphor_rate =
            static_cast<double>(stats.metaphor_positive) / static_cast<double>(stats.count);
    }
    return stats;
}

void dump_records(const std::vector<SentenceRecord>& records, std::ostream& out) {
    for (const auto& r : records) {
        json j{{"id", r.id},
               {"text", r.text},
               {"hyperbole_gold", r.hyperbole_gold},
               {"metaphor_gold", r.metaphor_gold},
               {"source_dataset", to_string(r.source_dataset)}};
        out << j.dump() << '\n';
    }
}

void to_json(json& j, const ColumnFormat& f) {
    j = json{{"delimiter", std::string(1, f.delimiter)},
             {"has_header", f.has_header},
             {"id_column", f.id_column},
             {"text_column", f.text_column},
             {"hyperbole_column", f.hyperbole_column},
             {"metaphor_column", f.metaphor_column}};
}

void from_json(const json& j, ColumnFormat& f) {
    f = ColumnFormat{};
    if (j.contains("delimiter")) {
        const auto d = j.at("delimiter").get<std::string>();
        if (d == "\\t" || d == "tab") {
            f.delimiter = '\t';
        } else if (d.size() == 1) {
            f.delimiter = d[0];
        } else {
            throw ConfigError("format.delimiter: expected a single character or 'tab'");
        }
    }
    if (j.contains("has_header")) j.at("has_header").get_to(f.has_header);
    if (j.contains("id_column")) j.at("id_column").get_to(f.id_column);
    if (j.contains("text_column")) j.at("text_column").get_to(f.text_column);
    if (j.contains("hyperbole_column")) j.at("hyperbole_column").get_to(f.hyperbole_column);
    if (j.contains("metaphor_column")) j.at("metaphor_column").get_to(f.metaphor_column);
}

void to_json(json& j, const SplitSpec& s) {
    j = json{{"train", s.train_fraction}, {"test", s.test_fraction}, {"seed", s.seed}};
}

void from_json(const json& j, SplitSpec& s) {
    s = SplitSpec{};
    j.at("train").get_to(s.train_fraction);
    j.at("test").get_to(s.test_fraction);
    if (j.contains("seed")) j.at("seed").get_to(s.seed);
}

void to_json(json& j, const DatasetSpec& s) {
    j = json{{"name", to_string(s.name)}, {"path", s.path.string()}, {"format", s.format}};
    if (s.split) j["split"] = *s.split;
}

void from_json(const json& j, DatasetSpec& s) {
    s = DatasetSpec{};
    s.name = dataset_from_string(j.at("name").get<std::string>());
    s.path = j.at("path").get<std::string>();
    if (j.contains("format")) j.at("format").get_to(s.format);
    if (j.contains("split")) s.split = j.at("split").get<SplitSpec>();
}

std::vector<SentenceRecord> load_records(std::istream& in) {
    std::vector<SentenceRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError("line " + std::to_string(line_no) + ": " + e.what());
        }
        SentenceRecord rec;
        rec.id = j.at("id").get<std::string>();
        rec.text = j.at("text").get<std::string>();
        rec.hyperbole_gold = j.at("hyperbole_gold").get<int>();
        rec.metaphor_gold = j.at("metaphor_gold").get<int>();
        rec.source_dataset = dataset_from_string(j.at("source_dataset").get<std::string>());
        records.push_back(std::move(rec));
    }
    return records;
}

}  // namespace emobi
