#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "emobi/types.hpp"

namespace emobi {

enum class Dataset { HYPO, HYPO_L, LCC, TROFI };

std::string to_string(Dataset d);
Dataset dataset_from_string(const std::string& s);

// One corpus item: a sentence with gold labels for both tasks.
struct SentenceRecord {
    std::string id;
    std::string text;
    int hyperbole_gold = 0;
    int metaphor_gold = 0;
    Dataset source_dataset = Dataset::HYPO;

    bool operator==(const SentenceRecord&) const = default;
};

// Column mapping for a delimited input file. Columns are addressed by header
// name, or by 0-based index given as a digit string (required when the file
// has no header). An empty id column derives ids from row numbers.
struct ColumnFormat {
    char delimiter = ',';
    bool has_header = true;
    std::string id_column;
    std::string text_column = "text";
    std::string hyperbole_column = "hyperbole";
    std::string metaphor_column = "metaphor";

    bool operator==(const ColumnFormat&) const = default;
};

struct SplitSpec {
    double train_fraction = 0.8;
    double test_fraction = 0.2;
    std::uint64_t seed = 0;

    bool operator==(const SplitSpec&) const = default;
};

struct DatasetSpec {
    Dataset name = Dataset::HYPO;
    std::filesystem::path path;
    ColumnFormat format;
    std::optional<SplitSpec> split;

    bool operator==(const DatasetSpec&) const = default;
};

// Maps a textual label to {0,1}. Accepts 1/0, yes/no, true/false,
// case-insensitive; anything else throws DataError.
int normalize_label(const std::string& value);

// Reads every row of the file into records, in file order.
// Throws DataError naming the row on malformed rows or bad label values.
std::vector<SentenceRecord> load_dataset(const DatasetSpec& spec);

// Seeded shuffle split into (train, test). The same records, fractions and
// seed always produce the same partition.
std::pair<std::vector<SentenceRecord>, std::vector<SentenceRecord>> split_dataset(
    const std::vector<SentenceRecord>& records, const SplitSpec& split);

struct DatasetStats {
    std::size_t count = 0;
    std::size_t hyperbole_positive = 0;
    std::size_t metaphor_positive = 0;
    // Unset (rather than 0) when there are no records to average over.
    std::optional<double> hyperbole_rate;
    std::optional<double> metaphor_rate;
};

DatasetStats dataset_stats(const std::vector<SentenceRecord>& records);

// Canonical line-delimited dump: one JSON object per record with fields
// id, text, hyperbole_gold, metaphor_gold, source_dataset.
void dump_records(const std::vector<SentenceRecord>& records, std::ostream& out);
std::vector<SentenceRecord> load_records(std::istream& in);

void to_json(nlohmann::json& j, const ColumnFormat& f);
void from_json(const nlohmann::json& j, ColumnFormat& f);
void to_json(nlohmann::json& j, const SplitSpec& s);
void from_json(const nlohmann::json& j, SplitSpec& s);
void to_json(nlohmann::json& j, const DatasetSpec& s);
void from_json(const nlohmann::json& j, DatasetSpec& s);

}  // namespace emobi
