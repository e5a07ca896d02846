#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "corpusforge/errors.hpp"

namespace corpusforge {

// All persistence is line-delimited JSON, UTF-8, one record per line, with a
// schema_version field on every record and fields in a fixed documented order
// (ordered_json keeps insertion order).
using ojson = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

struct GenerationParams {
    double temperature = 1.0;
    double top_p = 1.0;
    int max_tokens = 512;
    std::optional<std::int64_t> seed;

    // top_p in (0,1], temperature >= 0, max_tokens > 0.
    void validate() const;

    bool operator==(const GenerationParams&) const = default;
};

struct Scenario {
    std::string id;
    std::string text;
    std::optional<int> severity;
    std::string source;  // provenance label, e.g. "SAD"

    bool operator==(const Scenario&) const = default;
};

struct Story {
    std::string id;
    std::string scenario_id;
    std::string text;
    std::string model_id;
    GenerationParams params;
    std::string created_at;  // ISO-8601 UTC

    bool operator==(const Story&) const = default;
};

enum class TherapyStyle { CBT, DBT, PCT, RT };

inline constexpr TherapyStyle kAllStyles[] = {TherapyStyle::CBT, TherapyStyle::DBT,
                                              TherapyStyle::PCT, TherapyStyle::RT};

std::string to_string(TherapyStyle style);
TherapyStyle therapy_style_from_string(const std::string& name);

struct Explanation {
    std::string id;
    std::string story_id;
    TherapyStyle style = TherapyStyle::CBT;
    std::string text;
    std::string model_id;
    GenerationParams params;

    bool operator==(const Explanation&) const = default;
};

// One final corpus row: explanation plus empathetic response, with full
// provenance through the explanation -> story -> scenario id chain.
struct CorpusRecord {
    std::string id;
    Explanation explanation;
    std::string response_text;
    std::string response_model_id;
    GenerationParams response_params;
    bool filtered = false;

    bool operator==(const CorpusRecord&) const = default;
};

inline constexpr const char* kStageNames[] = {
    "brainstorm", "dedup_stories", "rewrite", "dedup_explanations",
    "respond",    "dedup_pairs",   "filter",
};

bool is_known_stage(const std::string& name);
bool is_removal_stage(const std::string& name);  // dedup_* and filter

struct StageManifest {
    std::string stage_name;
    std::uint64_t input_count = 0;
    std::uint64_t output_count = 0;
    std::uint64_t removed_count = 0;
    std::string config_hash;
    std::string started_at;
    std::string finished_at;

    // stage_name in the fixed set; conservation for dedup/filter stages.
    void validate() const;

    bool operator==(const StageManifest&) const = default;
};

// JSON conversions (documented schema order).
void to_json(ojson& j, const GenerationParams& v);
void from_json(const ojson& j, GenerationParams& v);
void to_json(ojson& j, const Scenario& v);
void from_json(const ojson& j, Scenario& v);
void to_json(ojson& j, const Story& v);
void from_json(const ojson& j, Story& v);
void to_json(ojson& j, const Explanation& v);
void from_json(const ojson& j, Explanation& v);
void to_json(ojson& j, const CorpusRecord& v);
void from_json(const ojson& j, CorpusRecord& v);
void to_json(ojson& j, const StageManifest& v);
void from_json(const ojson& j, StageManifest& v);

// Writes one JSON object per line. Returns the number of lines written.
// For CorpusRecord sequences, duplicate ids are a ValidationError.
template <typename Record>
std::size_t write_records(const std::vector<Record>& records, const std::filesystem::path& path);

// Reads a JSONL file written by write_records, preserving file order.
// Malformed line -> ParseError with the line number; missing/wrong-typed
// field -> SchemaError naming the field.
template <typename Record>
std::vector<Record> read_records(const std::filesystem::path& path);

// Atomically replaces `path` with `content` (temp file + rename).
void atomic_write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace corpusforge
