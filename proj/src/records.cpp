#include "corpusforge/records.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

namespace corpusforge {

namespace {

// Context for schema errors raised while converting one parsed line.
thread_local std::size_t g_current_line = 0;

const ojson& require_field(const ojson& j, const char* name) {
    auto it = j.find(name);
    if (it == j.end()) {
        throw SchemaError("missing required field", g_current_line, name);
    }
    return *it;
}

template <typename T>
T field_as(const ojson& j, const char* name) {
    try {
        return require_field(j, name).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw SchemaError("field has wrong type", g_current_line, name);
    }
}

void check_schema_version(const ojson& j) {
    int v = field_as<int>(j, "schema_version");
    if (v != kSchemaVersion) {
        throw SchemaError("unsupported schema_version " + std::to_string(v), g_current_line,
                          "schema_version");
    }
}

}  // namespace

void GenerationParams::validate() const {
    if (temperature < 0.0) {
        throw ValidationError("temperature must be >= 0");
    }
    if (!(top_p > 0.0) || top_p > 1.0) {
        throw ValidationError("top_p must be in (0, 1]");
    }
    if (max_tokens <= 0) {
        throw ValidationError("max_tokens must be positive");
    }
}

std::string to_string(TherapyStyle style) {
    switch (style) {
        case TherapyStyle::CBT: return "CBT";
        case TherapyStyle::DBT: return "DBT";
        case TherapyStyle::PCT: return "PCT";
        case TherapyStyle::RT: return "RT";
    }
    throw ValidationError("invalid TherapyStyle value");
}

TherapyStyle therapy_style_from_string(const std::string& name) {
    if (name == "CBT") return TherapyStyle::CBT;
    if (name == "DBT") return TherapyStyle::DBT;
    if (name == "PCT") return TherapyStyle::PCT;
    if (name == "RT") return TherapyStyle::RT;
    throw ValidationError("unknown therapy style '" + name + "'");
}

bool is_known_stage(const std::string& name) {
    for (const char* s : kStageNames) {
        if (name == s) return true;
    }
    return false;
}

bool is_removal_stage(const std::string& name) {
    return name.rfind("dedup_", 0) == 0 || name == "filter";
}

void StageManifest::validate() const {
    if (!is_known_stage(stage_name)) {
        throw ValidationError("unknown stage name '" + stage_name + "'");
    }
    if (is_removal_stage(stage_name) && output_count + removed_count != input_count) {
        throw ValidationError("stage '" + stage_name + "' violates conservation: " +
                              std::to_string(output_count) + " + " +
                              std::to_string(removed_count) +
                              " != " + std::to_string(input_count));
    }
}

void to_json(ojson& j, const GenerationParams& v) {
    j = ojson{{"temperature", v.temperature}, {"top_p", v.top_p}, {"max_tokens", v.max_tokens}};
    if (v.seed) {
        j["seed"] = *v.seed;
    } else {
        j["seed"] = nullptr;
    }
}

void from_json(const ojson& j, GenerationParams& v) {
    v.temperature = field_as<double>(j, "temperature");
    v.top_p = field_as<double>(j, "top_p");
    v.max_tokens = field_as<int>(j, "max_tokens");
    const auto& seed = require_field(j, "seed");
    v.seed = seed.is_null() ? std::nullopt : std::optional<std::int64_t>(seed.get<std::int64_t>());
}

void to_json(ojson& j, const Scenario& v) {
    j = ojson{{"schema_version", kSchemaVersion}, {"id", v.id}, {"text", v.text}};
    j["severity"] = v.severity ? ojson(*v.severity) : ojson(nullptr);
    j["source"] = v.source;
}

void from_json(const ojson& j, Scenario& v) {
    check_schema_version(j);
    v.id = field_as<std::string>(j, "id");
    v.text = field_as<std::string>(j, "text");
    // severity and source are optional so operator-supplied scenario files
    // can stay minimal.
    v.severity = std::nullopt;
    if (j.contains("severity") && !j["severity"].is_null()) {
        v.severity = field_as<int>(j, "severity");
    }
    v.source = j.contains("source") && j["source"].is_string()
                   ? j["source"].get<std::string>()
                   : std::string{};
}

void to_json(ojson& j, const Story& v) {
    j = ojson{{"schema_version", kSchemaVersion},
              {"id", v.id},
              {"scenario_id", v.scenario_id},
              {"text", v.text},
              {"model_id", v.model_id},
              {"params", v.params},
              {"created_at", v.created_at}};
}

void from_json(const ojson& j, Story& v) {
    check_schema_version(j);
    v.id = field_as<std::string>(j, "id");
    v.scenario_id = field_as<std::string>(j, "scenario_id");
    v.text = field_as<std::string>(j, "text");
    v.model_id = field_as<std::string>(j, "model_id");
    from_json(require_field(j, "params"), v.params);
    v.created_at = field_as<std::string>(j, "created_at");
}

void to_json(ojson& j, const Explanation& v) {
    j = ojson{{"schema_version", kSchemaVersion},
              {"id", v.id},
              {"story_id", v.story_id},
              {"style", to_string(v.style)},
              {"text", v.text},
              {"model_id", v.model_id},
              {"params", v.params}};
}

void from_json(const ojson& j, Explanation& v) {
    check_schema_version(j);
    v.id = field_as<std::string>(j, "id");
    v.story_id = field_as<std::string>(j, "story_id");
    try {
        v.style = therapy_style_from_string(field_as<std::string>(j, "style"));
    } catch (const ValidationError&) {
        throw SchemaError("field has an invalid value", g_current_line, "style");
    }
    v.text = field_as<std::string>(j, "text");
    v.model_id = field_as<std::string>(j, "model_id");
    from_json(require_field(j, "params"), v.params);
}

void to_json(ojson& j, const CorpusRecord& v) {
    ojson exp;
    to_json(exp, v.explanation);
    exp.erase("schema_version");  // nested object, versioned by the record
    j = ojson{{"schema_version", kSchemaVersion},
              {"id", v.id},
              {"explanation", exp},
              {"response_text", v.response_text},
              {"response_model_id", v.response_model_id},
              {"response_params", v.response_params},
              {"filtered", v.filtered}};
}

void from_json(const ojson& j, CorpusRecord& v) {
    check_schema_version(j);
    v.id = field_as<std::string>(j, "id");
    ojson exp = require_field(j, "explanation");
    exp["schema_version"] = kSchemaVersion;
    from_json(exp, v.explanation);
    v.response_text = field_as<std::string>(j, "response_text");
    v.response_model_id = field_as<std::string>(j, "response_model_id");
    from_json(require_field(j, "response_params"), v.response_params);
    v.filtered = field_as<bool>(j, "filtered");
}

void to_json(ojson& j, const StageManifest& v) {
    j = ojson{{"schema_version", kSchemaVersion},
              {"stage_name", v.stage_name},
              {"input_count", v.input_count},
              {"output_count", v.output_count},
              {"removed_count", v.removed_count},
              {"config_hash", v.config_hash},
              {"started_at", v.started_at},
              {"finished_at", v.finished_at}};
}

void from_json(const ojson& j, StageManifest& v) {
    check_schema_version(j);
    v.stage_name = field_as<std::string>(j, "stage_name");
    v.input_count = field_as<std::uint64_t>(j, "input_count");
    v.output_count = field_as<std::uint64_t>(j, "output_count");
    v.removed_count = field_as<std::uint64_t>(j, "removed_count");
    v.config_hash = field_as<std::string>(j, "config_hash");
    v.started_at = field_as<std::string>(j, "started_at");
    v.finished_at = field_as<std::string>(j, "finished_at");
}

namespace {

template <typename Record>
void check_unique_ids(const std::vector<Record>&) {}

// Duplicate CorpusRecord ids are rejected at write time; dedup relies on
// distinct identities to name what it removed.
template <>
void check_unique_ids(const std::vector<CorpusRecord>& records) {
    std::unordered_set<std::string> seen;
    seen.reserve(records.size());
    for (const auto& r : records) {
        if (!seen.insert(r.id).second) {
            throw ValidationError("duplicate CorpusRecord id '" + r.id + "'");
        }
    }
}

}  // namespace

template <typename Record>
std::size_t write_records(const std::vector<Record>& records, const std::filesystem::path& path) {
    check_unique_ids(records);
    std::string buffer;
    for (const auto& record : records) {
        ojson j;
        to_json(j, record);
        try {
            buffer += j.dump();
        } catch (const ojson::exception& e) {
            throw ValidationError(std::string("record serialization failed: ") + e.what());
        }
        buffer += '\n';
    }
    atomic_write_file(path, buffer);
    return records.size();
}

template <typename Record>
std::vector<Record> read_records(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open '" + path.string() + "' for reading");
    }
    std::vector<Record> out;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        ojson j = ojson::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw ParseError("malformed JSON", line_number, line);
        }
        g_current_line = line_number;
        Record record;
        from_json(j, record);
        out.push_back(std::move(record));
    }
    g_current_line = 0;
    return out;
}

void atomic_write_file(const std::filesystem::path& path, const std::string& content) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw ConfigError("cannot open '" + tmp.string() + "' for writing");
        }
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            throw ConfigError("write failed for '" + tmp.string() + "'");
        }
    }
    fs::rename(tmp, path);
}

template std::size_t write_records(const std::vector<Scenario>&, const std::filesystem::path&);
template std::size_t write_records(const std::vector<Story>&, const std::filesystem::path&);
template std::size_t write_records(const std::vector<Explanation>&, const std::filesystem::path&);
template std::size_t write_records(const std::vector<CorpusRecord>&, const std::filesystem::path&);
template std::size_t write_records(const std::vector<StageManifest>&, const std::filesystem::path&);

template std::vector<Scenario> read_records(const std::filesystem::path&);
template std::vector<Story> read_records(const std::filesystem::path&);
template std::vector<Explanation> read_records(const std::filesystem::path&);
template std::vector<CorpusRecord> read_records(const std::filesystem::path&);
template std::vector<StageManifest> read_records(const std::filesystem::path&);

}  // namespace corpusforge
