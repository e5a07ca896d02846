#include "corpusforge/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <unordered_map>
#include <unordered_set>

#include "corpusforge/errors.hpp"

namespace corpusforge {

namespace fs = std::filesystem;

namespace {

std::string mode_to_string(DedupMode mode) {
    return mode == DedupMode::ExciseSpans ? "excise" : "drop";
}

DedupMode mode_from_string(const std::string& s) {
    if (s == "excise") return DedupMode::ExciseSpans;
    if (s == "drop") return DedupMode::DropDocuments;
    throw ConfigError("unknown dedup mode '" + s + "' (expected 'excise' or 'drop')");
}

GenerationParams params_from_json(const ojson& j, GenerationParams defaults) {
    GenerationParams p = defaults;
    if (j.contains("temperature")) p.temperature = j["temperature"].get<double>();
    if (j.contains("top_p")) p.top_p = j["top_p"].get<double>();
    if (j.contains("max_tokens")) p.max_tokens = j["max_tokens"].get<int>();
    if (j.contains("seed") && !j["seed"].is_null()) p.seed = j["seed"].get<std::int64_t>();
    return p;
}

void gen_stage_from_json(const ojson& j, StageGenConfig& stage) {
    if (j.contains("pool")) stage.pool = j["pool"].get<std::vector<std::string>>();
    if (j.contains("params")) stage.params = params_from_json(j["params"], stage.params);
}

void dedup_stage_from_json(const ojson& j, StageDedupConfig& stage) {
    if (j.contains("threshold")) stage.threshold = j["threshold"].get<std::uint32_t>();
    if (j.contains("mode")) stage.mode = mode_from_string(j["mode"].get<std::string>());
}

ojson gen_stage_to_json(const StageGenConfig& stage) {
    ojson params;
    to_json(params, stage.params);
    return ojson{{"pool", stage.pool}, {"params", params}};
}

ojson dedup_stage_to_json(const StageDedupConfig& stage) {
    return ojson{{"threshold", stage.threshold}, {"mode", mode_to_string(stage.mode)}};
}

fs::path resolve_against(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

}  // namespace

PipelineConfig PipelineConfig::from_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file '" + path.string() + "'");
    }
    ojson j = ojson::parse(in, nullptr, false);
    if (j.is_discarded()) {
        throw ConfigError("config file '" + path.string() + "' is not valid JSON");
    }
    return from_json(j, path.has_parent_path() ? path.parent_path() : fs::path("."));
}

PipelineConfig PipelineConfig::from_json(const ojson& j, const fs::path& base_dir) {
    PipelineConfig cfg;
    try {
        cfg.scenario_path = resolve_against(base_dir, j.at("scenario_path").get<std::string>());
        cfg.output_dir = resolve_against(base_dir, j.at("output_dir").get<std::string>());
        if (j.contains("stories_per_scenario")) {
            cfg.stories_per_scenario = j["stories_per_scenario"].get<int>();
        }
        if (j.contains("brainstorm_mode")) {
            cfg.brainstorm_mode = j["brainstorm_mode"].get<std::string>();
        }
        if (j.contains("max_in_flight")) cfg.max_in_flight = j["max_in_flight"].get<int>();
        if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("backend")) cfg.backend = j["backend"].get<std::string>();
        if (j.contains("lexicon_path") && !j["lexicon_path"].is_null()) {
            const auto lex = j["lexicon_path"].get<std::string>();
            if (!lex.empty()) {
                cfg.lexicon_path = resolve_against(base_dir, lex);
            }
        }
        if (j.contains("template_dir") && !j["template_dir"].is_null()) {
            cfg.template_dir = resolve_against(base_dir, j["template_dir"].get<std::string>());
        }
        if (j.contains("endpoints")) {
            cfg.endpoints.clear();
            for (const auto& e : j["endpoints"]) {
                ModelEndpoint endpoint;
                endpoint.model_id = e.at("model_id").get<std::string>();
                endpoint.base_url = e.at("base_url").get<std::string>();
                endpoint.auth_token_env = e.value("auth_token_env", std::string{});
                endpoint.request_timeout_s = e.value("request_timeout", 60);
                cfg.endpoints.push_back(std::move(endpoint));
            }
        }
        if (j.contains("stages")) {
            const auto& stages = j["stages"];
            if (stages.contains("brainstorm")) gen_stage_from_json(stages["brainstorm"], cfg.brainstorm);
            if (stages.contains("rewrite")) gen_stage_from_json(stages["rewrite"], cfg.rewrite);
            if (stages.contains("respond")) gen_stage_from_json(stages["respond"], cfg.respond);
            if (stages.contains("dedup_stories")) {
                dedup_stage_from_json(stages["dedup_stories"], cfg.dedup_stories);
            }
            if (stages.contains("dedup_explanations")) {
                dedup_stage_from_json(stages["dedup_explanations"], cfg.dedup_explanations);
            }
            if (stages.contains("dedup_pairs")) {
                dedup_stage_from_json(stages["dedup_pairs"], cfg.dedup_pairs);
            }
        }
    } catch (const ojson::exception& e) {
        throw ConfigError(std::string("bad pipeline config: ") + e.what());
    }
    return cfg;
}

ojson PipelineConfig::to_json() const {
    ojson j{{"scenario_path", scenario_path.string()},
            {"output_dir", output_dir.string()},
            {"stories_per_scenario", stories_per_scenario},
            {"brainstorm_mode", brainstorm_mode},
            {"max_in_flight", max_in_flight},
            {"seed", seed},
            {"backend", backend},
            {"lexicon_path", lexicon_path.string()},
            {"template_dir", template_dir ? ojson(template_dir->string()) : ojson(nullptr)}};
    ojson endpoints_json = ojson::array();
    for (const auto& e : endpoints) {
        endpoints_json.push_back(ojson{{"model_id", e.model_id},
                                       {"base_url", e.base_url},
                                       {"auth_token_env", e.auth_token_env},
                                       {"request_timeout", e.request_timeout_s}});
    }
    j["endpoints"] = endpoints_json;
    j["stages"] = ojson{{"brainstorm", gen_stage_to_json(brainstorm)},
                        {"rewrite", gen_stage_to_json(rewrite)},
                        {"respond", gen_stage_to_json(respond)},
                        {"dedup_stories", dedup_stage_to_json(dedup_stories)},
                        {"dedup_explanations", dedup_stage_to_json(dedup_explanations)},
                        {"dedup_pairs", dedup_stage_to_json(dedup_pairs)}};
    return j;
}

std::string PipelineConfig::config_hash() const {
    // Sorted-key dump so the hash does not depend on insertion order.
    const nlohmann::json canonical = nlohmann::json::parse(to_json().dump());
    const std::uint64_t h = fnv1a64(canonical.dump());
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void PipelineConfig::validate() const {
    if (scenario_path.empty()) throw ConfigError("scenario_path is required");
    if (output_dir.empty()) throw ConfigError("output_dir is required");
    if (stories_per_scenario < 1) throw ConfigError("stories_per_scenario must be >= 1");
    if (max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
    if (backend != "http" && backend != "mock") {
        throw ConfigError("backend must be 'http' or 'mock', got '" + backend + "'");
    }
    if (brainstorm_mode != "enumerated" && brainstorm_mode != "per_call") {
        throw ConfigError("brainstorm_mode must be 'enumerated' or 'per_call'");
    }
    for (const auto* stage : {&brainstorm, &rewrite, &respond}) {
        if (stage->pool.empty()) {
            throw ConfigError("every generation stage needs a non-empty model pool");
        }
        stage->params.validate();
    }
    for (const auto* stage : {&dedup_stories, &dedup_explanations, &dedup_pairs}) {
        if (stage->threshold < 2) {
            throw ConfigError("dedup thresholds must be >= 2");
        }
    }
}

std::array<std::size_t, 4> style_bin_sizes(std::size_t n) {
    std::array<std::size_t, 4> sizes{};
    for (std::size_t i = 0; i < 4; ++i) {
        sizes[i] = n / 4 + (i < n % 4 ? 1 : 0);
    }
    return sizes;
}

std::vector<std::pair<Story, TherapyStyle>> assign_styles(std::vector<Story> stories) {
    const auto sizes = style_bin_sizes(stories.size());
    std::vector<std::pair<Story, TherapyStyle>> out;
    out.reserve(stories.size());
    std::size_t index = 0;
    for (std::size_t bin = 0; bin < 4; ++bin) {
        for (std::size_t k = 0; k < sizes[bin]; ++k) {
            out.emplace_back(std::move(stories[index++]), kAllStyles[bin]);
        }
    }
    return out;
}

bool Checkpoint::has(const std::string& stage) const {
    return std::find(completed.begin(), completed.end(), stage) != completed.end();
}

Checkpoint Checkpoint::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw PipelineError("cannot open checkpoint '" + path.string() + "'");
    }
    ojson j = ojson::parse(in, nullptr, false);
    if (j.is_discarded()) {
        throw PipelineError("checkpoint '" + path.string() + "' is not valid JSON");
    }
    Checkpoint cp;
    cp.config_hash = j.at("config_hash").get<std::string>();
    cp.completed = j.at("completed").get<std::vector<std::string>>();
    if (j.contains("outputs")) {
        cp.outputs = j["outputs"].get<std::map<std::string, std::string>>();
    }
    return cp;
}

void Checkpoint::save(const fs::path& path) const {
    ojson j{{"schema_version", kSchemaVersion},
            {"config_hash", config_hash},
            {"completed", completed},
            {"outputs", outputs}};
    atomic_write_file(path, j.dump(2) + "\n");
}

DirectoryLock::DirectoryLock(const fs::path& dir) : path_(dir / ".lock") {
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
        if (errno == EEXIST) {
            throw PipelineError("output directory is locked by another run ('" + path_.string() +
                                "' exists); remove it if no run is active");
        }
        throw PipelineError("cannot create lock file '" + path_.string() +
                            "': " + std::strerror(errno));
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    ssize_t written = ::write(fd, pid.data(), pid.size());
    (void)written;
    ::close(fd);
}

DirectoryLock::~DirectoryLock() {
    std::error_code ec;
    fs::remove(path_, ec);
}

PipelineRunner::PipelineRunner(PipelineConfig config, RunOptions options)
    : config_(std::move(config)), options_(options) {
    if (options_.mock) {
        config_.backend = "mock";
    }
    if (options_.seed) {
        config_.seed = *options_.seed;
    }
    config_.validate();

    prompts_ = config_.template_dir ? PromptKit::from_directory(*config_.template_dir)
                                    : PromptKit::builtin();

    fs::create_directories(config_.output_dir);
    lock_ = std::make_unique<DirectoryLock>(config_.output_dir);

    if (config_.backend == "mock") {
        backend_ = std::make_unique<MockBackend>(MockBackendOptions{config_.seed, 0});
    } else {
        backend_ = std::make_unique<HttpBackend>();
    }
    gateway_ = std::make_unique<LlmGateway>(*backend_);

    const fs::path cp_path = config_.output_dir / "checkpoint.json";
    if (fs::exists(cp_path)) {
        if (!options_.resume) {
            throw PipelineError("output directory '" + config_.output_dir.string() +
                                "' already contains a checkpoint; pass --resume to continue");
        }
        checkpoint_ = Checkpoint::load(cp_path);
        if (checkpoint_.config_hash != config_.config_hash()) {
            throw PipelineError("stale checkpoint: config hash " + checkpoint_.config_hash +
                                " does not match current config " + config_.config_hash());
        }
    } else {
        checkpoint_.config_hash = config_.config_hash();
    }
}

fs::path PipelineRunner::stage_output_path(const std::string& stage_name) const {
    static const std::unordered_map<std::string, const char*> kFiles = {
        {"brainstorm", "stories_raw.jsonl"},
        {"dedup_stories", "stories.jsonl"},
        {"rewrite", "explanations_raw.jsonl"},
        {"dedup_explanations", "explanations.jsonl"},
        {"respond", "pairs_raw.jsonl"},
        {"dedup_pairs", "pairs.jsonl"},
        {"filter", "corpus.jsonl"},
    };
    return config_.output_dir / kFiles.at(stage_name);
}

fs::path PipelineRunner::manifest_path(const std::string& stage_name) const {
    return config_.output_dir / ("manifest_" + stage_name + ".json");
}

UlidGenerator PipelineRunner::stage_generator(const std::string& stage_name) const {
    if (config_.backend == "mock") {
        return UlidGenerator::deterministic(fnv1a64(stage_name, config_.seed));
    }
    return UlidGenerator::wall_clock();
}

StageManifest PipelineRunner::finish_manifest(StageManifest manifest, const UlidGenerator& gen,
                                              const std::string& started_at) {
    manifest.config_hash = config_.config_hash();
    manifest.started_at = started_at;
    manifest.finished_at = gen.now_iso8601();
    manifest.validate();
    return manifest;
}

StageManifest PipelineRunner::run_stage(const std::string& stage_name) {
    if (!is_known_stage(stage_name)) {
        throw ConfigError("unknown stage '" + stage_name + "'");
    }
    if (checkpoint_.has(stage_name)) {
        // Idempotent re-run: the stored manifest is the result.
        std::ifstream in(manifest_path(stage_name));
        ojson j = ojson::parse(in, nullptr, false);
        if (j.is_discarded()) {
            throw PipelineError("manifest for completed stage '" + stage_name + "' is unreadable");
        }
        StageManifest manifest;
        from_json(j, manifest);
        return manifest;
    }
    for (const char* prior : kStageNames) {
        if (stage_name == prior) {
            break;
        }
        if (!checkpoint_.has(prior)) {
            throw PipelineError("stage '" + stage_name + "' requires completed predecessor '" +
                                std::string(prior) + "'");
        }
    }

    if (options_.verbosity > 0) {
        std::cerr << "[pipeline] running stage " << stage_name << "\n";
    }
    StageManifest manifest = execute_stage(stage_name);
    ojson j;
    to_json(j, manifest);
    atomic_write_file(manifest_path(stage_name), j.dump(2) + "\n");

    checkpoint_.completed.push_back(stage_name);
    checkpoint_.outputs[stage_name] = stage_output_path(stage_name).filename().string();
    checkpoint_.save(config_.output_dir / "checkpoint.json");
    if (options_.verbosity > 0) {
        std::cerr << "[pipeline] stage " << stage_name << ": in=" << manifest.input_count
                  << " out=" << manifest.output_count << " removed=" << manifest.removed_count
                  << "\n";
    }
    return manifest;
}

StageManifest PipelineRunner::execute_stage(const std::string& stage_name) {
    if (stage_name == "brainstorm") return stage_brainstorm();
    if (stage_name == "dedup_stories") return stage_dedup_stories();
    if (stage_name == "rewrite") return stage_rewrite();
    if (stage_name == "dedup_explanations") return stage_dedup_explanations();
    if (stage_name == "respond") return stage_respond();
    if (stage_name == "dedup_pairs") return stage_dedup_pairs();
    if (stage_name == "filter") return stage_filter();
    throw ConfigError("unknown stage '" + stage_name + "'");
}

PipelineRunner::RunResult PipelineRunner::run_all() {
    RunResult result;
    for (const char* stage : kStageNames) {
        result.manifests.push_back(run_stage(stage));
    }
    result.corpus_path = stage_output_path("filter");
    return result;
}

std::vector<ModelEndpoint> PipelineRunner::resolve_pool(
    const std::vector<std::string>& pool) const {
    std::vector<ModelEndpoint> endpoints;
    endpoints.reserve(pool.size());
    for (const auto& model_id : pool) {
        auto it = std::find_if(config_.endpoints.begin(), config_.endpoints.end(),
                               [&](const ModelEndpoint& e) { return e.model_id == model_id; });
        if (it != config_.endpoints.end()) {
            endpoints.push_back(*it);
        } else if (config_.backend == "mock") {
            endpoints.push_back(ModelEndpoint{model_id, "mock://local", "", 60});
        } else {
            throw ConfigError("pool references model '" + model_id +
                              "' with no declared endpoint");
        }
    }
    return endpoints;
}

StageManifest PipelineRunner::stage_brainstorm() {
    UlidGenerator gen = stage_generator("brainstorm");
    const std::string started_at = gen.now_iso8601();

    const auto scenarios = read_records<Scenario>(config_.scenario_path);
    {
        std::unordered_set<std::string> ids;
        for (const auto& s : scenarios) {
            if (s.text.empty()) {
                throw ValidationError("scenario '" + s.id + "' has empty text");
            }
            if (!ids.insert(s.id).second) {
                throw ValidationError("duplicate scenario id '" + s.id + "'");
            }
        }
    }

    const bool per_call = config_.brainstorm_mode == "per_call";
    const int per_request = per_call ? 1 : config_.stories_per_scenario;
    const int requests_per_scenario = per_call ? config_.stories_per_scenario : 1;

    std::vector<ChatRequest> requests;
    requests.reserve(scenarios.size() * static_cast<std::size_t>(requests_per_scenario));
    for (const auto& scenario : scenarios) {
        for (int k = 0; k < requests_per_scenario; ++k) {
            ChatRequest request = prompts_.render_brainstorm(scenario, per_request);
            request.params = config_.brainstorm.params;
            if (per_call) {
                // Distinct seeds keep per-call completions distinct under mock.
                request.prompt += "\n(variation " + std::to_string(k + 1) + ")";
            }
            requests.push_back(std::move(request));
        }
    }

    const auto pool = resolve_pool(config_.brainstorm.pool);
    const auto outcomes = gateway_->generate_batch(pool, requests, config_.max_in_flight);

    std::vector<Story> stories;
    stories.reserve(requests.size() * static_cast<std::size_t>(per_request));
    for (std::size_t r = 0; r < outcomes.size(); ++r) {
        const auto& outcome = outcomes[r];
        const auto& scenario = scenarios[r / static_cast<std::size_t>(requests_per_scenario)];
        if (!outcome.ok()) {
            std::cerr << "[brainstorm] request for scenario '" << scenario.id
                      << "' failed: " << outcome.error_message << "\n";
            continue;
        }
        std::vector<std::string> texts;
        try {
            SplitResult split =
                split_enumerated(outcome.response.text, static_cast<std::size_t>(per_request));
            if (split.under_delivered) {
                std::cerr << "[brainstorm] scenario '" << scenario.id << "' under-delivered ("
                          << split.items.size() << "/" << per_request << " stories)\n";
            }
            texts = std::move(split.items);
        } catch (const ParseError&) {
            if (per_call) {
                texts.push_back(outcome.response.text);  // single story, plain completion
            } else {
                std::cerr << "[brainstorm] scenario '" << scenario.id
                          << "': completion had no parseable enumeration, skipped\n";
                continue;
            }
        }
        for (auto& text : texts) {
            Story story;
            story.id = gen.next_id();
            story.scenario_id = scenario.id;
            story.text = std::move(text);
            story.model_id = outcome.response.model_id;
            story.params = config_.brainstorm.params;
            story.created_at = gen.now_iso8601();
            stories.push_back(std::move(story));
        }
    }

    write_records(stories, stage_output_path("brainstorm"));
    StageManifest manifest;
    manifest.stage_name = "brainstorm";
    manifest.input_count = scenarios.size();
    manifest.output_count = stories.size();
    manifest.removed_count = 0;
    return finish_manifest(std::move(manifest), gen, started_at);
}

namespace {

// Runs the configured dedup mode over (id, text) documents and returns the
// surviving documents in input order.
DedupResult run_dedup(const std::vector<Document>& docs, const StageDedupConfig& stage) {
    const ConcatCorpus corpus = ConcatCorpus::from_documents(docs);
    DedupConfig config;
    config.dup_length_threshold = stage.threshold;
    config.mode = stage.mode;
    if (stage.mode == DedupMode::DropDocuments) {
        return dedup_drop_documents(corpus, config);
    }
    return dedup_excise(corpus, config);
}

}  // namespace

StageManifest PipelineRunner::stage_dedup_stories() {
    UlidGenerator gen = stage_generator("dedup_stories");
    const std::string started_at = gen.now_iso8601();

    const auto stories = read_records<Story>(stage_output_path("brainstorm"));
    std::vector<Document> docs;
    docs.reserve(stories.size());
    for (const auto& s : stories) {
        docs.push_back({s.id, s.text});
    }
    const DedupResult result = run_dedup(docs, config_.dedup_stories);

    std::unordered_map<std::string, const Document*> surviving;
    surviving.reserve(result.documents.size());
    for (const auto& doc : result.documents) {
        surviving.emplace(doc.id, &doc);
    }
    std::vector<Story> kept;
    kept.reserve(result.documents.size());
    for (const auto& story : stories) {
        auto it = surviving.find(story.id);
        if (it == surviving.end()) {
            continue;
        }
        Story s = story;
        s.text = it->second->text;  // unchanged in drop mode, trimmed in excise mode
        kept.push_back(std::move(s));
    }

    write_records(kept, stage_output_path("dedup_stories"));
    StageManifest manifest;
    manifest.stage_name = "dedup_stories";
    manifest.input_count = stories.size();
    manifest.output_count = kept.size();
    manifest.removed_count = stories.size() - kept.size();
    return finish_manifest(std::move(manifest), gen, started_at);
}

StageManifest PipelineRunner::stage_rewrite() {
    UlidGenerator gen = stage_generator("rewrite");
    const std::string started_at = gen.now_iso8601();

    auto stories = read_records<Story>(stage_output_path("dedup_stories"));
    const std::size_t story_count = stories.size();
    const auto styled = assign_styles(std::move(stories));

    std::vector<ChatRequest> requests;
    requests.reserve(styled.size());
    for (const auto& [story, style] : styled) {
        ChatRequest request = prompts_.render_rewrite(story, style);
        request.params = config_.rewrite.params;
        requests.push_back(std::move(request));
    }

    const auto pool = resolve_pool(config_.rewrite.pool);
    const auto outcomes = gateway_->generate_batch(pool, requests, config_.max_in_flight);

    std::vector<Explanation> explanations;
    explanations.reserve(styled.size());
    for (std::size_t i = 0; i < styled.size(); ++i) {
        const auto& [story, style] = styled[i];
        if (!outcomes[i].ok()) {
            std::cerr << "[rewrite] story '" << story.id
                      << "' failed: " << outcomes[i].error_message << "\n";
            continue;
        }
        Explanation e;
        e.id = gen.next_id();
        e.story_id = story.id;
        e.style = style;
        e.text = outcomes[i].response.text;
        e.model_id = outcomes[i].response.model_id;
        e.params = config_.rewrite.params;
        explanations.push_back(std::move(e));
    }

    write_records(explanations, stage_output_path("rewrite"));
    StageManifest manifest;
    manifest.stage_name = "rewrite";
    manifest.input_count = story_count;
    manifest.output_count = explanations.size();
    manifest.removed_count = 0;
    return finish_manifest(std::move(manifest), gen, started_at);
}

StageManifest PipelineRunner::stage_dedup_explanations() {
    UlidGenerator gen = stage_generator("dedup_explanations");
    const std::string started_at = gen.now_iso8601();

    const auto explanations = read_records<Explanation>(stage_output_path("rewrite"));
    std::vector<Document> docs;
    docs.reserve(explanations.size());
    for (const auto& e : explanations) {
        docs.push_back({e.id, e.text});
    }
    const DedupResult result = run_dedup(docs, config_.dedup_explanations);

    std::unordered_map<std::string, const Document*> surviving;
    surviving.reserve(result.documents.size());
    for (const auto& doc : result.documents) {
        surviving.emplace(doc.id, &doc);
    }
    std::vector<Explanation> kept;
    kept.reserve(result.documents.size());
    for (const auto& e : explanations) {
        auto it = surviving.find(e.id);
        if (it == surviving.end()) {
            continue;
        }
        Explanation out = e;
        out.text = it->second->text;
        kept.push_back(std::move(out));
    }

    write_records(kept, stage_output_path("dedup_explanations"));
    StageManifest manifest;
    manifest.stage_name = "dedup_explanations";
    manifest.input_count = explanations.size();
    manifest.output_count = kept.size();
    manifest.removed_count = explanations.size() - kept.size();
    return finish_manifest(std::move(manifest), gen, started_at);
}

StageManifest PipelineRunner::stage_respond() {
    UlidGenerator gen = stage_generator("respond");
    const std::string started_at = gen.now_iso8601();

    const auto explanations = read_records<Explanation>(stage_output_path("dedup_explanations"));

    std::vector<ChatRequest> requests;
    requests.reserve(explanations.size());
    for (const auto& e : explanations) {
        ChatRequest request = prompts_.render_respond(e);
        request.params = config_.respond.params;
        requests.push_back(std::move(request));
    }

    const auto pool = resolve_pool(config_.respond.pool);
    const auto outcomes = gateway_->generate_batch(pool, requests, config_.max_in_flight);

    std::vector<CorpusRecord> records;
    records.reserve(explanations.size());
    for (std::size_t i = 0; i < explanations.size(); ++i) {
        if (!outcomes[i].ok()) {
            std::cerr << "[respond] explanation '" << explanations[i].id
                      << "' failed: " << outcomes[i].error_message << "\n";
            continue;
        }
        CorpusRecord record;
        record.id = gen.next_id();
        record.explanation = explanations[i];
        record.response_text = outcomes[i].response.text;
        record.response_model_id = outcomes[i].response.model_id;
        record.response_params = config_.respond.params;
        record.filtered = false;
        records.push_back(std::move(record));
    }

    write_records(records, stage_output_path("respond"));
    StageManifest manifest;
    manifest.stage_name = "respond";
    manifest.input_count = explanations.size();
    manifest.output_count = records.size();
    manifest.removed_count = 0;
    return finish_manifest(std::move(manifest), gen, started_at);
}

StageManifest PipelineRunner::stage_dedup_pairs() {
    UlidGenerator gen = stage_generator("dedup_pairs");
    const std::string started_at = gen.now_iso8601();

    const auto records = read_records<CorpusRecord>(stage_output_path("respond"));
    std::vector<CorpusRecord> kept;
    kept.reserve(records.size());

    if (config_.dedup_pairs.mode == DedupMode::DropDocuments) {
        // Pair-level dedup: one document per record.
        std::vector<Document> docs;
        docs.reserve(records.size());
        for (const auto& r : records) {
            docs.push_back({r.id, r.explanation.text + "\n\n" + r.response_text});
        }
        const DedupResult result = run_dedup(docs, config_.dedup_pairs);
        std::unordered_set<std::string> surviving;
        surviving.reserve(result.documents.size());
        for (const auto& doc : result.documents) {
            surviving.insert(doc.id);
        }
        for (const auto& r : records) {
            if (surviving.count(r.id)) {
                kept.push_back(r);
            }
        }
    } else {
        // Character-level dedup: explanation and response are separate
        // documents so excised spans never straddle the two fields.
        std::vector<Document> docs;
        docs.reserve(records.size() * 2);
        for (const auto& r : records) {
            docs.push_back({r.id + "#explanation", r.explanation.text});
            docs.push_back({r.id + "#response", r.response_text});
        }
        const DedupResult result = run_dedup(docs, config_.dedup_pairs);
        std::unordered_map<std::string, const Document*> surviving;
        surviving.reserve(result.documents.size());
        for (const auto& doc : result.documents) {
            surviving.emplace(doc.id, &doc);
        }
        for (const auto& r : records) {
            auto exp = surviving.find(r.id + "#explanation");
            auto resp = surviving.find(r.id + "#response");
            if (exp == surviving.end() || resp == surviving.end()) {
                continue;  // a field was excised to nothing; drop the pair
            }
            CorpusRecord out = r;
            out.explanation.text = exp->second->text;
            out.response_text = resp->second->text;
            kept.push_back(std::move(out));
        }
    }

    write_records(kept, stage_output_path("dedup_pairs"));
    StageManifest manifest;
    manifest.stage_name = "dedup_pairs";
    manifest.input_count = records.size();
    manifest.output_count = kept.size();
    manifest.removed_count = records.size() - kept.size();
    return finish_manifest(std::move(manifest), gen, started_at);
}

StageManifest PipelineRunner::stage_filter() {
    UlidGenerator gen = stage_generator("filter");
    const std::string started_at = gen.now_iso8601();

    const auto records = read_records<CorpusRecord>(stage_output_path("dedup_pairs"));
    const Lexicon lexicon =
        config_.lexicon_path.empty() ? Lexicon{} : Lexicon::load(config_.lexicon_path);

    FilterOutcome outcome = filter_sensitive(records, lexicon);
    write_records(outcome.kept, stage_output_path("filter"));
    write_records(outcome.removed, config_.output_dir / "corpus_removed.jsonl");

    return finish_manifest(std::move(outcome.manifest), gen, started_at);
}

}  // namespace corpusforge
