#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "corpusforge/curation.hpp"
#include "corpusforge/dedup.hpp"
#include "corpusforge/gateway.hpp"
#include "corpusforge/ids.hpp"
#include "corpusforge/prompts.hpp"
#include "corpusforge/records.hpp"

namespace corpusforge {

struct StageGenConfig {
    std::vector<std::string> pool;  // model_ids, resolved against endpoints
    GenerationParams params;
};

struct StageDedupConfig {
    std::uint32_t threshold = 75;
    DedupMode mode = DedupMode::ExciseSpans;
};

struct PipelineConfig {
    std::filesystem::path scenario_path;
    std::filesystem::path output_dir;
    int stories_per_scenario = 20;
    std::string brainstorm_mode = "enumerated";  // or "per_call": one request per story
    int max_in_flight = 4;
    std::uint64_t seed = 0;
    std::string backend = "http";  // "http" or "mock"
    std::filesystem::path lexicon_path;  // empty disables the filter stage's removals
    std::optional<std::filesystem::path> template_dir;
    std::vector<ModelEndpoint> endpoints;

    StageGenConfig brainstorm{{"llama-2-13b-chat"}, default_brainstorm_params()};
    StageGenConfig rewrite{{"llama-2-13b-chat"}, GenerationParams{1.0, 0.9, 1024, std::nullopt}};
    StageGenConfig respond{{"llama-2-13b-chat", "gemma-7b", "mistral-7b", "llama-3-8b"},
                           GenerationParams{1.0, 0.9, 1024, std::nullopt}};

    StageDedupConfig dedup_stories{75, DedupMode::DropDocuments};
    StageDedupConfig dedup_explanations{75, DedupMode::ExciseSpans};
    StageDedupConfig dedup_pairs{100, DedupMode::ExciseSpans};

    // Relative paths in the file are resolved against its parent directory.
    static PipelineConfig from_file(const std::filesystem::path& path);
    static PipelineConfig from_json(const ojson& j, const std::filesystem::path& base_dir);

    ojson to_json() const;
    std::string config_hash() const;  // stable hash of the effective config
    void validate() const;
};

// Balanced contiguous quartering: earlier bins take the remainder.
std::array<std::size_t, 4> style_bin_sizes(std::size_t n);

// Contiguous blocks in input order: CBT first, then DBT, PCT, RT.
std::vector<std::pair<Story, TherapyStyle>> assign_styles(std::vector<Story> stories);

struct Checkpoint {
    std::string config_hash;
    std::vector<std::string> completed;
    std::map<std::string, std::string> outputs;  // stage -> file name within output_dir

    bool has(const std::string& stage) const;
    static Checkpoint load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
};

struct RunOptions {
    bool mock = false;                  // force the mock backend
    std::optional<std::uint64_t> seed;  // overrides the config seed
    bool resume = false;                // continue from an existing checkpoint
    int verbosity = 0;
};

// Holds output_dir/.lock for the lifetime of a runner: one pipeline instance
// per output directory.
class DirectoryLock {
public:
    explicit DirectoryLock(const std::filesystem::path& dir);
    ~DirectoryLock();
    DirectoryLock(const DirectoryLock&) = delete;
    DirectoryLock& operator=(const DirectoryLock&) = delete;

private:
    std::filesystem::path path_;
};

class PipelineRunner {
public:
    PipelineRunner(PipelineConfig config, RunOptions options);

    // Runs one named stage. All prior stages must be checkpointed; a stage
    // that is already complete is a no-op returning its stored manifest.
    StageManifest run_stage(const std::string& stage_name);

    struct RunResult {
        std::vector<StageManifest> manifests;
        std::filesystem::path corpus_path;
    };

    // Runs the full brainstorm -> dedup -> rewrite -> dedup -> respond ->
    // dedup -> filter sequence, skipping checkpointed stages.
    RunResult run_all();

    const PipelineConfig& config() const { return config_; }
    std::filesystem::path stage_output_path(const std::string& stage_name) const;
    std::filesystem::path manifest_path(const std::string& stage_name) const;

private:
    StageManifest execute_stage(const std::string& stage_name);
    StageManifest stage_brainstorm();
    StageManifest stage_dedup_stories();
    StageManifest stage_rewrite();
    StageManifest stage_dedup_explanations();
    StageManifest stage_respond();
    StageManifest stage_dedup_pairs();
    StageManifest stage_filter();

    std::vector<ModelEndpoint> resolve_pool(const std::vector<std::string>& pool) const;
    UlidGenerator stage_generator(const std::string& stage_name) const;
    StageManifest finish_manifest(StageManifest manifest, const UlidGenerator& gen,
                                  const std::string& started_at);

    PipelineConfig config_;
    RunOptions options_;
    PromptKit prompts_;
    std::unique_ptr<ChatBackend> backend_;
    std::unique_ptr<LlmGateway> gateway_;
    std::unique_ptr<DirectoryLock> lock_;
    Checkpoint checkpoint_;
};

}  // namespace corpusforge
