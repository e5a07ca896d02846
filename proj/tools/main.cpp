#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "corpusforge/curation.hpp"
#include "corpusforge/dedup.hpp"
#include "corpusforge/errors.hpp"
#include "corpusforge/eval.hpp"
#include "corpusforge/pipeline.hpp"
#include "corpusforge/prompts.hpp"
#include "corpusforge/records.hpp"

namespace {

using namespace corpusforge;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;      // validation / config / usage problems
constexpr int kExitTransport = 2;  // an external service could not be reached

// Raised when a subcommand fails because of an unreachable external service.
struct TransportFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Diagnostics {
    bool json = false;
    int verbosity = 0;

    void info(const std::string& message) const {
        if (verbosity < 1) {
            return;
        }
        emit("info", message);
    }
    void error(const std::string& message) const { emit("error", message); }

    void emit(const char* level, const std::string& message) const {
        if (json) {
            std::cerr << ojson{{"level", level}, {"message", message}}.dump() << "\n";
        } else {
            std::cerr << level << ": " << message << "\n";
        }
    }
};

std::vector<ojson> read_jsonl_rows(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open '" + path + "' for reading");
    }
    std::vector<ojson> rows;
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
        rows.push_back(std::move(j));
    }
    return rows;
}

std::string field_text(const ojson& row, const std::string& field, std::size_t line) {
    auto it = row.find(field);
    if (it == row.end() || !it->is_string()) {
        throw SchemaError("row is missing a string field", line, field);
    }
    return it->get<std::string>();
}

void write_output(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        std::cout << content;
        return;
    }
    atomic_write_file(path, content);
}

ojson dedup_report_json(const DedupReport& report) {
    return ojson{{"schema_version", kSchemaVersion},
                 {"spans_found", report.spans_found},
                 {"documents_dropped", report.documents_dropped},
                 {"characters_removed", report.characters_removed},
                 {"documents_in", report.documents_in},
                 {"documents_out", report.documents_out}};
}

// --------------------------------------------------------------------------
// Subcommand bodies
// --------------------------------------------------------------------------

int cmd_run(const std::string& config_path, bool resume, const std::string& stage, bool mock,
            std::optional<std::uint64_t> seed, const Diagnostics& diag) {
    PipelineConfig config = PipelineConfig::from_file(config_path);
    RunOptions options;
    options.mock = mock;
    options.seed = seed;
    options.resume = resume || !stage.empty();  // single-stage runs continue a checkpoint
    options.verbosity = diag.verbosity;

    PipelineRunner runner(std::move(config), options);
    if (!stage.empty()) {
        const StageManifest manifest = runner.run_stage(stage);
        diag.info("stage " + manifest.stage_name + ": in=" + std::to_string(manifest.input_count) +
                  " out=" + std::to_string(manifest.output_count) +
                  " removed=" + std::to_string(manifest.removed_count));
        return kExitOk;
    }
    const auto result = runner.run_all();
    for (const auto& manifest : result.manifests) {
        diag.info("stage " + manifest.stage_name + ": in=" + std::to_string(manifest.input_count) +
                  " out=" + std::to_string(manifest.output_count) +
                  " removed=" + std::to_string(manifest.removed_count));
    }
    diag.emit("info", "corpus written to " + result.corpus_path.string());
    return kExitOk;
}

int cmd_dedup(const std::string& input, const std::string& field, std::uint32_t threshold,
              const std::string& mode, const std::string& report_path, const std::string& output,
              const Diagnostics& diag) {
    DedupConfig config;
    config.dup_length_threshold = threshold;
    config.mode = mode == "drop" ? DedupMode::DropDocuments : DedupMode::ExciseSpans;
    config.validate();

    const std::vector<ojson> rows = read_jsonl_rows(input);
    std::vector<Document> docs;
    docs.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        docs.push_back({std::to_string(i), field_text(rows[i], field, i + 1)});
    }

    const ConcatCorpus corpus = ConcatCorpus::from_documents(docs);
    const DedupResult result = config.mode == DedupMode::DropDocuments
                                   ? dedup_drop_documents(corpus, config)
                                   : dedup_excise(corpus, config);

    std::string out;
    for (const auto& doc : result.documents) {
        const std::size_t row_index = std::stoul(doc.id);
        ojson row = rows[row_index];
        row[field] = doc.text;
        out += row.dump();
        out += '\n';
    }
    write_output(output, out);
    if (!report_path.empty()) {
        atomic_write_file(report_path, dedup_report_json(result.report).dump(2) + "\n");
    }
    diag.info("dedup: " + std::to_string(result.report.documents_in) + " docs in, " +
              std::to_string(result.report.documents_out) + " out, " +
              std::to_string(result.report.characters_removed) + " characters removed");
    return kExitOk;
}

int cmd_filter(const std::string& input, const std::string& lexicon_path,
               const std::string& output, const std::string& removed_path,
               const std::string& manifest_path, const Diagnostics& diag) {
    const auto records = read_records<CorpusRecord>(input);
    const Lexicon lexicon = lexicon_path.empty() ? Lexicon{} : Lexicon::load(lexicon_path);
    FilterOutcome outcome = filter_sensitive(records, lexicon);

    std::string out;
    for (const auto& r : outcome.kept) {
        ojson j;
        to_json(j, r);
        out += j.dump();
        out += '\n';
    }
    write_output(output, out);
    if (!removed_path.empty()) {
        write_records(outcome.removed, removed_path);
    }
    if (!manifest_path.empty()) {
        ojson j;
        to_json(j, outcome.manifest);
        atomic_write_file(manifest_path, j.dump(2) + "\n");
    }
    diag.info("filter: kept " + std::to_string(outcome.kept.size()) + ", removed " +
              std::to_string(outcome.removed.size()));
    return kExitOk;
}

int cmd_stats(const std::string& input, const std::string& field, const std::string& out_path,
              const std::string& csv_path, const Diagnostics& diag) {
    const std::vector<ojson> rows = read_jsonl_rows(input);
    std::vector<std::string> texts;
    texts.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        texts.push_back(field_text(rows[i], field, i + 1));
    }
    const TextStats stats = word_stats(texts);
    write_output(out_path, stats_to_json(stats).dump(2) + "\n");
    if (!csv_path.empty()) {
        atomic_write_file(csv_path, stats_histogram_csv(stats));
    }
    diag.info("stats over " + std::to_string(stats.count) + " texts");
    return kExitOk;
}

int cmd_eval(const std::string& responses_path, const std::string& scorer_url,
             const std::string& out_path, const std::string& response_field,
             const std::string& context_field, bool mock_scorer, std::uint64_t mock_seed,
             int timeout_s, const Diagnostics& diag) {
    const std::vector<ojson> rows = read_jsonl_rows(responses_path);
    std::vector<std::string> responses;
    std::vector<std::string> contexts;
    bool any_context = false;
    responses.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        responses.push_back(field_text(rows[i], response_field, i + 1));
        const auto it = rows[i].find(context_field);
        if (it != rows[i].end() && it->is_string()) {
            any_context = true;
            contexts.push_back(it->get<std::string>());
        } else {
            contexts.push_back("");
        }
    }
    if (!any_context) {
        contexts.clear();
    }
    if (responses.empty()) {
        throw ValidationError("no responses to score in '" + responses_path + "'");
    }

    std::vector<EmpathyScore> scores;
    if (mock_scorer) {
        scores = mock_scores(responses, mock_seed);
    } else {
        if (scorer_url.empty()) {
            throw ConfigError("--scorer-url is required unless --mock-scorer is set");
        }
        const auto outcomes = score_batch(scorer_url, responses, contexts, timeout_s);
        std::size_t failures = 0;
        bool transport = false;
        for (const auto& o : outcomes) {
            if (o.ok()) {
                scores.push_back(o.score);
            } else {
                ++failures;
                transport = transport || o.error == ErrorKind::Transport;
            }
        }
        if (scores.empty()) {
            const std::string message =
                "scoring failed for all " + std::to_string(failures) + " responses: " +
                outcomes.front().error_message;
            if (transport) {
                throw TransportFailure(message);
            }
            throw ValidationError(message);
        }
        if (failures > 0) {
            diag.error(std::to_string(failures) + " responses failed to score and were skipped");
        }
    }

    const EmpathyAggregate agg = aggregate(scores);
    write_output(out_path, aggregate_to_json(agg).dump(2) + "\n");
    diag.info("eval: n=" + std::to_string(agg.n) + " er_mean=" + std::to_string(agg.er.mean) +
              " ip_mean=" + std::to_string(agg.ip.mean) + " ex_mean=" + std::to_string(agg.ex.mean));
    return kExitOk;
}

int cmd_compare(const std::string& base_path, const std::string& candidate_path,
                const std::string& out_path, const Diagnostics& diag) {
    const auto load = [](const std::string& path) {
        std::ifstream in(path);
        if (!in) {
            throw ConfigError("cannot open report '" + path + "'");
        }
        ojson j = ojson::parse(in, nullptr, false);
        if (j.is_discarded()) {
            throw ConfigError("report '" + path + "' is not valid JSON");
        }
        return aggregate_from_json(j);
    };
    const ComparisonReport report = compare(load(base_path), load(candidate_path));
    write_output(out_path, comparison_to_json(report).dump(2) + "\n");

    const auto describe = [&](const char* axis, const AxisChange& change) {
        char line[128];
        if (!change.mean_defined) {
            std::snprintf(line, sizeof(line), "%s: mean undefined (base is zero)", axis);
        } else if (!change.std_defined) {
            std::snprintf(line, sizeof(line), "%s: mean %+.2f%%, std undefined", axis,
                          change.mean_rel * 100.0);
        } else {
            std::snprintf(line, sizeof(line), "%s: mean %+.2f%%, std %+.2f%%", axis,
                          change.mean_rel * 100.0, change.std_rel * 100.0);
        }
        diag.info(line);
    };
    describe("er", report.er);
    describe("ip", report.ip);
    describe("ex", report.ex);
    return kExitOk;
}

int cmd_grid(const std::vector<std::string>& param_specs, const std::string& out_path,
             const Diagnostics& diag) {
    if (param_specs.empty()) {
        throw ConfigError("at least one --param name=lo:hi:step is required");
    }
    std::vector<GridSpec> specs;
    std::vector<std::vector<double>> values;
    for (const auto& raw : param_specs) {
        const auto eq = raw.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("bad --param '" + raw + "' (expected name=lo:hi:step)");
        }
        GridSpec spec;
        spec.param_name = raw.substr(0, eq);
        const std::string rest = raw.substr(eq + 1);
        const auto c1 = rest.find(':');
        const auto c2 = rest.find(':', c1 == std::string::npos ? c1 : c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos) {
            throw ConfigError("bad --param '" + raw + "' (expected name=lo:hi:step)");
        }
        try {
            spec.lo = std::stod(rest.substr(0, c1));
            spec.hi = std::stod(rest.substr(c1 + 1, c2 - c1 - 1));
            spec.step = std::stod(rest.substr(c2 + 1));
        } catch (const std::exception&) {
            throw ConfigError("bad --param '" + raw + "' (numbers expected)");
        }
        values.push_back(grid_points(spec));
        specs.push_back(std::move(spec));
    }

    // Cartesian product in declaration order, last parameter fastest.
    std::string out;
    std::vector<std::size_t> index(specs.size(), 0);
    while (true) {
        ojson row;
        for (std::size_t i = 0; i < specs.size(); ++i) {
            row[specs[i].param_name] = values[i][index[i]];
        }
        out += row.dump();
        out += '\n';
        std::size_t i = specs.size();
        while (i > 0) {
            --i;
            if (++index[i] < values[i].size()) {
                break;
            }
            index[i] = 0;
            if (i == 0) {
                write_output(out_path, out);
                diag.info("grid: " + std::to_string(specs.size()) + " parameters");
                return kExitOk;
            }
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"corpusforge: LLM corpus synthesis with exact-substring deduplication"};
    app.require_subcommand(1);

    Diagnostics diag;
    app.add_flag("--json", diag.json, "Emit diagnostics as JSON lines on stderr");
    app.add_flag_function(
        "-v,--verbose", [&diag](std::int64_t n) { diag.verbosity = static_cast<int>(n); },
        "Increase diagnostic verbosity");

    // run
    auto* run = app.add_subcommand("run", "Run the generation/dedup pipeline");
    std::string run_config;
    std::string run_stage;
    bool run_resume = false;
    bool run_mock = false;
    std::optional<std::uint64_t> run_seed;
    run->add_option("--config", run_config, "Pipeline config file (JSON)")->required();
    run->add_flag("--resume", run_resume, "Continue from an existing checkpoint");
    run->add_option("--stage", run_stage, "Run a single named stage");
    run->add_flag("--mock", run_mock, "Use the deterministic mock backend");
    run->add_option("--seed", run_seed, "Override the config seed");

    // dedup
    auto* dedup = app.add_subcommand("dedup", "Exact-substring dedup over a JSONL field");
    std::string dd_input, dd_field = "text", dd_mode = "excise", dd_report, dd_output = "-";
    std::uint32_t dd_threshold = 75;
    dedup->add_option("--input", dd_input, "Input JSONL file")->required();
    dedup->add_option("--field", dd_field, "Field holding the document text");
    dedup->add_option("--threshold", dd_threshold, "Duplicate length threshold in bytes");
    dedup->add_option("--mode", dd_mode, "excise | drop")
        ->check(CLI::IsMember({"excise", "drop"}));
    dedup->add_option("--report", dd_report, "Write the dedup report JSON here");
    dedup->add_option("--output", dd_output, "Deduplicated JSONL ('-' for stdout)");

    // filter
    auto* filter = app.add_subcommand("filter", "Remove corpus records matching a lexicon");
    std::string fl_input, fl_lexicon, fl_output = "-", fl_removed, fl_manifest;
    filter->add_option("--input", fl_input, "Corpus records JSONL")->required();
    filter->add_option("--lexicon", fl_lexicon, "Lexicon file (one term per line)");
    filter->add_option("--output", fl_output, "Kept records ('-' for stdout)");
    filter->add_option("--removed", fl_removed, "Write removed records here");
    filter->add_option("--manifest", fl_manifest, "Write the filter manifest here");

    // stats
    auto* stats = app.add_subcommand("stats", "Word-count statistics over a JSONL field");
    std::string st_input, st_field = "text", st_out = "-", st_csv;
    stats->add_option("--input", st_input, "Input JSONL file")->required();
    stats->add_option("--field", st_field, "Field holding the text");
    stats->add_option("--out", st_out, "Stats JSON ('-' for stdout)");
    stats->add_option("--csv", st_csv, "Also write the histogram as CSV");

    // eval
    auto* eval = app.add_subcommand("eval", "Score responses on the ER/IP/EX empathy axes");
    std::string ev_responses, ev_url, ev_out = "-", ev_rfield = "response", ev_cfield = "context";
    bool ev_mock = false;
    std::uint64_t ev_mock_seed = 0;
    int ev_timeout = 60;
    eval->add_option("--responses", ev_responses, "Responses JSONL")->required();
    eval->add_option("--scorer-url", ev_url, "Scorer service URL");
    eval->add_option("--out", ev_out, "Aggregate report JSON ('-' for stdout)");
    eval->add_option("--response-field", ev_rfield, "Field holding the response text");
    eval->add_option("--context-field", ev_cfield, "Field holding the optional context");
    eval->add_flag("--mock-scorer", ev_mock, "Use the deterministic in-repo scorer");
    eval->add_option("--mock-seed", ev_mock_seed, "Seed for the mock scorer");
    eval->add_option("--timeout", ev_timeout, "Scorer request timeout in seconds");

    // compare
    auto* cmp = app.add_subcommand("compare", "Compare two eval reports");
    std::string cp_base, cp_candidate, cp_out = "-";
    cmp->add_option("--base", cp_base, "Base report JSON")->required();
    cmp->add_option("--candidate", cp_candidate, "Candidate report JSON")->required();
    cmp->add_option("--out", cp_out, "Comparison JSON ('-' for stdout)");

    // grid
    auto* grid = app.add_subcommand("grid", "Emit a JSONL hyperparameter grid");
    std::vector<std::string> gr_params;
    std::string gr_out = "-";
    grid->add_option("--param", gr_params, "Parameter spec name=lo:hi:step (repeatable)");
    grid->add_option("--out", gr_out, "Output JSONL ('-' for stdout)");

    // Let global flags (--json, -v) appear after the subcommand too.
    for (auto* sub : app.get_subcommands(nullptr)) {
        sub->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (run->parsed()) {
            return cmd_run(run_config, run_resume, run_stage, run_mock, run_seed, diag);
        }
        if (dedup->parsed()) {
            return cmd_dedup(dd_input, dd_field, dd_threshold, dd_mode, dd_report, dd_output, diag);
        }
        if (filter->parsed()) {
            return cmd_filter(fl_input, fl_lexicon, fl_output, fl_removed, fl_manifest, diag);
        }
        if (stats->parsed()) {
            return cmd_stats(st_input, st_field, st_out, st_csv, diag);
        }
        if (eval->parsed()) {
            return cmd_eval(ev_responses, ev_url, ev_out, ev_rfield, ev_cfield, ev_mock,
                            ev_mock_seed, ev_timeout, diag);
        }
        if (cmp->parsed()) {
            return cmd_compare(cp_base, cp_candidate, cp_out, diag);
        }
        if (grid->parsed()) {
            return cmd_grid(gr_params, gr_out, diag);
        }
    } catch (const TransportFailure& e) {
        diag.error(e.what());
        return kExitTransport;
    } catch (const std::exception& e) {
        diag.error(e.what());
        return kExitUsage;
    }
    return kExitUsage;
}
