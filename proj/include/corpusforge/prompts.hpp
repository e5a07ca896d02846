#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "corpusforge/gateway.hpp"
#include "corpusforge/records.hpp"

namespace corpusforge {

// Single-pass {{name}} substitution. Substituted values are emitted verbatim
// and never rescanned, so brace-laden input text cannot inject placeholders.
// A {{name}} in the template with no binding is a ValidationError.
std::string render_template_string(std::string_view tpl,
                                   const std::map<std::string, std::string>& values);

struct PromptTemplate {
    std::string name;
    int version = 1;
    std::optional<std::string> system;
    std::string user;
    std::vector<std::string> required_placeholders;

    // Every required placeholder appears somewhere in system+user, and the
    // template mentions no placeholder outside the required set.
    void validate() const;

    ChatRequest render(const std::map<std::string, std::string>& values,
                       const GenerationParams& params) const;
};

// One framing clause per therapy style, appended to the rewrite instruction.
struct CoEStyleSpec {
    TherapyStyle style;
    std::string framing_clause;
};

const CoEStyleSpec& coe_style_spec(TherapyStyle style);

// Sampling defaults for story brainstorming (high temperature, low top_p).
GenerationParams default_brainstorm_params();

// The three stage templates. Built-in versions are compiled in; a template
// directory with <name>.json files overrides them per template.
class PromptKit {
public:
    static PromptKit builtin();
    static PromptKit from_directory(const std::filesystem::path& dir);

    ChatRequest render_brainstorm(const Scenario& scenario, int story_count) const;
    ChatRequest render_rewrite(const Story& story, TherapyStyle style) const;
    ChatRequest render_respond(const Explanation& explanation) const;

    const PromptTemplate& get(const std::string& name) const;

private:
    std::map<std::string, PromptTemplate> templates_;
};

struct SplitResult {
    std::vector<std::string> items;
    bool under_delivered = false;
};

// Parses "1. ...\n2. ..." style enumerations (also "1) ..." and inline
// numbering). Returns up to expected_count non-empty items; fewer sets the
// under-delivery flag. No parseable items at all is a ParseError carrying the
// raw completion text.
SplitResult split_enumerated(const std::string& completion_text, std::size_t expected_count);

struct GridSpec {
    std::string param_name;
    double lo = 0.0;
    double hi = 0.0;
    double step = 0.05;

    void validate() const;  // lo <= hi, step > 0
};

// [lo, lo+step, ...], including hi when hi-lo is an integer multiple of step
// (within 1e-9). Values are rounded to the step's decimal precision.
std::vector<double> grid_points(const GridSpec& spec);

}  // namespace corpusforge
