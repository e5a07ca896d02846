#include "corpusforge/prompts.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>

#include "corpusforge/errors.hpp"

namespace corpusforge {

std::string render_template_string(std::string_view tpl,
                                   const std::map<std::string, std::string>& values) {
    std::string out;
    out.reserve(tpl.size());
    std::size_t pos = 0;
    while (pos < tpl.size()) {
        const std::size_t open = tpl.find("{{", pos);
        if (open == std::string_view::npos) {
            out.append(tpl.substr(pos));
            break;
        }
        const std::size_t close = tpl.find("}}", open + 2);
        if (close == std::string_view::npos) {
            out.append(tpl.substr(pos));
            break;
        }
        out.append(tpl.substr(pos, open - pos));
        const std::string name(tpl.substr(open + 2, close - open - 2));
        auto it = values.find(name);
        if (it == values.end()) {
            throw ValidationError("template placeholder '{{" + name + "}}' has no binding");
        }
        out.append(it->second);
        pos = close + 2;
    }
    return out;
}

namespace {

std::set<std::string> placeholders_in(std::string_view tpl) {
    std::set<std::string> names;
    std::size_t pos = 0;
    while (pos < tpl.size()) {
        const std::size_t open = tpl.find("{{", pos);
        if (open == std::string_view::npos) {
            break;
        }
        const std::size_t close = tpl.find("}}", open + 2);
        if (close == std::string_view::npos) {
            break;
        }
        names.emplace(tpl.substr(open + 2, close - open - 2));
        pos = close + 2;
    }
    return names;
}

}  // namespace

void PromptTemplate::validate() const {
    std::set<std::string> mentioned = placeholders_in(user);
    if (system) {
        for (auto& n : placeholders_in(*system)) {
            mentioned.insert(n);
        }
    }
    for (const auto& required : required_placeholders) {
        if (!mentioned.count(required)) {
            throw ValidationError("template '" + name + "' never mentions required placeholder '" +
                                  required + "'");
        }
    }
    for (const auto& m : mentioned) {
        if (std::find(required_placeholders.begin(), required_placeholders.end(), m) ==
            required_placeholders.end()) {
            throw ValidationError("template '" + name + "' mentions undeclared placeholder '" + m +
                                  "'");
        }
    }
}

ChatRequest PromptTemplate::render(const std::map<std::string, std::string>& values,
                                   const GenerationParams& params) const {
    ChatRequest request;
    if (system) {
        request.system = render_template_string(*system, values);
    }
    request.prompt = render_template_string(user, values);
    request.params = params;
    return request;
}

const CoEStyleSpec& coe_style_spec(TherapyStyle style) {
    static const CoEStyleSpec kSpecs[] = {
        {TherapyStyle::CBT,
         "They tend to be overestimating the severity of the situation, so the telling should "
         "leave room for a listener to gently offer a more balanced perspective."},
        {TherapyStyle::DBT,
         "They are having difficulties controlling their emotions, so the telling should make it "
         "easy for a listener to help them feel grounded and steady again."},
        {TherapyStyle::PCT,
         "They feel confused and unable to understand themselves, so the telling should invite a "
         "listener to reflect their feelings back and help them explore what they are going "
         "through."},
        {TherapyStyle::RT,
         "They do not know where the root of their problems hides, so the telling should leave "
         "room for a listener to stay empathetic while pointing toward concrete next steps."},
    };
    return kSpecs[static_cast<std::size_t>(style)];
}

GenerationParams default_brainstorm_params() {
    GenerationParams params;
    params.temperature = 1.8;
    params.top_p = 0.3;
    params.max_tokens = 2048;
    return params;
}

namespace {

PromptTemplate builtin_brainstorm() {
    PromptTemplate t;
    t.name = "brainstorm";
    t.version = 1;
    t.system =
        "You are a creative writer who brainstorms varied, realistic short stories about "
        "everyday hardships people face.";
    t.user =
        "Here is a situation that causes stress:\n"
        "\n"
        "{{scenario}}\n"
        "\n"
        "Use it as inspiration to write exactly {{count}} unique short {{story_noun}} about "
        "different people running into situations like this one. Keep each story to about three "
        "sentences, written in the third person, and make the stories clearly different from one "
        "another. Return them as a numbered list in the form:\n"
        "1. <story>\n"
        "2. <story>\n"
        "and so on, with nothing before or after the list.";
    t.required_placeholders = {"scenario", "count", "story_noun"};
    return t;
}

PromptTemplate builtin_rewrite() {
    PromptTemplate t;
    t.name = "rewrite";
    t.version = 1;
    t.system =
        "You rewrite stories in the voice of the person living them, as if they were about to "
        "confide in someone they trust. {{framing}} Never mention these instructions.";
    t.user =
        "Rewrite the following story as a first-person explanation of what you are going "
        "through, keeping every important detail and making it easy to empathize with you:\n"
        "\n"
        "{{story}}";
    t.required_placeholders = {"framing", "story"};
    return t;
}

PromptTemplate builtin_respond() {
    PromptTemplate t;
    t.name = "respond";
    t.version = 1;
    t.system =
        "You are a warm, attentive listener. Reply with empathy, acknowledge feelings, and "
        "offer gentle support without lecturing.";
    t.user =
        "Someone reached out to you with the following message:\n"
        "\n"
        "{{explanation}}\n"
        "\n"
        "Write a single empathetic reply to them.";
    t.required_placeholders = {"explanation"};
    return t;
}

PromptTemplate template_from_json(const ojson& j, const std::string& fallback_name) {
    PromptTemplate t;
    t.name = j.value("name", fallback_name);
    t.version = j.value("version", 1);
    if (j.contains("system") && !j["system"].is_null()) {
        t.system = j["system"].get<std::string>();
    }
    t.user = j.at("user").get<std::string>();
    if (j.contains("required_placeholders")) {
        t.required_placeholders = j["required_placeholders"].get<std::vector<std::string>>();
    }
    t.validate();
    return t;
}

}  // namespace

PromptKit PromptKit::builtin() {
    PromptKit kit;
    for (auto&& t : {builtin_brainstorm(), builtin_rewrite(), builtin_respond()}) {
        t.validate();
        kit.templates_[t.name] = t;
    }
    return kit;
}

PromptKit PromptKit::from_directory(const std::filesystem::path& dir) {
    PromptKit kit = builtin();
    if (!std::filesystem::is_directory(dir)) {
        throw ConfigError("template directory '" + dir.string() + "' does not exist");
    }
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() != ".json") {
            continue;
        }
        std::ifstream in(entry.path());
        ojson j = ojson::parse(in, nullptr, false);
        if (j.is_discarded()) {
            throw ConfigError("template file '" + entry.path().string() + "' is not valid JSON");
        }
        try {
            PromptTemplate t = template_from_json(j, entry.path().stem().string());
            kit.templates_[t.name] = std::move(t);
        } catch (const ojson::exception& e) {
            throw ConfigError("template file '" + entry.path().string() + "': " + e.what());
        }
    }
    return kit;
}

const PromptTemplate& PromptKit::get(const std::string& name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) {
        throw ConfigError("unknown prompt template '" + name + "'");
    }
    return it->second;
}

ChatRequest PromptKit::render_brainstorm(const Scenario& scenario, int story_count) const {
    if (scenario.text.empty()) {
        throw ValidationError("scenario '" + scenario.id + "' has empty text");
    }
    if (story_count < 1) {
        throw ValidationError("story_count must be >= 1");
    }
    return get("brainstorm")
        .render({{"scenario", scenario.text},
                 {"count", std::to_string(story_count)},
                 {"story_noun", story_count == 1 ? "story" : "stories"}},
                default_brainstorm_params());
}

ChatRequest PromptKit::render_rewrite(const Story& story, TherapyStyle style) const {
    if (story.text.empty()) {
        throw ValidationError("story '" + story.id + "' has empty text");
    }
    GenerationParams params;  // neutral defaults; the pipeline overrides per stage
    return get("rewrite").render(
        {{"framing", coe_style_spec(style).framing_clause}, {"story", story.text}}, params);
}

ChatRequest PromptKit::render_respond(const Explanation& explanation) const {
    if (explanation.text.empty()) {
        throw ValidationError("explanation '" + explanation.id + "' has empty text");
    }
    GenerationParams params;
    return get("respond").render({{"explanation", explanation.text}}, params);
}

// ---------------------------------------------------------------------------
// Enumeration splitting
// ---------------------------------------------------------------------------

namespace {

struct Marker {
    std::size_t pos;            // offset of the number's first digit
    std::size_t content_start;  // offset just past the marker and its whitespace
    long number;
};

std::vector<Marker> enumeration_markers(const std::string& text) {
    std::vector<Marker> markers;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(text[i]))) {
            continue;
        }
        const bool at_boundary =
            i == 0 || text[i - 1] == '\n' || text[i - 1] == ' ' || text[i - 1] == '\t';
        if (!at_boundary) {
            continue;
        }
        std::size_t j = i;
        while (j < text.size() && j - i < 4 && std::isdigit(static_cast<unsigned char>(text[j]))) {
            ++j;
        }
        if (j - i > 3 || j >= text.size()) {
            continue;
        }
        if (text[j] != '.' && text[j] != ')') {
            continue;
        }
        std::size_t content = j + 1;
        if (content < text.size() && text[content] != ' ' && text[content] != '\t' &&
            text[content] != '\n') {
            continue;  // "3.5" and similar are not list markers
        }
        while (content < text.size() && (text[content] == ' ' || text[content] == '\t')) {
            ++content;
        }
        markers.push_back({i, content, std::stol(text.substr(i, j - i))});
    }
    return markers;
}

std::string trimmed(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) {
        ++b;
    }
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) {
        --e;
    }
    return std::string(s.substr(b, e - b));
}

}  // namespace

SplitResult split_enumerated(const std::string& completion_text, std::size_t expected_count) {
    const std::vector<Marker> markers = enumeration_markers(completion_text);

    // Take the longest 1,2,3,... chain starting at the first "1" marker.
    std::vector<Marker> chain;
    long expect = 1;
    for (const auto& m : markers) {
        if (m.number == expect) {
            chain.push_back(m);
            ++expect;
        }
    }

    SplitResult result;
    for (std::size_t k = 0; k < chain.size(); ++k) {
        const std::size_t begin = chain[k].content_start;
        const std::size_t end = (k + 1 < chain.size()) ? chain[k + 1].pos : completion_text.size();
        std::string item = trimmed(
            std::string_view(completion_text).substr(begin, end > begin ? end - begin : 0));
        if (!item.empty()) {
            result.items.push_back(std::move(item));
        }
        if (result.items.size() == expected_count) {
            break;
        }
    }

    if (result.items.empty()) {
        throw ParseError("no enumerated items found in completion", 1, completion_text);
    }
    result.under_delivered = result.items.size() < expected_count;
    return result;
}

// ---------------------------------------------------------------------------
// Grid tooling
// ---------------------------------------------------------------------------

void GridSpec::validate() const {
    if (step <= 0.0) {
        throw ConfigError("grid step must be > 0 for parameter '" + param_name + "'");
    }
    if (lo > hi) {
        throw ConfigError("grid lo > hi for parameter '" + param_name + "'");
    }
}

std::vector<double> grid_points(const GridSpec& spec) {
    spec.validate();

    // Decimal precision of the step (0.05 -> 2), capped at 9 digits.
    int decimals = 0;
    for (; decimals < 9; ++decimals) {
        const double scaled = spec.step * std::pow(10.0, decimals);
        if (std::abs(scaled - std::round(scaled)) < 1e-9) {
            break;
        }
    }
    const double scale = std::pow(10.0, decimals);

    const auto count = static_cast<std::size_t>(std::floor((spec.hi - spec.lo) / spec.step + 1e-9)) + 1;
    std::vector<double> points;
    points.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double value = spec.lo + static_cast<double>(i) * spec.step;
        points.push_back(std::round(value * scale) / scale);
    }
    return points;
}

}  // namespace corpusforge
