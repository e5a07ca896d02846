#include "corpusforge/eval.hpp"

#include <cmath>

#include "corpusforge/errors.hpp"
#include "corpusforge/ids.hpp"

namespace corpusforge {

namespace {

void check_axis(double value, const char* axis) {
    if (!(value >= 0.0) || value > 2.0) {
        throw ValidationError(std::string("empathy score axis '") + axis +
                              "' out of range [0,2]: " + std::to_string(value));
    }
}

AxisAggregate axis_aggregate(const std::vector<EmpathyScore>& scores,
                             double EmpathyScore::*axis) {
    double sum = 0.0;
    for (const auto& s : scores) {
        sum += s.*axis;
    }
    const double mean = sum / static_cast<double>(scores.size());
    double var = 0.0;
    for (const auto& s : scores) {
        const double d = s.*axis - mean;
        var += d * d;
    }
    var /= static_cast<double>(scores.size());
    return {mean, std::sqrt(var)};
}

AxisChange axis_change(const AxisAggregate& base, const AxisAggregate& candidate) {
    AxisChange change;
    if (base.mean == 0.0) {
        change.mean_defined = false;
    } else {
        change.mean_rel = (candidate.mean - base.mean) / base.mean;
    }
    if (base.stddev == 0.0) {
        change.std_defined = false;
    } else {
        change.std_rel = (candidate.stddev - base.stddev) / base.stddev;
    }
    return change;
}

ojson axis_to_json(const AxisAggregate& a) {
    return ojson{{"mean", a.mean}, {"std", a.stddev}};
}

AxisAggregate axis_from_json(const ojson& j) {
    return {j.at("mean").get<double>(), j.at("std").get<double>()};
}

ojson change_to_json(const AxisChange& c) {
    return ojson{{"mean_rel", c.mean_defined ? ojson(c.mean_rel) : ojson(nullptr)},
                 {"std_rel", c.std_defined ? ojson(c.std_rel) : ojson(nullptr)}};
}

}  // namespace

void EmpathyScore::validate() const {
    check_axis(er, "er");
    check_axis(ip, "ip");
    check_axis(ex, "ex");
}

EmpathyAggregate aggregate(const std::vector<EmpathyScore>& scores) {
    if (scores.empty()) {
        throw ValidationError("cannot aggregate an empty score set");
    }
    for (const auto& s : scores) {
        s.validate();
    }
    EmpathyAggregate agg;
    agg.n = scores.size();
    agg.er = axis_aggregate(scores, &EmpathyScore::er);
    agg.ip = axis_aggregate(scores, &EmpathyScore::ip);
    agg.ex = axis_aggregate(scores, &EmpathyScore::ex);
    return agg;
}

ComparisonReport compare(const EmpathyAggregate& base, const EmpathyAggregate& candidate) {
    ComparisonReport report;
    report.base = base;
    report.candidate = candidate;
    report.er = axis_change(base.er, candidate.er);
    report.ip = axis_change(base.ip, candidate.ip);
    report.ex = axis_change(base.ex, candidate.ex);
    return report;
}

ojson aggregate_to_json(const EmpathyAggregate& agg) {
    return ojson{{"schema_version", kSchemaVersion},
                 {"n", agg.n},
                 {"axes", ojson{{"er", axis_to_json(agg.er)},
                                {"ip", axis_to_json(agg.ip)},
                                {"ex", axis_to_json(agg.ex)}}}};
}

EmpathyAggregate aggregate_from_json(const ojson& j) {
    EmpathyAggregate agg;
    agg.n = j.at("n").get<std::uint64_t>();
    const auto& axes = j.at("axes");
    agg.er = axis_from_json(axes.at("er"));
    agg.ip = axis_from_json(axes.at("ip"));
    agg.ex = axis_from_json(axes.at("ex"));
    return agg;
}

ojson comparison_to_json(const ComparisonReport& report) {
    return ojson{{"schema_version", kSchemaVersion},
                 {"base", aggregate_to_json(report.base)},
                 {"candidate", aggregate_to_json(report.candidate)},
                 {"change", ojson{{"er", change_to_json(report.er)},
                                  {"ip", change_to_json(report.ip)},
                                  {"ex", change_to_json(report.ex)}}}};
}

std::vector<ScoreOutcome> score_batch(const std::string& scorer_url,
                                      const std::vector<std::string>& responses,
                                      const std::vector<std::string>& contexts, int timeout_s) {
    if (!contexts.empty() && contexts.size() != responses.size()) {
        throw ValidationError("contexts must be empty or aligned with responses");
    }
    std::vector<ScoreOutcome> outcomes(responses.size());
    if (responses.empty()) {
        return outcomes;
    }

    ojson items = ojson::array();
    for (std::size_t i = 0; i < responses.size(); ++i) {
        ojson item{{"response", responses[i]}};
        if (!contexts.empty()) {
            item["context"] = contexts[i];
        }
        items.push_back(std::move(item));
    }
    const ojson payload{{"items", items}};

    const RawResponse raw = http_post_json(scorer_url, payload.dump(), timeout_s);
    if (!raw.transport_ok || raw.status != 200) {
        const std::string message = raw.transport_ok
                                        ? "scorer returned HTTP " + std::to_string(raw.status)
                                        : raw.error;
        for (auto& o : outcomes) {
            o.error = ErrorKind::Transport;
            o.error_message = message;
        }
        return outcomes;
    }

    ojson body = ojson::parse(raw.body, nullptr, false);
    if (body.is_discarded() || !body.contains("scores") || !body["scores"].is_array() ||
        body["scores"].size() != responses.size()) {
        for (auto& o : outcomes) {
            o.error = ErrorKind::Protocol;
            o.error_message = "scorer body malformed or score count mismatch";
        }
        return outcomes;
    }

    for (std::size_t i = 0; i < responses.size(); ++i) {
        const auto& entry = body["scores"][i];
        try {
            EmpathyScore score;
            score.er = entry.at("er").get<double>();
            score.ip = entry.at("ip").get<double>();
            score.ex = entry.at("ex").get<double>();
            score.validate();
            outcomes[i].score = score;
        } catch (const std::exception& e) {
            outcomes[i].error = ErrorKind::Protocol;
            outcomes[i].error_message = e.what();
        }
    }
    return outcomes;
}

std::vector<EmpathyScore> mock_scores(const std::vector<std::string>& responses,
                                      std::uint64_t seed) {
    std::vector<EmpathyScore> scores;
    scores.reserve(responses.size());
    for (const auto& response : responses) {
        const std::uint64_t h = fnv1a64(response, seed ^ 0x73636f7265ULL);
        // Scores land on a 1/128 grid so sums and means of identical scores
        // stay exact in double arithmetic.
        EmpathyScore s;
        s.er = static_cast<double>(h % 257) / 128.0;
        s.ip = static_cast<double>((h >> 8) % 257) / 128.0;
        s.ex = static_cast<double>((h >> 16) % 257) / 128.0;
        scores.push_back(s);
    }
    return scores;
}

}  // namespace corpusforge
