#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "corpusforge/gateway.hpp"
#include "corpusforge/records.hpp"

namespace corpusforge {

// Per-response empathy scores on the three axes, each in [0, 2].
struct EmpathyScore {
    double er = 0.0;
    double ip = 0.0;
    double ex = 0.0;

    void validate() const;  // ValidationError naming the out-of-range axis

    bool operator==(const EmpathyScore&) const = default;
};

struct AxisAggregate {
    double mean = 0.0;
    double stddev = 0.0;  // population form
};

struct EmpathyAggregate {
    AxisAggregate er, ip, ex;
    std::uint64_t n = 0;
};

// Per-axis mean and population standard deviation. Empty input is a
// ValidationError.
EmpathyAggregate aggregate(const std::vector<EmpathyScore>& scores);

struct AxisChange {
    double mean_rel = 0.0;  // (candidate - base) / base
    double std_rel = 0.0;
    bool mean_defined = true;  // false when the base value is zero
    bool std_defined = true;
};

struct ComparisonReport {
    EmpathyAggregate base;
    EmpathyAggregate candidate;
    AxisChange er, ip, ex;
};

ComparisonReport compare(const EmpathyAggregate& base, const EmpathyAggregate& candidate);

ojson aggregate_to_json(const EmpathyAggregate& agg);
EmpathyAggregate aggregate_from_json(const ojson& j);
ojson comparison_to_json(const ComparisonReport& report);

// One scored response, or the reason it has no score.
struct ScoreOutcome {
    EmpathyScore score;
    ErrorKind error = ErrorKind::None;
    std::string error_message;

    bool ok() const { return error == ErrorKind::None; }
};

// Scores responses via the external scorer's HTTP contract: one POST per
// batch to scorer_url with {"items":[{"response":...,"context":...}]},
// answered by {"scores":[{"er":..,"ip":..,"ex":..}]}. contexts may be empty
// or aligned with responses. Transport failure fails every slot; a malformed
// or out-of-range score fails only its own slot.
std::vector<ScoreOutcome> score_batch(const std::string& scorer_url,
                                      const std::vector<std::string>& responses,
                                      const std::vector<std::string>& contexts,
                                      int timeout_s = 60);

// Deterministic in-repo stand-in for the scorer.
std::vector<EmpathyScore> mock_scores(const std::vector<std::string>& responses,
                                      std::uint64_t seed);

}  // namespace corpusforge
