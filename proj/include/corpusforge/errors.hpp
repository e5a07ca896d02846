#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace corpusforge {

// Bad user-supplied configuration (flags, config file, thresholds). Exit code 1.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Input data violates a documented precondition or invariant. Exit code 1.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A line of an input file could not be parsed. Carries the 1-based line
// number and the offending raw text.
struct ParseError : std::runtime_error {
    ParseError(const std::string& message, std::size_t line_number, std::string raw_text = {})
        : std::runtime_error(message + " (line " + std::to_string(line_number) + ")"),
          line(line_number),
          raw(std::move(raw_text)) {}

    std::size_t line;
    std::string raw;
};

// A parsed record is missing a required field or has one of the wrong type.
struct SchemaError : std::runtime_error {
    SchemaError(const std::string& message, std::size_t line_number, std::string field_name)
        : std::runtime_error(message + " (field '" + field_name + "', line " +
                             std::to_string(line_number) + ")"),
          line(line_number),
          field(std::move(field_name)) {}

    std::size_t line;
    std::string field;
};

// Pipeline sequencing problems: missing predecessor stage, stale checkpoint.
struct PipelineError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace corpusforge
