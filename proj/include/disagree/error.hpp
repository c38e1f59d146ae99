#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace disagree {

/// Malformed input record. `line()` is 1-based; 0 when not tied to a line.
class ParseError : public std::runtime_error {
public:
    ParseError(std::string source, std::size_t line, const std::string& what);

    const std::string& source() const noexcept { return source_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string source_;
    std::size_t line_;
};

/// Well-formed input that violates a domain rule. Carries every offender
/// found, not just the first.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(std::vector<std::string> problems);
    ValidationError(const std::string& context, std::vector<std::string> problems);

    const std::vector<std::string>& problems() const noexcept { return problems_; }

private:
    std::vector<std::string> problems_;
};

/// A pipeline declined to run on data that cannot support it
/// (inconsistent annotators, no metadata, ...).
class RefusalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical or orchestration failure inside a pipeline.
class PipelineError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace disagree
