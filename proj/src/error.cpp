#include "disagree/error.hpp"

#include <fmt/format.h>

namespace disagree {

namespace {

std::string join_problems(const std::string& context, const std::vector<std::string>& problems) {
    std::string out = context.empty() ? std::string("validation failed") : context;
    out += fmt::format(" ({} problem{})", problems.size(), problems.size() == 1 ? "" : "s");
    for (const auto& p : problems) {
        out += "\n  - ";
        out += p;
    }
    return out;
}

}  // namespace

ParseError::ParseError(std::string source, std::size_t line, const std::string& what)
    : std::runtime_error(line > 0 ? fmt::format("{}:{}: {}", source, line, what)
                                  : fmt::format("{}: {}", source, what)),
      source_(std::move(source)),
      line_(line) {}

ValidationError::ValidationError(std::vector<std::string> problems)
    : ValidationError(std::string{}, std::move(problems)) {}

ValidationError::ValidationError(const std::string& context, std::vector<std::string> problems)
    : std::runtime_error(join_problems(context, problems)), problems_(std::move(problems)) {}

}  // namespace disagree
