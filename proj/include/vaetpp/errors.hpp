#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vaetpp {

// Input violates a documented precondition (bad value, bad shape, bad config).
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A record in an input file could not be parsed.
class ParseError : public ValidationError {
public:
    ParseError(std::size_t line, const std::string& what)
        : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

} // namespace vaetpp
