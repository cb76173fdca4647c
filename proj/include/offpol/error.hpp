#pragma once

#include <stdexcept>
#include <string>

namespace offpol {

// Every error raised by the library carries a short machine-readable kind
// so the CLI can report it without parsing messages.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

class InvalidArgument : public Error {
public:
    explicit InvalidArgument(const std::string& what) : Error("invalid_argument", what) {}
};

class SizeError : public Error {
public:
    explicit SizeError(const std::string& what) : Error("size_error", what) {}
};

class ParseError : public Error {
public:
    explicit ParseError(const std::string& what) : Error("parse_error", what) {}
};

class NoFeasiblePolicy : public Error {
public:
    explicit NoFeasiblePolicy(const std::string& what) : Error("no_feasible_policy", what) {}
};

}  // namespace offpol
