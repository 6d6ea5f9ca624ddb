#ifndef BRIDGEGP_ERRORS_HPP
#define BRIDGEGP_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace bridgegp {

/// Bad caller input: dimension mismatches, invalid configuration values.
class ArgumentError : public std::invalid_argument {
public:
    explicit ArgumentError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Mathematical precondition violated (constraint outside its domain, ...).
class DomainError : public std::domain_error {
public:
    explicit DomainError(const std::string& msg) : std::domain_error(msg) {}
};

/// Numerical failure that survived the recovery ladder (factorization, divergence).
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed input file.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, long line = -1)
        : std::runtime_error(line >= 0 ? msg + " (line " + std::to_string(line) + ")" : msg),
          line_(line) {}
    long line() const { return line_; }

private:
    long line_;
};

/// Inconsistent run configuration (e.g. basis too large for the data).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace bridgegp

#endif
