#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace slate_forge {

/// Bad argument to an operation (out-of-range K, empty sets, ...).
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Inconsistent configuration: dimension mismatch, unavailable estimator.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file. `line()` is 1-based, 0 when not line oriented.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line, std::string path = {})
        : std::runtime_error((path.empty() ? "" : path + ": ") +
                             (line == 0 ? what : "line " + std::to_string(line) + ": " + what)),
          line_(line), detail_(what), path_(std::move(path)) {}
    std::size_t line() const noexcept { return line_; }
    const std::string& path() const noexcept { return path_; }
    /// The same error attributed to `path`.
    ParseError with_path(std::string path) const { return {detail_, line_, std::move(path)}; }

private:
    std::size_t line_;
    std::string detail_;
    std::string path_;
};

/// Parsed data violating a dataset invariant (duplicate pair, id out of range).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    IoError(const std::string& what, std::string path)
        : std::runtime_error(what + ": " + path), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

/// Noise distribution lacks the log-density gradient an estimator needs.
class UnsupportedDistribution : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Exhaustive computation refused because the instance is too large.
class InstanceTooLarge : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite gradient or parameter encountered during optimization.
class TrainingDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace slate_forge
