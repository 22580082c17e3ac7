#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace algorec {

/// Machine-readable category of a failure. The service maps these onto its
/// JSON error codes; the CLI maps them onto exit statuses.
enum class ErrorKind {
    parse,
    validation,
    duplicate,
    not_found,
    conflict,
    exhausted,
    divergence,
    empty_input,
    domain,
    missing_metafeatures,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& message)
        : Error(ErrorKind::parse, "line " + std::to_string(line) + ": " + message), line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& message) : Error(ErrorKind::validation, message) {}
};

class DuplicateError : public Error {
public:
    explicit DuplicateError(const std::string& message) : Error(ErrorKind::duplicate, message) {}
};

class NotFoundError : public Error {
public:
    explicit NotFoundError(const std::string& message) : Error(ErrorKind::not_found, message) {}
};

class ConflictError : public Error {
public:
    explicit ConflictError(const std::string& message) : Error(ErrorKind::conflict, message) {}
};

/// Raised when every configuration of the space has already been recommended
/// for a dataset.
class ExhaustedError : public Error {
public:
    explicit ExhaustedError(const std::string& dataset_id)
        : Error(ErrorKind::exhausted, "configuration space exhausted for dataset '" + dataset_id + "'") {}
};

class DivergenceError : public Error {
public:
    explicit DivergenceError(double learning_rate)
        : Error(ErrorKind::divergence,
                "SGD diverged (non-finite parameter) with learning rate " + std::to_string(learning_rate)),
          learning_rate_(learning_rate) {}

    [[nodiscard]] double learning_rate() const noexcept { return learning_rate_; }

private:
    double learning_rate_;
};

class EmptyInputError : public Error {
public:
    explicit EmptyInputError(const std::string& message) : Error(ErrorKind::empty_input, message) {}
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& message) : Error(ErrorKind::domain, message) {}
};

class MissingMetafeaturesError : public Error {
public:
    explicit MissingMetafeaturesError(const std::string& dataset_id)
        : Error(ErrorKind::missing_metafeatures, "no metafeatures registered for dataset '" + dataset_id + "'") {}
};

}  // namespace algorec
