#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gspinn {

/// Caller violated a documented precondition.
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain of a closed form (t <= 0, x <= 0, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Corrupt or mismatched parameter file.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid experiment configuration; the message names the offending key.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A non-finite value appeared during evaluation.
///
/// `where` is the layer index for forward passes and the collocation point
/// index for loss evaluation; `term` names the loss term when known.
class NumericError : public std::runtime_error {
public:
    NumericError(const std::string& what, std::ptrdiff_t where, std::string term = {})
        : std::runtime_error(what), where_(where), term_(std::move(term)) {}

    std::ptrdiff_t where() const noexcept { return where_; }
    const std::string& term() const noexcept { return term_; }

private:
    std::ptrdiff_t where_;
    std::string term_;
};

} // namespace gspinn
