#pragma once

#include <stdexcept>
#include <string>

namespace giks {

// Base for every error raised by the library. Subtypes let the CLI map
// failures onto exit codes without string matching.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error { public: using Error::Error; };
class DomainError : public Error { public: using Error::Error; };
class ContractError : public Error { public: using Error::Error; };
class NumericalError : public Error { public: using Error::Error; };
class ConfigError : public Error { public: using Error::Error; };
class ParseError : public Error { public: using Error::Error; };
class IntegrityError : public Error { public: using Error::Error; };
class UnavailableMetricError : public Error { public: using Error::Error; };

class NoNeighborsError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

// Raised when training cannot continue (non-finite loss or gradient).
class TrainingError : public Error {
public:
    TrainingError(const std::string& what, std::string block = {})
        : Error(what), block_(std::move(block)) {}
    const std::string& block() const noexcept { return block_; }

private:
    std::string block_;
};

} // namespace giks
