#pragma once

#include <stdexcept>
#include <string>

namespace m3 {

/// Base of every error the library throws. `token()` is a short
/// machine-readable identifier surfaced by the HTTP service.
class Error : public std::runtime_error {
public:
    Error(std::string token, const std::string& what)
        : std::runtime_error(what), token_(std::move(token)) {}

    const std::string& token() const noexcept { return token_; }

private:
    std::string token_;
};

/// Rejected configuration: bad board dimensions, malformed preset, ...
struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error("config_error", what) {}
};

/// Malformed caller input: out-of-bounds or non-adjacent coordinates.
struct InputError : Error {
    explicit InputError(const std::string& what) : Error("input_error", what) {}
};

/// Operation not permitted in the current state (game over, session closed).
struct StateError : Error {
    explicit StateError(const std::string& what) : Error("state_error", what) {}
};

/// Argument outside the mathematical domain of a function.
struct DomainError : Error {
    explicit DomainError(const std::string& what) : Error("domain_error", what) {}
};

/// A precondition the caller is responsible for was violated.
struct ContractViolation : Error {
    explicit ContractViolation(const std::string& what) : Error("contract_violation", what) {}
};

struct NotFound : Error {
    explicit NotFound(const std::string& what) : Error("not_found", what) {}
};

/// An internal bound was exceeded. Never expected in practice.
struct EngineFault : Error {
    explicit EngineFault(const std::string& what) : Error("internal_fault", what) {}
};

/// Failure while executing an experiment or writing its artifacts.
struct RunError : Error {
    explicit RunError(const std::string& what) : Error("run_error", what) {}
};

}  // namespace m3
