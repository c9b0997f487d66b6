#pragma once

#include <stdexcept>
#include <string>

namespace smor {

/// Error classes. Each maps to one CLI exit code (see tools/smor.cpp).
enum class ErrorKind {
    contract = 3,     // violated precondition / bad dimensions
    numerical = 4,    // factorization, convergence, stagnation
    io = 5,
    config = 2,
    missing_reference = 6,
    version = 7,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct ContractError : Error {
    explicit ContractError(const std::string& w) : Error(ErrorKind::contract, w) {}
};

struct NumericalError : Error {
    explicit NumericalError(const std::string& w) : Error(ErrorKind::numerical, w) {}
};

/// Cholesky / LU pivot failure (indefinite or singular input).
struct FactorizationError : NumericalError {
    explicit FactorizationError(const std::string& w) : NumericalError(w) {}
};

/// Nonlinear solve inside a time step did not converge.
struct StepFailure : NumericalError {
    StepFailure(std::size_t step, const std::string& w)
        : NumericalError("step " + std::to_string(step) + ": " + w), step_(step) {}
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

/// Greedy selected a snapshot that is already represented by the basis.
struct StagnationError : NumericalError {
    StagnationError(std::size_t snapshot, double error)
        : NumericalError("greedy stagnation at snapshot " + std::to_string(snapshot) +
                         " (projection error " + std::to_string(error) + ")"),
          snapshot_(snapshot) {}
    std::size_t snapshot() const noexcept { return snapshot_; }

private:
    std::size_t snapshot_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& w) : Error(ErrorKind::config, w) {}
};

struct IoError : Error {
    explicit IoError(const std::string& w) : Error(ErrorKind::io, w) {}
};

/// Package or reference file written by an incompatible format version.
struct VersionError : Error {
    explicit VersionError(const std::string& w) : Error(ErrorKind::version, w) {}
};

/// Error curves requested but no full-order reference trajectory available.
struct MissingReferenceError : Error {
    explicit MissingReferenceError(const std::string& w) : Error(ErrorKind::missing_reference, w) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ContractError(msg);
}

}  // namespace smor
