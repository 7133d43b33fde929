#pragma once

#include <stdexcept>
#include <string>

namespace hanoi {

/// Base class for every error raised by the library. `kind()` gives a short
/// stable tag used by the CLI for diagnostics and exit-code mapping.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    [[nodiscard]] const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

// Input outside a mathematically admissible range.
struct DomainError : Error {
    explicit DomainError(const std::string& w) : Error("domain", w) {}
};

struct LevelError : Error {
    explicit LevelError(const std::string& w) : Error("level", w) {}
};

struct AddressError : Error {
    explicit AddressError(const std::string& w) : Error("address", w) {}
};

struct UnsupportedFamilyError : Error {
    explicit UnsupportedFamilyError(const std::string& w) : Error("unsupported_family", w) {}
};

struct AssemblyError : Error {
    explicit AssemblyError(const std::string& w) : Error("assembly", w) {}
};

struct EmptyPencilError : Error {
    explicit EmptyPencilError(const std::string& w) : Error("empty_pencil", w) {}
};

struct PencilError : Error {
    explicit PencilError(const std::string& w) : Error("pencil", w) {}
};

struct SizeError : Error {
    explicit SizeError(const std::string& w) : Error("size", w) {}
};

struct ThresholdAtEigenvalueError : Error {
    explicit ThresholdAtEigenvalueError(const std::string& w) : Error("threshold_at_eigenvalue", w) {}
};

struct ConvergenceError : Error {
    explicit ConvergenceError(const std::string& w) : Error("convergence", w) {}
};

struct ConnectivityError : Error {
    explicit ConnectivityError(const std::string& w) : Error("connectivity", w) {}
};

struct InsufficientDataError : Error {
    explicit InsufficientDataError(const std::string& w) : Error("insufficient_data", w) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& w) : Error("config", w) {}
};

}  // namespace hanoi
