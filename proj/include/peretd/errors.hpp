#pragma once

#include <stdexcept>
#include <string>

namespace peretd {

/// Raised when a Markov chain has no unique stationary distribution.
class ErgodicityError : public std::runtime_error {
public:
    explicit ErgodicityError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when the target policy takes an action the behavior policy never takes.
class CoverageError : public std::runtime_error {
public:
    explicit CoverageError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when a linear system is singular or too ill-conditioned to trust.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when a matrix expected to be positive definite is not.
class PositiveDefinitenessError : public std::runtime_error {
public:
    explicit PositiveDefinitenessError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when a feature or projection matrix does not have full column rank.
class RankDeficiencyError : public std::runtime_error {
public:
    explicit RankDeficiencyError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace peretd
