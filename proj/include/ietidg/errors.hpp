#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ietidg {

/// Base class of all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid argument or inconsistent sizes.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Evaluation point outside the admissible parameter range.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Degenerate patch parameterization or invalid multi-patch layout.
class GeometryError : public Error {
public:
    GeometryError(const std::string& what, double u = -1.0, double v = -1.0)
        : Error(what), u_(u), v_(v) {}

    double u() const noexcept { return u_; }
    double v() const noexcept { return v_; }

private:
    double u_;
    double v_;
};

class AssemblyError : public Error {
public:
    using Error::Error;
};

/// A matrix factorization failed (non-SPD pivot, singular matrix).
class FactorizationError : public Error {
public:
    using Error::Error;
};

/// Iterative solver breakdown or iteration limit. Carries the residual
/// history of the failed run.
class SolverError : public Error {
public:
    SolverError(const std::string& what, int iterations, std::vector<double> history)
        : Error(what), iterations_(iterations), history_(std::move(history)) {}

    int iterations() const noexcept { return iterations_; }
    const std::vector<double>& residual_history() const noexcept { return history_; }

private:
    int iterations_;
    std::vector<double> history_;
};

}  // namespace ietidg
