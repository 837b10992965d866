#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pairstop {

/// A caller-supplied value violates a precondition. `field()` names the
/// offending parameter so front ends can report it verbatim.
class InvalidParameter : public std::invalid_argument {
public:
    InvalidParameter(std::string field, const std::string& what)
        : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Base class for failures of a numerical procedure on valid input.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The Galerkin system could not be solved. Carries the mesh width and the
/// a-priori uniqueness threshold h0 for diagnostics.
class SingularSystemError : public NumericalError {
public:
    SingularSystemError(const std::string& what, double h, double h0)
        : NumericalError(what), h_(h), h0_(h0) {}

    double h() const noexcept { return h_; }
    double h0() const noexcept { return h0_; }

private:
    double h_;
    double h0_;
};

/// Root bracketing found no sign change; `samples()` holds every (b, F_N(b))
/// pair that was evaluated.
class BracketError : public NumericalError {
public:
    BracketError(const std::string& what, std::vector<std::pair<double, double>> samples)
        : NumericalError(what), samples_(std::move(samples)) {}

    const std::vector<std::pair<double, double>>& samples() const noexcept { return samples_; }

private:
    std::vector<std::pair<double, double>> samples_;
};

/// ODE integration did not reach the requested tolerance.
class IntegrationError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace pairstop
