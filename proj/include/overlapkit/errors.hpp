#pragma once

#include <stdexcept>
#include <string>

namespace overlapkit {

// Bad user input: ratios out of range, inconsistent dims, malformed files.
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Anything that goes wrong inside a computation with valid inputs.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SolverFailure : public NumericalError {
public:
    SolverFailure(const std::string& what, double residual)
        : NumericalError(what + " (last residual " + std::to_string(residual) + ")"),
          residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_;
};

class StiffnessError : public NumericalError {
public:
    StiffnessError(const std::string& what, double closest_gap, double time)
        : NumericalError(what + " (closest gap " + std::to_string(closest_gap) + " at t=" +
                         std::to_string(time) + ")"),
          gap_(closest_gap), time_(time) {}
    double closest_gap() const { return gap_; }
    double time() const { return time_; }

private:
    double gap_;
    double time_;
};

// Point too close to a spectral edge for the inversion formulas.
class EdgeProximityError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class DegenerateSampleError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace overlapkit
