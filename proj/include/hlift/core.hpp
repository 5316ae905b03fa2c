#pragma once

// Shared numeric types and the error hierarchy used across hlift.

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <string>

namespace hlift {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class ErrorKind {
    Configuration,
    Numerical,
    SingularGramian,
    AssumptionAViolation,
    SimplicityLoss,
    StepUnderflow,
    CorrectionFailed,
    BadAnchor,
    SingularStart,
    TrajectoryBlowup,
    InvalidXi,
};

[[nodiscard]] constexpr const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Configuration: return "ConfigurationError";
        case ErrorKind::Numerical: return "NumericalError";
        case ErrorKind::SingularGramian: return "SingularGramian";
        case ErrorKind::AssumptionAViolation: return "AssumptionAViolation";
        case ErrorKind::SimplicityLoss: return "SimplicityLoss";
        case ErrorKind::StepUnderflow: return "StepUnderflow";
        case ErrorKind::CorrectionFailed: return "CorrectionFailed";
        case ErrorKind::BadAnchor: return "BadAnchor";
        case ErrorKind::SingularStart: return "SingularStart";
        case ErrorKind::TrajectoryBlowup: return "TrajectoryBlowup";
        case ErrorKind::InvalidXi: return "InvalidXi";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Raised when a matrix-valued computation fails; carries the offending matrix.
class NumericalError : public Error {
public:
    NumericalError(const std::string& what, Matrix m)
        : Error(ErrorKind::Numerical, what), matrix(std::move(m)) {}
    Matrix matrix;
};

/// Raised when the Gramian is numerically singular; carries its eigenvalues.
class SingularGramianError : public Error {
public:
    SingularGramianError(const std::string& what, Vector eigenvalues)
        : Error(ErrorKind::SingularGramian, what), lambdas(std::move(eigenvalues)) {}
    Vector lambdas;
};

class TrajectoryBlowupError : public Error {
public:
    TrajectoryBlowupError(const std::string& what, double t)
        : Error(ErrorKind::TrajectoryBlowup, what), escape_time(t) {}
    double escape_time;
};

inline void require(bool cond, ErrorKind kind, const std::string& what) {
    if (!cond) throw Error(kind, what);
}

inline void require_dim(Eigen::Index got, Eigen::Index want, const char* what) {
    if (got != want) {
        throw Error(ErrorKind::Configuration, std::string(what) + ": dimension " + std::to_string(got) +
                                                  ", expected " + std::to_string(want));
    }
}

}  // namespace hlift
