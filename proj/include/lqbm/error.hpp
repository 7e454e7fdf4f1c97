// error.hpp: exception types and machine-readable failure reasons

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lqbm {

// Broad class of a failure; maps onto CLI exit codes.
enum class ErrorKind {
    Validation,   // bad input or configuration
    Numerical,    // solver / algorithm failure
    Io            // filesystem or parse problems
};

// Reason codes carried by grid error cells and numerical exceptions.
enum class Reason {
    None,
    InvalidInput,
    Pole,
    StiffnessFailure,
    StateCollapse,
    NewtonFailure,
    SingularJacobian,
    BranchLoss,
    FactorizationFailure,
    TruncationUntrusted,
    NonFinite,
    IndefiniteState,
    MissingCoefficients,
    NotConverged,
    Io
};

inline std::string_view reason_code(Reason r) {
    switch (r) {
        case Reason::None: return "ok";
        case Reason::InvalidInput: return "invalid-input";
        case Reason::Pole: return "pole";
        case Reason::StiffnessFailure: return "stiffness-failure";
        case Reason::StateCollapse: return "state-collapse";
        case Reason::NewtonFailure: return "newton-failure";
        case Reason::SingularJacobian: return "singular-jacobian";
        case Reason::BranchLoss: return "branch-loss";
        case Reason::FactorizationFailure: return "factorization-failure";
        case Reason::TruncationUntrusted: return "truncation-untrusted";
        case Reason::NonFinite: return "non-finite";
        case Reason::IndefiniteState: return "indefinite-state";
        case Reason::MissingCoefficients: return "missing-coefficients";
        case Reason::NotConverged: return "not-converged";
        case Reason::Io: return "io";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, Reason reason, const std::string& what)
        : std::runtime_error(what), kind_(kind), reason_(reason) {}

    ErrorKind kind() const noexcept { return kind_; }
    Reason reason() const noexcept { return reason_; }

private:
    ErrorKind kind_;
    Reason reason_;
};

inline Error validation_error(const std::string& what) {
    return Error(ErrorKind::Validation, Reason::InvalidInput, what);
}

inline Error numerical_error(Reason reason, const std::string& what) {
    return Error(ErrorKind::Numerical, reason, what);
}

inline Error io_error(const std::string& what) {
    return Error(ErrorKind::Io, Reason::Io, what);
}

} // namespace lqbm
