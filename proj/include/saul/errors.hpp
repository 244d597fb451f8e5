#pragma once

#include <stdexcept>
#include <string>

namespace saul {

// Bad arguments at an API boundary (non-positive sizes, unknown ids, empty inputs).
struct InvalidArgument : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Feature vector outside the unit ball.
struct DomainViolation : std::domain_error {
    using std::domain_error::domain_error;
};

// 1 - x^T A^{-1} x fell below tolerance: the point was never added or was already removed.
struct SingularDowndate : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Gram matrix lost positive definiteness.
struct CorruptedState : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TruncationError : FormatError {
    using FormatError::FormatError;
};

// Rejection sampler could not satisfy the margin condition within its attempt budget.
struct GenerationInfeasible : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace saul
