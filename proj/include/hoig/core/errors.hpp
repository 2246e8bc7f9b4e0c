#pragma once

#include <stdexcept>
#include <string>

namespace hoig {

// Thrown when an operation needs a lower/higher tensor order than it was given.
struct OrderUnderflow : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct OrderMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Composition depth above the configured cap (default 4).
struct OrderCapExceeded : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DimensionMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A derivative oracle was required but unavailable and finite differences were disabled.
struct DerivativeUnavailable : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Finite-difference step degenerated to zero (input scale too extreme).
struct StepError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Kernel system (K + sigma^2 I) failed its SPD factorization; message carries diagnostics.
struct SpdFactorizationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Optimizer hit its iteration cap; best-so-far state is reported in the message
// and kept by the caller that throws.
struct IterationLimit : std::runtime_error {
    explicit IterationLimit(const std::string& what, double best_loss_, int iterations_)
        : std::runtime_error(what), best_loss(best_loss_), iterations(iterations_) {}
    double best_loss;
    int iterations;
};

// Anything wrong with user-supplied data files (CSV shape, parse failures, missing columns).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace hoig
