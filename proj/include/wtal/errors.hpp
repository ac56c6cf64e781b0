#pragma once

#include <stdexcept>
#include <string>

namespace wtal {

// Error taxonomy used across the library. Everything derives from Error so
// callers (and the CLI) can map failures to exit codes in one place.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed values: bad ranges, invalid config fields, unparseable inputs.
struct InputError : Error {
    explicit InputError(const std::string& msg) : Error(msg) {}
};

// Dimension mismatches between tensors that must agree.
struct ShapeError : Error {
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// Non-finite values or loss of mass where positivity is required.
struct NumericalError : Error {
    explicit NumericalError(const std::string& msg) : Error(msg) {}
};

// API misuse: e.g. backward called without cached forward activations.
struct StateError : Error {
    explicit StateError(const std::string& msg) : Error(msg) {}
};

// Inputs that make a quantity undefined (empty cluster, zero-mass prototype).
struct DegenerateError : Error {
    explicit DegenerateError(const std::string& msg) : Error(msg) {}
};

// Iterative solver failed to reach its tolerance within the iteration cap.
struct ConvergenceError : Error {
    explicit ConvergenceError(const std::string& msg) : Error(msg) {}
};

// Filesystem / serialization failures.
struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(msg) {}
};

// Structurally valid checkpoint from an incompatible schema (e.g. missing
// the persisted cluster F&B posterior); maps to its own CLI exit code.
struct CompatibilityError : Error {
    explicit CompatibilityError(const std::string& msg) : Error(msg) {}
};

}  // namespace wtal
