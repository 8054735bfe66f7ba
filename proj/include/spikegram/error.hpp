#pragma once

#include <stdexcept>
#include <string>

namespace spikegram {

// Base class for all errors raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid or inconsistent configuration (bad field, violated inequality,
// unknown key). CLI maps this to exit code 2.
struct ConfigError : Error {
    using Error::Error;
};

// Alphabet construction could not satisfy the separation constraints
// within the attempt budget. CLI maps this to exit code 3.
struct InfeasibleAlphabetError : Error {
    using Error::Error;
};

// The spiking engine and the symbolic oracle disagreed. CLI maps this to
// exit code 4.
struct EquivalenceError : Error {
    using Error::Error;
};

} // namespace spikegram
