#pragma once

#include <stdexcept>
#include <string>

namespace cavtomo {

// Base class for every error thrown by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// A polarization object violates its defining constraints
// (zero-norm Jones vector, non-Hermitian density matrix, ...).
class InvalidStateError : public Error {
public:
    using Error::Error;
};

// A Poincare vector with norm > 1 beyond tolerance.
class UnphysicalStateError : public Error {
public:
    using Error::Error;
};

// Mixture weights are negative or do not sum to one.
class InvalidMixtureError : public Error {
public:
    using Error::Error;
};

// An intensity basis pair has a non-positive sum, so the Stokes ratio
// is undefined.
class DegenerateMeasurementError : public Error {
public:
    using Error::Error;
};

// Malformed arguments that are not data-dependent (empty grids,
// out-of-range model parameters).
class InvalidArgumentError : public Error {
public:
    using Error::Error;
};

// A dataset does not contain the features a fit needs (e.g. no
// resonance dip, input polarization on a cavity axis).
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

// The model cannot reach the requested observable (measured purity
// below the theoretical minimum of the coupling curve).
class NoSolutionError : public Error {
public:
    using Error::Error;
};

// The requested inversion is trivially satisfied everywhere
// (measured purity >= 1 puts no constraint on the coupling).
class TrivialSolutionError : public Error {
public:
    using Error::Error;
};

// File and parsing failures.
class IoError : public Error {
public:
    using Error::Error;
};

// Config file schema violations; the message names the offending key.
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace cavtomo
