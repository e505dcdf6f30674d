#pragma once

#include <stdexcept>
#include <string>

namespace cvqrng {

// Base of every error raised by the library. Subclasses map onto CLI exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Calibration could not produce a usable gradient (m <= 0 or m - k*stderr <= 0).
class CalibrationError : public Error {
public:
    using Error::Error;
};

class InfeasiblePlan : public Error {
public:
    using Error::Error;
};

// The scheduler says the current entropy bound may no longer be trusted.
class StaleCalibration : public Error {
public:
    using Error::Error;
};

// A Fock-diagonal state beat the vacuum guessing probability.
class SecurityModelViolation : public Error {
public:
    using Error::Error;
};

class VerificationFailure : public Error {
public:
    using Error::Error;
};

}  // namespace cvqrng
