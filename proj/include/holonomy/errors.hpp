#pragma once
#include <cmath>
#include <stdexcept>
#include <string>

namespace holonomy {

// Base for everything the engine can throw. The CLI maps subtypes to exit
// codes: config problems -> 2, numerical failures -> 3.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// XZ - Y^2 <= 0, or a frequency fell below the configured floor.
struct DegenerateFrequency : Error {
    using Error::Error;
};

struct InvalidParams : Error {
    using Error::Error;
};

// no section return within the time bound
struct OpenOrbit : Error {
    using Error::Error;
};

struct IntegrationFailure : Error {
    using Error::Error;
};

struct RootFindFailure : Error {
    using Error::Error;
};

// angle-origin convention jumped between nearby parameter points
struct ConventionMismatch : Error {
    using Error::Error;
};

struct NoConvergence : Error {
    using Error::Error;
};

// CLI-side problems
struct ParseError : Error {
    using Error::Error;
};

struct ValidationError : Error {
    using Error::Error;
};

inline void check_finite(double x, const char* what) {
    if (!std::isfinite(x))
        throw InvalidParams(std::string(what) + " is not finite");
}

}  // namespace holonomy
