#pragma once

#include <stdexcept>
#include <string>

namespace sdsim {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GridError : Error {
    using Error::Error;
};

struct DomainError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct DiagnosticsError : Error {
    using Error::Error;
};

struct FitError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

struct SnapshotFormatError : IoError {
    using IoError::IoError;
};

// Thrown by the stepper when a sample goes non-finite or the spectral tail
// monitor trips.
struct DivergenceError : Error {
    long step_index;
    double t;
    DivergenceError(long step, double time)
        : Error("integration diverged at step " + std::to_string(step) +
                " (t=" + std::to_string(time) + ")"),
          step_index(step), t(time) {}
};

// Wrap guard tripped before (or inside) a requested measurement window.
struct WrapGuardError : Error {
    double trip_time;
    WrapGuardError(std::string msg, double trip)
        : Error(std::move(msg)), trip_time(trip) {}
};

} // namespace sdsim
