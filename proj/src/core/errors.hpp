#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace oandet {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad domain arguments (invalid config fields, out-of-range centers, ...).
struct ValidationError : Error {
    using Error::Error;
};

// Config file violations; carries every violation found, one per line.
struct ConfigError : Error {
    using Error::Error;
};

struct ShapeError : Error {
    using Error::Error;
};

// Numeric breakdown: non-finite values or a diverging optimization.
struct NumericError : Error {
    using Error::Error;
};

// Threshold calibration on an empty statistics window.
struct CalibrationError : Error {
    using Error::Error;
};

struct IoError : Error {
    IoError(const std::string& message, std::string path_)
        : Error(message + ": " + path_), path(std::move(path_)) {}

    std::string path;
};

} // namespace oandet
