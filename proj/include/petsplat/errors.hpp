#pragma once

#include <stdexcept>
#include <string>

namespace petsplat {

// Base for every error the engine raises. Messages are single-line so the
// CLI can print them verbatim.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Parameter vectors do not match the model they are applied to.
class ParameterShapeError : public Error {
public:
    using Error::Error;
};

// A model file or in-memory model violates its invariants.
class ModelError : public Error {
public:
    using Error::Error;
};

// Collinear / zero-area triangle where a frame was requested.
class FrameError : public Error {
public:
    using Error::Error;
};

// Two meshes that must share connectivity do not.
class TopologyError : public Error {
public:
    using Error::Error;
};

// Malformed file contents.
class FormatError : public Error {
public:
    using Error::Error;
};

// Filesystem failures (open, write, create directory).
class IoError : public Error {
public:
    using Error::Error;
};

// NaN, Inf or a numerically undefined operation (e.g. antipodal blend).
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace petsplat
