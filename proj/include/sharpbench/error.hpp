#pragma once

#include <stdexcept>
#include <string>

namespace sharpbench {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Operand shapes do not conform; the message carries both shapes.
class ShapeError : public Error {
public:
    using Error::Error;
};

// A forward or backward pass produced a NaN or Inf; the message names the op.
class NumericError : public Error {
public:
    using Error::Error;
};

// Bad configuration value or unreadable config file; the message names the key or path.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Malformed input file (IDX, CSV, checkpoint).
class DataFormatError : public Error {
public:
    using Error::Error;
};

class BadMagicError : public DataFormatError {
public:
    using DataFormatError::DataFormatError;
};

class TruncatedFileError : public DataFormatError {
public:
    using DataFormatError::DataFormatError;
};

class CountMismatchError : public DataFormatError {
public:
    using DataFormatError::DataFormatError;
};

}  // namespace sharpbench
