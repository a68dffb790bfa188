#pragma once

#include <stdexcept>
#include <string>

namespace cct {

// Process exit codes shared by library error types and the CLI.
enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 2,
    kExitData = 3,
    kExitConfig = 4,
    kExitNumeric = 5,
};

class CctError : public std::runtime_error {
public:
    explicit CctError(const std::string& msg) : std::runtime_error(msg) {}
    virtual int exit_code() const { return kExitUsage; }
};

// Caller misuse: bad arguments, backward on a non-scalar, consumed trace.
class UsageError : public CctError {
public:
    using CctError::CctError;
    int exit_code() const override { return kExitUsage; }
};

// Bad input data: manifests, labels, image files, checkpoint contents.
class DataError : public CctError {
public:
    using CctError::CctError;
    int exit_code() const override { return kExitData; }
};

// Invalid or inconsistent configuration.
class ConfigError : public CctError {
public:
    using CctError::CctError;
    int exit_code() const override { return kExitConfig; }
};

// Tokenizer/conv/pool geometry collapsed to a non-positive extent.
class GeometryError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

// Tensor shape mismatch between operands.
class ShapeError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

// NaN/Inf detection, overflow, failed numeric checks.
class NumericError : public CctError {
public:
    using CctError::CctError;
    int exit_code() const override { return kExitNumeric; }
};

// Corrupted or truncated serialized artifacts (checksums, versions).
class IntegrityError : public DataError {
public:
    using DataError::DataError;
};

}  // namespace cct
