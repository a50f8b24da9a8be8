#pragma once

#include <stdexcept>
#include <string>

namespace rotadapt {

// Error taxonomy shared by the library and the CLI. The CLI maps these to
// process exit codes: ConfigError/InputError -> 2, DataError -> 3,
// NumericError -> 4.

class InputError : public std::invalid_argument {
public:
    explicit InputError(const std::string& msg) : std::invalid_argument(msg) {}
};

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Checkpoint file carries an unsupported format version.
class VersionError : public DataError {
public:
    explicit VersionError(const std::string& msg) : DataError(msg) {}
};

// Checkpoint file is corrupt (checksum mismatch, truncation).
class IntegrityError : public DataError {
public:
    explicit IntegrityError(const std::string& msg) : DataError(msg) {}
};

}  // namespace rotadapt
