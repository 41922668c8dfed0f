#pragma once

#include <stdexcept>
#include <string>

namespace maintcause {

// Process exit codes used by the command-line tool.
enum class ExitCode : int {
    kSuccess = 0,
    kInternal = 1,
    kConfig = 2,
    kData = 3,
    kTraining = 4,
};

inline const char* exit_code_name(ExitCode c) {
    switch (c) {
        case ExitCode::kSuccess: return "ok";
        case ExitCode::kInternal: return "internal error";
        case ExitCode::kConfig: return "config error";
        case ExitCode::kData: return "data error";
        case ExitCode::kTraining: return "training error";
    }
    return "error";
}

class Error : public std::runtime_error {
public:
    Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ExitCode code() const noexcept { return code_; }

private:
    ExitCode code_;
};

// Invalid configuration or arguments.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ExitCode::kConfig, what) {}
};

// Malformed, missing or out-of-range data.
class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(ExitCode::kData, what) {}
};

// Non-finite losses, adversarial collapse and similar training failures.
class TrainingError : public Error {
public:
    explicit TrainingError(const std::string& what) : Error(ExitCode::kTraining, what) {}
};

}  // namespace maintcause
