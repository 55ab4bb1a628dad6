#pragma once

#include <stdexcept>
#include <string>

namespace drugsent {

// Exit codes used by the CLI: 0 success, 2 usage, 3 data, 4 runtime/training.
enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 2,
    kExitData = 3,
    kExitRuntime = 4,
};

// Bad invocation: unknown key, missing required option, invalid flag value.
class UsageError : public std::runtime_error {
  public:
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or missing input data: unreadable file, bad row, bad rating.
class DataError : public std::runtime_error {
  public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Failure during model construction, training, or inference.
class TrainError : public std::runtime_error {
  public:
    explicit TrainError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace drugsent
