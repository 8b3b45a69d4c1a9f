#pragma once

#include <stdexcept>
#include <string>

namespace composenet {

// Exit codes reported by the CLI. Library code throws the exception types
// below; tools/main maps them to these codes.
enum class ExitCode : int {
  Ok = 0,
  BadConfig = 1,
  MissingPrerequisite = 2,
  NumericFailure = 3,
};

// Invalid configuration: bad shapes, unparseable task expressions,
// unsupported formula templates, malformed config files.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// A required input artifact (checkpoint, metrics file) is absent or
// incomplete.
class MissingPrerequisiteError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Non-finite values where finite ones are required; aborts the offending
// step with diagnostics.
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// API contract misuse (stepping a finished episode or monitor, updating a
// frozen parameter).
class UsageError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

}  // namespace composenet
