#pragma once

#include <stdexcept>
#include <string>

namespace nzp {

// Invalid arguments or malformed in-memory inputs.
struct input_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Malformed file contents; messages name the offending byte offset.
struct format_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Configurations the engine does not support (e.g. empty nonzero chunks).
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Collective misuse or deadlock detected by the rank harness.
struct harness_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Replicated data diverged between ranks.
struct consistency_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace nzp
