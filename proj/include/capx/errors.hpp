#pragma once

#include <stdexcept>
#include <string>

namespace capx {

// One exception type per failure class; all carry a plain message.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShutdownError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TimeoutError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TaskFailedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnknownRef : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace capx
