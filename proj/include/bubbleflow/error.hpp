#pragma once

#include <stdexcept>
#include <string>

namespace bubbleflow {

/// Failure categories; the CLI maps them onto exit codes.
enum class ErrorKind { internal = 1, config = 2, certification = 3, missing_artifact = 4 };

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  explicit Error(const std::string& what) : Error(ErrorKind::internal, what) {}
  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

inline Error config_error(const std::string& what) { return Error(ErrorKind::config, what); }

}  // namespace bubbleflow
