#pragma once

#include <stdexcept>
#include <string>

namespace poprl {

/// Machine-readable failure categories; the CLI maps these to exit codes.
enum class ErrorCategory {
  Config,      // invalid specs, dimension mismatches, bad run configuration
  Domain,      // argument outside an operation's mathematical domain
  NotReady,    // a store/source cannot serve the request yet
  Sequencing,  // operation invoked out of phase order
  Numeric,     // NaN/Inf or a failed numerical procedure
  Io,          // file system failures
};

inline const char* category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Config: return "config";
    case ErrorCategory::Domain: return "domain";
    case ErrorCategory::NotReady: return "not_ready";
    case ErrorCategory::Sequencing: return "sequencing";
    case ErrorCategory::Numeric: return "numeric";
    case ErrorCategory::Io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory c, const std::string& msg) {
  throw Error(c, msg);
}

}  // namespace poprl
