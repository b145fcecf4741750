#pragma once

#include <stdexcept>
#include <string>

namespace caneflow {

// Error categories surfaced by the CLI as machine-parsable prefixes
// ("error:<category>: message" on stderr).
enum class ErrorCategory {
  config,
  domain,
  insufficient_data,
  stream_order,
  overflow,
  io,
  manifest,
};

inline const char* category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::config: return "config";
    case ErrorCategory::domain: return "domain";
    case ErrorCategory::insufficient_data: return "insufficient_data";
    case ErrorCategory::stream_order: return "stream_order";
    case ErrorCategory::overflow: return "overflow";
    case ErrorCategory::io: return "io";
    case ErrorCategory::manifest: return "manifest";
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

}  // namespace caneflow
