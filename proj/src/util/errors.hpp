#pragma once

#include <stdexcept>
#include <string>

namespace cvrlab {

// Error classes map 1:1 onto C API status codes and CLI exit codes:
// validation -> 1, runtime -> 2, verification -> 3.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct VerificationError : std::runtime_error {
  explicit VerificationError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace cvrlab
