#pragma once

#include <stdexcept>
#include <string>

namespace wsireport {

/// Contract or content violation: bad config values, malformed files,
/// dimension mismatches. Maps to CLI exit code 1.
class ValidationError : public std::runtime_error {
  public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Missing or unreadable/unwritable paths. Maps to CLI exit code 2.
class IoError : public std::runtime_error {
  public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace wsireport
