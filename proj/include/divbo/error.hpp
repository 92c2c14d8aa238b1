#pragma once

#include <stdexcept>
#include <string>

namespace divbo {

// Raised on any contract violation: bad bounds, shape mismatches, invalid
// configurations, malformed inputs.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace divbo
