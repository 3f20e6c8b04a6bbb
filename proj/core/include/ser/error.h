#pragma once

#include <stdexcept>
#include <string>

namespace ser {

/// Raised on any contract violation: malformed input files, shape
/// mismatches, missing prerequisites.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ser
