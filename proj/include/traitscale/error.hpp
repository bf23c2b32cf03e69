#pragma once

#include <stdexcept>
#include <string>

namespace traitscale {

/// Error type thrown by all library operations on contract violations.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace traitscale
