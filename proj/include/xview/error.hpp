#pragma once

#include <stdexcept>
#include <string>

namespace xview {

// All library errors derive from this; messages are single-line and name the
// offending item so CLI output stays machine-parsable.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace xview
