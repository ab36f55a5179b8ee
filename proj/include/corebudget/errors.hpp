#pragma once

#include <stdexcept>
#include <string>

namespace corebudget {

// Raised for invalid user input (bad files, out-of-range parameters,
// infeasible configurations). The CLI maps these to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace corebudget
