#pragma once

#include <stdexcept>
#include <string>

namespace assr {

/// Invalid parameters, shapes, or run configuration. The CLI maps this to exit code 2.
class config_error : public std::invalid_argument {
 public:
  explicit config_error(const std::string& what) : std::invalid_argument(what) {}
};

/// Numerical failure at runtime (non-convergence, instability). The CLI maps this to exit code 3.
class numerical_error : public std::runtime_error {
 public:
  explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace assr
