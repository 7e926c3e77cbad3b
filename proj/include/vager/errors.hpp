#pragma once

#include <stdexcept>
#include <string>

namespace vager {

// Bad input data or file format. CLI maps this to exit code 2.
class data_error : public std::runtime_error {
 public:
  explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure (non-finite loss, degenerate matrix). Exit code 3.
class numeric_error : public std::runtime_error {
 public:
  explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace vager
