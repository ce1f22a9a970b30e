#pragma once

#include <stdexcept>
#include <string>

namespace fairspread {

/// Raised for any contract violation or invalid input in the toolkit.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fairspread
