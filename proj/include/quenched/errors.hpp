#pragma once

#include <stdexcept>

namespace quenched {

// A computation whose numerical preconditions failed (for example too many
// masked bins). The command-line runner maps it to exit status 3.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace quenched
