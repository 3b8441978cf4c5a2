#pragma once

#include <stdexcept>
#include <string>

namespace urbanfn {

// Raised for malformed inputs, failed preconditions on data and I/O problems.
// The CLI maps it to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace urbanfn
