#pragma once

#include <stdexcept>

namespace egmn {

// Input files or rows that do not match the declared layout.
struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent data contents.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values or failed numeric invariants at run time.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace egmn
