#ifndef CHAOSLAB_ERROR_HPP
#define CHAOSLAB_ERROR_HPP

#include <stdexcept>
#include <string>

namespace chaoslab {

/// Raised when an argument violates an operation's precondition
/// (shape mismatch, out-of-range index, malformed input).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an input exceeds the supported order or dimension caps.
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

namespace detail {

inline void require(bool cond, const std::string& what) {
  if (!cond) throw InvalidArgument(what);
}

}  // namespace detail
}  // namespace chaoslab

#endif  // CHAOSLAB_ERROR_HPP
