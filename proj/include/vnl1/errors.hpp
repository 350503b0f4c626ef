#pragma once
#include <stdexcept>
#include <string>

namespace vnl1 {

// Bad arguments: wrong sizes, non-positive entries, out-of-range parameters.
class ValidationError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

class ShapeMismatch : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

// A decomposition failed to converge; `block` is the offending block index (or -1).
class NumericError : public std::runtime_error {
  public:
    NumericError(const std::string &what, int block = -1) : std::runtime_error(what), block_(block) {}
    [[nodiscard]] int block() const { return block_; }

  private:
    int block_;
};

// A measured hypothesis of a procedure did not hold.  `measured` carries the offending value.
class PreconditionError : public std::runtime_error {
  public:
    PreconditionError(const std::string &what, double measured) : std::runtime_error(what), measured_(measured) {}
    [[nodiscard]] double measured() const { return measured_; }

  private:
    double measured_;
};

} // namespace vnl1
