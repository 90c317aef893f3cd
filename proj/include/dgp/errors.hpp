#ifndef DGP_ERRORS_HPP_
#define DGP_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace dgp {

// All library failures derive from Error so callers can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input outside the domain an operation is defined on.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Parameter value the implementation refuses to approximate
// (e.g. a Matern regularity without a closed form).
class UnsupportedParameter : public Error {
 public:
  using Error::Error;
};

// Violated precondition of an operation's contract.
class ContractError : public Error {
 public:
  using Error::Error;
};

class NumericalDegeneracy : public Error {
 public:
  NumericalDegeneracy(const std::string& what, int shard_id = -1)
      : Error(shard_id >= 0 ? what + " (shard " + std::to_string(shard_id) + ")"
                            : what),
        shard_id_(shard_id) {}
  int shard_id() const { return shard_id_; }

 private:
  int shard_id_;
};

class OptimizationFailure : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  InsufficientData(const std::string& what, long available, long required)
      : Error(what + ": " + std::to_string(available) + " valid rows, " +
              std::to_string(required) + " required"),
        available_(available),
        required_(required) {}
  long available() const { return available_; }
  long required() const { return required_; }

 private:
  long available_;
  long required_;
};

}  // namespace dgp

#endif  // DGP_ERRORS_HPP_
