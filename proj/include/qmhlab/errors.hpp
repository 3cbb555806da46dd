#pragma once

#include <stdexcept>
#include <string>

namespace qmh {

/// Malformed input: wrong sizes, non-finite values, tables that are not
/// probability distributions, configs missing required fields.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A query outside an operation's domain, e.g. the acceptance probability of
/// a proposal the driver can never emit.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// The queried trajectory has probability zero, so its acceptance
/// probability is undefined (zero denominator).
class ImpossibleEvent : public ContractError {
 public:
  using ContractError::ContractError;
};

class QuadratureError : public std::runtime_error {
 public:
  QuadratureError(const std::string& what, double achieved)
      : std::runtime_error(what), achieved_(achieved) {}
  double achieved_tolerance() const noexcept { return achieved_; }

 private:
  double achieved_;
};

}  // namespace qmh
