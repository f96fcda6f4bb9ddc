#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace crsim {

/// Argument outside the mathematical domain of a function (e.g. Q^-1(p) with p not in (0,1)).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed model input: negative PSD, zero bandwidth, nonpositive mean gain, ...
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The closed-form threshold for one subcarrier could not be formed.
class DegenerateThresholdError : public std::runtime_error {
 public:
  DegenerateThresholdError(std::size_t subcarrier, const std::string& what)
      : std::runtime_error("degenerate threshold on subcarrier " + std::to_string(subcarrier) +
                           ": " + what),
        subcarrier_(subcarrier) {}

  std::size_t subcarrier() const noexcept { return subcarrier_; }

 private:
  std::size_t subcarrier_;
};

/// eta*Phi_s + kappa*Phi_r vanished for a pair, so its water level is unbounded.
class UnboundedWaterLevelError : public std::runtime_error {
 public:
  UnboundedWaterLevelError(std::size_t i, std::size_t j)
      : std::runtime_error("unbounded water level for pair (" + std::to_string(i) + ", " +
                           std::to_string(j) + ")"),
        i_(i),
        j_(j) {}

  std::size_t row() const noexcept { return i_; }
  std::size_t col() const noexcept { return j_; }

 private:
  std::size_t i_;
  std::size_t j_;
};

/// No allocation satisfies the sensing and interference constraints.
class InfeasibleInstanceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace crsim
