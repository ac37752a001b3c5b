#pragma once

#include <stdexcept>
#include <string>

namespace ucr {

// Bracket precondition failed: f(lo) >= target >= f(hi) does not hold.
class BracketError : public std::runtime_error {
 public:
  BracketError(const std::string& msg, double f_lo, double f_hi)
      : std::runtime_error(msg), f_lo_(f_lo), f_hi_(f_hi) {}
  double f_lo() const { return f_lo_; }
  double f_hi() const { return f_hi_; }

 private:
  double f_lo_;
  double f_hi_;
};

// Geometric expansion hit its cap without bracketing the target.
class NoBracketError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A documented monotonicity or algebraic contract was violated at runtime.
class ContractViolation : public std::logic_error {
  using std::logic_error::logic_error;
};

// Solver-level failure; the message carries level/iteration context.
class SolverError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ucr
