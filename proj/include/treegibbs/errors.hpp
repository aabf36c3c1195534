#pragma once

#include <stdexcept>
#include <string>

namespace treegibbs {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Rejected parameters (NaN/infinite temperatures, q < 2, unknown vertex ids, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Every spin value at a site (or every configuration of a region) is forbidden.
class FrozenContradiction : public Error {
 public:
  using Error::Error;
};

// An exact table or enumeration would exceed its configured cap.
class StateSpaceTooLarge : public Error {
 public:
  using Error::Error;
};

class ReducibleChain : public Error {
 public:
  using Error::Error;
};

class NotMonotone : public Error {
 public:
  using Error::Error;
};

class ConvergenceFailure : public Error {
 public:
  using Error::Error;
};

// A Monte Carlo estimate cannot resolve the requested quantity with the given budget.
class InsufficientSignal : public Error {
 public:
  using Error::Error;
};

class InsufficientBudget : public Error {
 public:
  using Error::Error;
};

}  // namespace treegibbs
