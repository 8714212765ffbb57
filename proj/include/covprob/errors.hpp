#pragma once

#include <stdexcept>
#include <string>

#include "covprob/source_span.hpp"

namespace covprob {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Term/formula evaluation faults.
class EvalError : public Error {
 public:
  enum class Kind { DivisionByZero, UnboundVariable };

  EvalError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// CNF conversion exceeded the clause cap.
class SizeBudgetExceeded : public Error {
 public:
  using Error::Error;
};

// A brute-force domain enumeration would exceed the state cap.
class StateSpaceTooLarge : public Error {
 public:
  using Error::Error;
};

// Exact enumeration exceeded the branch budget.
class BranchBudgetExceeded : public Error {
 public:
  using Error::Error;
};

// Bad distribution parameters (sigma <= 0, masses not summing to 1, ...).
class InvalidDistribution : public Error {
 public:
  using Error::Error;
};

// Raised by the DSL front end. Category is one of SyntaxError,
// DuplicateName, UnknownReference, UnknownVariable, InvalidRepeat.
class ParseError : public Error {
 public:
  ParseError(std::string category, const std::string& message, SourceSpan span)
      : Error(span.to_string() + ": " + category + ": " + message),
        category_(std::move(category)),
        span_(std::move(span)) {}

  const std::string& category() const { return category_; }
  const SourceSpan& span() const { return span_; }

 private:
  std::string category_;
  SourceSpan span_;
};

}  // namespace covprob
