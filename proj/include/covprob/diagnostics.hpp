#pragma once

#include <string>
#include <vector>

#include "covprob/source_span.hpp"

namespace covprob {

enum class Severity { Error, Warning };

struct Diagnostic {
  Severity severity = Severity::Error;
  // Stable category tag, e.g. Recursion, MisplacedSample, UnknownReference,
  // ArityMismatch, DuplicateName, InvalidDistribution, PreconditionRisk,
  // PreCheckSkipped.
  std::string category;
  std::string message;
  SourceSpan span;

  std::string to_string() const;
};

bool has_errors(const std::vector<Diagnostic>& diags);

}  // namespace covprob
