#include "covprob/diagnostics.hpp"

#include <sstream>

namespace covprob {

std::string SourceSpan::to_string() const {
  std::ostringstream os;
  os << (file.empty() ? "<input>" : file) << ":" << line << ":" << col_begin;
  return os.str();
}

std::string Diagnostic::to_string() const {
  std::ostringstream os;
  os << span.to_string() << ": " << (severity == Severity::Error ? "error" : "warning") << " ["
     << category << "]: " << message;
  return os.str();
}

bool has_errors(const std::vector<Diagnostic>& diags) {
  for (const auto& d : diags)
    if (d.severity == Severity::Error) return true;
  return false;
}

}  // namespace covprob
