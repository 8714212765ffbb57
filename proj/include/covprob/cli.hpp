#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace covprob {

// Full command-line driver. `args` excludes the program name. Returns the
// process exit code: 0 success, 1 validation/usage diagnostics, 2 analysis
// faults (budget exhaustion, contract or evaluation faults).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace covprob
