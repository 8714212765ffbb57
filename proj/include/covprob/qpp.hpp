#pragma once

#include <string>

#include "covprob/model.hpp"

namespace covprob {

// Flatten model + profile into the guarded probabilistic-program format: one
// `fun` per service whose first statement aborts outside the coverage
// region, and `main` built from the profile. State variables become globals
// under flattened names. Re-parsing the output with parse_qpp and re-running
// the exact analysis reproduces the coverage probability bit for bit.
std::string export_prob_program(const SystemModel& m, const UsageProfile& u);

}  // namespace covprob
