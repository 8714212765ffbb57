#pragma once

#include <optional>
#include <set>
#include <string>

#include "covprob/cnf.hpp"
#include "covprob/dsl.hpp"
#include "covprob/formula.hpp"
#include "covprob/model.hpp"

namespace covprob {

// Conjunction over sequents of (disjunction of negated antecedents or
// succedents): a state is covered when every open goal is discharged there.
// No goals yields true; a goal with empty antecedent and empty succedent
// yields false.
FormulaPtr goals_to_region(const ProofGoals& goals);

// goals_to_region, converted to CNF and projected onto the service's scope
// (parameters plus all state variables, canonical names). Auxiliary-only
// literals drop out; the result is at least as strong as the source region.
FormulaPtr region_for_model(const ProofGoals& goals, const SystemModel& m,
                            const ServiceModel& s, unsigned long long max_clauses = 100'000ULL);

struct RegionCheck {
  bool correct = true;
  // Lexicographically least (by variable name, then value order) state where
  // cov holds but executing the service produces an error.
  std::optional<State> witness;
  Int states_checked = 0;
};

// Brute-force check over the given finite domains that cov only admits
// states from which the service executes without contract errors (callee
// preconditions at call sites, own postcondition at exit; callee bodies are
// not executed). `domains` must cover the service's parameters and all state
// variables read or checked along the way.
RegionCheck check_region_correct(const SystemModel& m, const ServiceModel& s,
                                 const Formula& cov, const Signature& domains,
                                 unsigned long long max_states = 10'000'000ULL);

// Scope of a service: parameter names plus every canonical state variable.
std::set<std::string> service_scope(const SystemModel& m, const ServiceModel& s);

}  // namespace covprob
