#include "covprob/proofs.hpp"

#include "covprob/engine.hpp"

namespace covprob {

FormulaPtr goals_to_region(const ProofGoals& goals) {
  if (goals.goals.empty()) return truth(true);

  FormulaPtr conj;
  for (const auto& seq : goals.goals) {
    // An open sequent is discharged at states where some antecedent fails or
    // some succedent holds.
    FormulaPtr disj;
    auto add = [&disj](FormulaPtr f) {
      disj = disj ? lor(std::move(disj), std::move(f)) : std::move(f);
    };
    for (const auto& a : seq.antecedent) add(lnot(a));
    for (const auto& s : seq.succedent) add(s);
    if (disj == nullptr) disj = truth(false);
    conj = conj ? land(std::move(conj), std::move(disj)) : std::move(disj);
  }
  return conj;
}

std::set<std::string> service_scope(const SystemModel& m, const ServiceModel& s) {
  std::set<std::string> scope;
  for (const auto& p : s.params) scope.insert(p.name);
  for (const auto& c : m.components)
    for (const auto& v : c.state_vars) scope.insert(c.name + "." + v.name);
  return scope;
}

FormulaPtr region_for_model(const ProofGoals& goals, const SystemModel& m,
                            const ServiceModel& s, unsigned long long max_clauses) {
  FormulaPtr region = goals_to_region(goals);
  CnfFormula cnf = to_cnf(*region, max_clauses);
  CnfFormula projected = project(cnf, service_scope(m, s));
  return cnf_to_formula(projected);
}

RegionCheck check_region_correct(const SystemModel& m, const ServiceModel& s,
                                 const Formula& cov, const Signature& domains,
                                 unsigned long long max_states) {
  std::set<std::string> vars = service_scope(m, s);

  if (domain_state_count(domains, vars) > Int(static_cast<unsigned long>(max_states)))
    throw StateSpaceTooLarge("region check needs more than " + std::to_string(max_states) +
                             " states");

  RegionExecutor exec(m, s);
  RegionCheck rc;
  Int checked = 0;
  for_each_state(domains, vars, [&](const State& st) {
    ++checked;
    if (eval_formula(cov, st) && !exec.ok(st)) {
      rc.correct = false;
      rc.witness = st;
      return false;
    }
    return true;
  });
  rc.states_checked = checked;
  return rc;
}

}  // namespace covprob
