#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "covprob/diagnostics.hpp"
#include "covprob/distribution.hpp"
#include "covprob/formula.hpp"

namespace covprob {

struct Param {
  std::string name;
  VarType type = VarType::Int;
};

// Guarded statement. Unguarded surface syntax desugars to guard true.
// Kinds:
//   Assign  target = value
//   Call    [target =] Component.service(args)
//   Abort   abort
//   Sample  target ~ dist            (usage profiles only)
//   Repeat  repeat count { body }    (unrolled before analysis)
struct Statement {
  enum class Kind { Assign, Call, Abort, Sample, Repeat };

  Kind kind = Kind::Abort;
  FormulaPtr guard;  // always set except for Repeat

  std::string target;  // Assign/Sample target; optional Call result target
  TermPtr value;       // Assign

  std::string callee_component;  // Call
  std::string callee_service;    // Call
  std::vector<TermPtr> args;     // Call

  std::optional<Distribution> dist;  // Sample

  unsigned long repeat_count = 0;  // Repeat
  std::vector<Statement> body;     // Repeat

  SourceSpan span;
};

Statement make_assign(std::string target, TermPtr value, FormulaPtr guard = nullptr);
Statement make_call(std::string component, std::string service, std::vector<TermPtr> args,
                    FormulaPtr guard = nullptr, std::string result_target = "");
Statement make_abort(FormulaPtr guard = nullptr);
Statement make_sample(std::string target, Distribution dist, FormulaPtr guard = nullptr);
Statement make_repeat(unsigned long count, std::vector<Statement> body);

// A service: parameters, contracts, coverage region, behavior, error cost.
// Within its formulas and body, parameters and the reserved local `result`
// are plain names; component state is "Component.var".
struct ServiceModel {
  std::string name;
  std::string component;
  std::vector<Param> params;
  FormulaPtr pre = truth(true);
  FormulaPtr post = truth(true);
  FormulaPtr cov = truth(true);
  std::vector<Statement> beh;
  Rational cost = Rational(1);
  SourceSpan span;

  std::string qualified_name() const { return component + "." + name; }
};

struct StateVar {
  std::string name;  // plain; canonical form is "Component.name"
  VarType type = VarType::Int;
  std::variant<Int, Distribution> init;
  SourceSpan span;
};

struct Component {
  std::string name;
  std::vector<StateVar> state_vars;
  std::vector<ServiceModel> services;
  SourceSpan span;

  const StateVar* find_state_var(const std::string& plain_name) const;
  const ServiceModel* find_service(const std::string& service_name) const;
};

// One instance per component; the service call graph must be acyclic.
struct SystemModel {
  std::vector<Component> components;

  const Component* find_component(const std::string& name) const;
  const ServiceModel* find_service(const std::string& component,
                                   const std::string& service) const;
  const ServiceModel* find_service_qualified(const std::string& qualified) const;

  // All state variables under canonical names. Domains are set only where
  // derivable (bool -> [0,1]).
  Signature state_signature() const;
};

struct UsageProfile {
  std::string name;
  std::vector<Statement> statements;
  SourceSpan span;
};

// Structural and semantic checks: name resolution, arity and type agreement,
// call-graph acyclicity, sample placement (profiles only), repeat counts,
// distribution well-formedness, duplicate names. The profile is optional.
std::vector<Diagnostic> validate_model(const SystemModel& m,
                                       const UsageProfile* profile = nullptr);

// Conservative static check that every profile-level call guard implies the
// callee's precondition. Variable ranges come from a forward interval
// analysis over the unrolled profile (sample supports, constant assigns,
// interval arithmetic); `extra_domains` overrides or adds ranges. Emits
// PreconditionRisk errors for definite/possible violations and
// PreCheckSkipped / StateSpaceTooLarge warnings where the check is not
// tractable; checks whose enumeration exceeds max_states are skipped with a
// warning.
std::vector<Diagnostic> static_pre_check(const SystemModel& m, const UsageProfile& profile,
                                         const Signature* extra_domains = nullptr,
                                         unsigned long long max_states = 10'000'000ULL);

}  // namespace covprob
