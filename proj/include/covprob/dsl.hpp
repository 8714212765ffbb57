#pragma once

#include <string>
#include <utility>
#include <vector>

#include "covprob/model.hpp"

namespace covprob {

// One sequent: conjunction of antecedents entails disjunction of succedents.
// Empty antecedent list means true, empty succedent list means false.
struct Sequent {
  std::vector<FormulaPtr> antecedent;
  std::vector<FormulaPtr> succedent;
};

// Residual proof goals exported by a verifier for one service.
struct ProofGoals {
  std::string service;  // qualified, e.g. "Network.useLoad"
  std::string tool;     // free-form provenance tag
  std::vector<std::string> auxiliaries;
  std::vector<Sequent> goals;
};

// Parse a system model (component declarations) from DSL text. `filename` is
// used in spans. Throws ParseError (SyntaxError / DuplicateName /
// UnknownReference) on malformed input; variable and call references are
// resolved and canonicalized.
SystemModel parse_model(const std::string& text, const std::string& filename = "<model>");

// Parse a usage profile against an already-parsed model.
UsageProfile parse_profile(const std::string& text, const SystemModel& m,
                           const std::string& filename = "<profile>");

// Parse a goal file (JSON). Formulas are parsed with the DSL formula grammar;
// names are resolved against the target service's scope (parameters, own
// component state as plain or qualified, other components' state qualified,
// declared auxiliaries). Unresolvable names raise ParseError with category
// UnknownVariable.
ProofGoals parse_goals(const std::string& json_text, const SystemModel& m,
                       const std::string& filename = "<goals>");

// Replace every Repeat(k, body) by k copies of body, recursively.
std::vector<Statement> unroll(const std::vector<Statement>& statements);
UsageProfile unroll(const UsageProfile& profile);

// Standalone formula/term parsing (used by goal files and tests). Names are
// kept as written; no model resolution.
FormulaPtr parse_formula(const std::string& text, const std::string& filename = "<formula>");
TermPtr parse_term(const std::string& text, const std::string& filename = "<term>");

// Printers. print_model/print_profile emit DSL text that parses back to a
// structurally identical model/profile.
std::string print_model(const SystemModel& m);
std::string print_profile(const UsageProfile& profile);

// Parse the flat probabilistic-program export format back into a one
// component model ("Program") plus its main profile.
std::pair<SystemModel, UsageProfile> parse_qpp(const std::string& text,
                                               const std::string& filename = "<qpp>");

}  // namespace covprob
