#pragma once

#include <set>
#include <string>
#include <vector>

#include "covprob/formula.hpp"

namespace covprob {

// A possibly negated atom. Atoms are comparisons or boolean literals taken
// syntactically from the source formula; no fresh variables are introduced.
struct CnfLiteral {
  bool negated = false;
  FormulaPtr atom;
};

// Conjunction of clauses, each a disjunction of literals. No clauses means
// true; an empty clause makes the whole formula false.
struct CnfFormula {
  std::vector<std::vector<CnfLiteral>> clauses;
};

// Conversion by negation normal form plus distribution. The result is
// logically equivalent to f (no Tseitin). Throws SizeBudgetExceeded when the
// clause count would exceed max_clauses.
CnfFormula to_cnf(const Formula& f, unsigned long long max_clauses = 100'000ULL);

// Remove every literal whose atom mentions a variable outside keep. Clauses
// that lose all literals become the empty clause (false). The result implies
// the original over all states.
CnfFormula project(const CnfFormula& cnf, const std::set<std::string>& keep);

bool eval_cnf(const CnfFormula& cnf, const State& s);

std::set<std::string> free_vars(const CnfFormula& cnf);

// true -> BoolLit true, empty clause -> BoolLit false, otherwise the
// conjunction of clause disjunctions in clause order.
FormulaPtr cnf_to_formula(const CnfFormula& cnf);

bool cnf_equal(const CnfFormula& a, const CnfFormula& b);

std::string print_cnf(const CnfFormula& cnf);

}  // namespace covprob
