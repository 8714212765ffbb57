#include "covprob/cnf.hpp"

#include <functional>

namespace covprob {

namespace {

using Clauses = std::vector<std::vector<CnfLiteral>>;

void check_budget(unsigned long long size, unsigned long long max_clauses) {
  if (size > max_clauses)
    throw SizeBudgetExceeded("CNF conversion exceeds " + std::to_string(max_clauses) +
                             " clauses");
}

Clauses conjoin(Clauses a, Clauses&& b, unsigned long long max_clauses) {
  check_budget(static_cast<unsigned long long>(a.size()) + b.size(), max_clauses);
  a.insert(a.end(), std::make_move_iterator(b.begin()), std::make_move_iterator(b.end()));
  return a;
}

Clauses distribute(const Clauses& a, const Clauses& b, unsigned long long max_clauses) {
  check_budget(static_cast<unsigned long long>(a.size()) * b.size(), max_clauses);
  Clauses out;
  out.reserve(a.size() * b.size());
  for (const auto& ca : a) {
    for (const auto& cb : b) {
      std::vector<CnfLiteral> merged = ca;
      merged.insert(merged.end(), cb.begin(), cb.end());
      out.push_back(std::move(merged));
    }
  }
  return out;
}

Clauses cnf_rec(const FormulaPtr& f, bool neg, unsigned long long max_clauses) {
  if (const auto* b = std::get_if<Formula::BoolLit>(&f->node())) {
    bool value = b->value != neg;
    if (value) return {};                                   // true: no clauses
    return {std::vector<CnfLiteral>{}};                     // false: one empty clause
  }
  if (std::holds_alternative<Formula::Compare>(f->node())) {
    return {{CnfLiteral{neg, f}}};
  }
  if (const auto* n = std::get_if<Formula::Not>(&f->node())) {
    return cnf_rec(n->operand, !neg, max_clauses);
  }
  if (const auto* a = std::get_if<Formula::And>(&f->node())) {
    auto l = cnf_rec(a->lhs, neg, max_clauses);
    auto r = cnf_rec(a->rhs, neg, max_clauses);
    return neg ? distribute(l, r, max_clauses) : conjoin(std::move(l), std::move(r), max_clauses);
  }
  if (const auto* o = std::get_if<Formula::Or>(&f->node())) {
    auto l = cnf_rec(o->lhs, neg, max_clauses);
    auto r = cnf_rec(o->rhs, neg, max_clauses);
    return neg ? conjoin(std::move(l), std::move(r), max_clauses) : distribute(l, r, max_clauses);
  }
  const auto& i = std::get<Formula::Implies>(f->node());
  auto l = cnf_rec(i.lhs, !neg, max_clauses);  // !lhs | rhs
  auto r = cnf_rec(i.rhs, neg, max_clauses);
  return neg ? conjoin(std::move(l), std::move(r), max_clauses) : distribute(l, r, max_clauses);
}

}  // namespace

CnfFormula to_cnf(const Formula& f, unsigned long long max_clauses) {
  // Literal atoms alias subtrees of f via shared_ptr. A bare Compare root has
  // no owning ptr to alias, so copy it; everything else is never an atom.
  FormulaPtr root;
  if (std::holds_alternative<Formula::Compare>(f.node())) {
    root = std::make_shared<Formula>(f.node());
  } else {
    root = FormulaPtr(&f, [](const Formula*) {});
  }
  CnfFormula out;
  out.clauses = cnf_rec(root, false, max_clauses);
  return out;
}

CnfFormula project(const CnfFormula& cnf, const std::set<std::string>& keep) {
  CnfFormula out;
  out.clauses.reserve(cnf.clauses.size());
  for (const auto& clause : cnf.clauses) {
    std::vector<CnfLiteral> kept;
    for (const auto& literal : clause) {
      bool in_scope = true;
      for (const auto& v : free_vars(*literal.atom)) {
        if (keep.count(v) == 0) {
          in_scope = false;
          break;
        }
      }
      if (in_scope) kept.push_back(literal);
    }
    out.clauses.push_back(std::move(kept));
  }
  return out;
}

bool eval_cnf(const CnfFormula& cnf, const State& s) {
  for (const auto& clause : cnf.clauses) {
    bool clause_true = false;
    for (const auto& literal : clause) {
      if (eval_formula(*literal.atom, s) != literal.negated) {
        clause_true = true;
        break;
      }
    }
    if (!clause_true) return false;
  }
  return true;
}

std::set<std::string> free_vars(const CnfFormula& cnf) {
  std::set<std::string> out;
  for (const auto& clause : cnf.clauses) {
    for (const auto& literal : clause) {
      auto vs = free_vars(*literal.atom);
      out.insert(vs.begin(), vs.end());
    }
  }
  return out;
}

FormulaPtr cnf_to_formula(const CnfFormula& cnf) {
  if (cnf.clauses.empty()) return truth(true);
  FormulaPtr conj;
  for (const auto& clause : cnf.clauses) {
    FormulaPtr disj;
    if (clause.empty()) {
      disj = truth(false);
    } else {
      for (const auto& literal : clause) {
        FormulaPtr one = literal.negated ? lnot(literal.atom) : literal.atom;
        disj = disj ? lor(std::move(disj), std::move(one)) : std::move(one);
      }
    }
    conj = conj ? land(std::move(conj), std::move(disj)) : std::move(disj);
  }
  return conj;
}

bool cnf_equal(const CnfFormula& a, const CnfFormula& b) {
  if (a.clauses.size() != b.clauses.size()) return false;
  for (size_t i = 0; i < a.clauses.size(); ++i) {
    if (a.clauses[i].size() != b.clauses[i].size()) return false;
    for (size_t j = 0; j < a.clauses[i].size(); ++j) {
      const CnfLiteral& la = a.clauses[i][j];
      const CnfLiteral& lb = b.clauses[i][j];
      if (la.negated != lb.negated || !formula_equal(*la.atom, *lb.atom)) return false;
    }
  }
  return true;
}

std::string print_cnf(const CnfFormula& cnf) { return print_formula(*cnf_to_formula(cnf)); }

}  // namespace covprob
