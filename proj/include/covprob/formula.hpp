#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "covprob/errors.hpp"
#include "covprob/rational.hpp"

namespace covprob {

enum class BinaryOp { Add, Sub, Mul, Div, Mod };
enum class CmpOp { Eq, Ne, Lt, Le, Gt, Ge };

class Term;
using TermPtr = std::shared_ptr<const Term>;

// Integer term over named variables. Division truncates toward zero and the
// remainder takes the dividend's sign; division by zero is an evaluation
// fault, not a value.
class Term {
 public:
  struct Literal {
    Int value;
  };
  struct Var {
    std::string name;  // canonical: "Component.var" for state, plain otherwise
  };
  struct Binary {
    BinaryOp op;
    TermPtr lhs;
    TermPtr rhs;
  };
  struct Negate {
    TermPtr operand;
  };
  using Node = std::variant<Literal, Var, Binary, Negate>;

  explicit Term(Node node) : node_(std::move(node)) {}
  const Node& node() const { return node_; }

 private:
  Node node_;
};

TermPtr lit(Int value);
TermPtr lit(long value);
TermPtr var(std::string name);
TermPtr binary(BinaryOp op, TermPtr lhs, TermPtr rhs);
TermPtr negate(TermPtr operand);

class Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

// Quantifier-free boolean formula over integer comparisons.
class Formula {
 public:
  struct BoolLit {
    bool value;
  };
  struct Compare {
    CmpOp op;
    TermPtr lhs;
    TermPtr rhs;
  };
  struct Not {
    FormulaPtr operand;
  };
  struct And {
    FormulaPtr lhs;
    FormulaPtr rhs;
  };
  struct Or {
    FormulaPtr lhs;
    FormulaPtr rhs;
  };
  struct Implies {
    FormulaPtr lhs;
    FormulaPtr rhs;
  };
  using Node = std::variant<BoolLit, Compare, Not, And, Or, Implies>;

  explicit Formula(Node node) : node_(std::move(node)) {}
  const Node& node() const { return node_; }

 private:
  Node node_;
};

FormulaPtr truth(bool value);
FormulaPtr compare(CmpOp op, TermPtr lhs, TermPtr rhs);
FormulaPtr lnot(FormulaPtr operand);
FormulaPtr land(FormulaPtr lhs, FormulaPtr rhs);
FormulaPtr lor(FormulaPtr lhs, FormulaPtr rhs);
FormulaPtr implies(FormulaPtr lhs, FormulaPtr rhs);

bool is_true_literal(const Formula& f);
bool is_false_literal(const Formula& f);

// Total assignment of integer values to variable names. Booleans are 0/1.
class State {
 public:
  State() = default;
  explicit State(std::map<std::string, Int> values) : values_(std::move(values)) {}

  const Int* find(const std::string& name) const;
  const Int& at(const std::string& name) const;  // throws EvalError if unbound
  void set(const std::string& name, Int value) { values_[name] = std::move(value); }
  const std::map<std::string, Int>& values() const { return values_; }

  bool operator==(const State& other) const { return values_ == other.values_; }

 private:
  std::map<std::string, Int> values_;
};

enum class VarType { Int, Bool };

struct VarInfo {
  VarType type = VarType::Int;
  // Finite domain, required for enumeration. Bools always get [0, 1].
  std::optional<std::pair<Int, Int>> domain;
};

// Variable typing environment, with optional finite domains.
class Signature {
 public:
  Signature() = default;

  void declare(const std::string& name, VarType type);
  void declare(const std::string& name, VarType type, Int lo, Int hi);
  void set_domain(const std::string& name, Int lo, Int hi);

  bool contains(const std::string& name) const;
  const VarInfo& info(const std::string& name) const;
  const std::map<std::string, VarInfo>& vars() const { return vars_; }

 private:
  std::map<std::string, VarInfo> vars_;
};

Int eval_term(const Term& t, const State& s);
bool eval_formula(const Formula& f, const State& s);

std::set<std::string> free_vars(const Term& t);
std::set<std::string> free_vars(const Formula& f);

bool term_equal(const Term& a, const Term& b);
bool formula_equal(const Formula& a, const Formula& b);

// Strict weak order compatible with term_equal/formula_equal; used for
// canonical containers keyed by atoms.
int term_compare(const Term& a, const Term& b);
int formula_compare(const Formula& a, const Formula& b);

// Optional display transform applied to each variable name when printing.
using NameRenderer = std::function<std::string(const std::string&)>;

std::string print_term(const Term& t, const NameRenderer& render = nullptr);
std::string print_formula(const Formula& f, const NameRenderer& render = nullptr);

// Enumerate every state over the domains of `vars` (all must have domains in
// sig), invoking fn; stops early when fn returns false. Enumeration order is
// lexicographic by variable name, values ascending.
void for_each_state(const Signature& sig, const std::set<std::string>& vars,
                    const std::function<bool(const State&)>& fn);

// Number of states in the product of the domains.
Int domain_state_count(const Signature& sig, const std::set<std::string>& vars);

// Brute-force check that f -> g over the declared finite domains of all free
// variables. Throws StateSpaceTooLarge when the product exceeds max_states,
// EvalError when a variable lacks a domain entry in sig.
bool implies_on_domains(const Formula& f, const Formula& g, const Signature& sig,
                        unsigned long long max_states = 10'000'000ULL);

// Capture-free substitution of terms for variable names.
TermPtr substitute(const TermPtr& t, const std::map<std::string, TermPtr>& subst);
FormulaPtr substitute(const FormulaPtr& f, const std::map<std::string, TermPtr>& subst);

}  // namespace covprob
