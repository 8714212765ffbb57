#include "covprob/formula.hpp"

#include <algorithm>
#include <sstream>

namespace covprob {

TermPtr lit(Int value) { return std::make_shared<Term>(Term::Literal{std::move(value)}); }
TermPtr lit(long value) { return lit(Int(value)); }
TermPtr var(std::string name) { return std::make_shared<Term>(Term::Var{std::move(name)}); }

TermPtr binary(BinaryOp op, TermPtr lhs, TermPtr rhs) {
  return std::make_shared<Term>(Term::Binary{op, std::move(lhs), std::move(rhs)});
}

TermPtr negate(TermPtr operand) {
  // Fold literal negation so "-5" has one canonical tree.
  if (const auto* l = std::get_if<Term::Literal>(&operand->node()))
    return lit(Int(-l->value));
  return std::make_shared<Term>(Term::Negate{std::move(operand)});
}

FormulaPtr truth(bool value) { return std::make_shared<Formula>(Formula::BoolLit{value}); }

FormulaPtr compare(CmpOp op, TermPtr lhs, TermPtr rhs) {
  return std::make_shared<Formula>(Formula::Compare{op, std::move(lhs), std::move(rhs)});
}

FormulaPtr lnot(FormulaPtr operand) {
  return std::make_shared<Formula>(Formula::Not{std::move(operand)});
}

FormulaPtr land(FormulaPtr lhs, FormulaPtr rhs) {
  return std::make_shared<Formula>(Formula::And{std::move(lhs), std::move(rhs)});
}

FormulaPtr lor(FormulaPtr lhs, FormulaPtr rhs) {
  return std::make_shared<Formula>(Formula::Or{std::move(lhs), std::move(rhs)});
}

FormulaPtr implies(FormulaPtr lhs, FormulaPtr rhs) {
  return std::make_shared<Formula>(Formula::Implies{std::move(lhs), std::move(rhs)});
}

bool is_true_literal(const Formula& f) {
  const auto* b = std::get_if<Formula::BoolLit>(&f.node());
  return b != nullptr && b->value;
}

bool is_false_literal(const Formula& f) {
  const auto* b = std::get_if<Formula::BoolLit>(&f.node());
  return b != nullptr && !b->value;
}

const Int* State::find(const std::string& name) const {
  auto it = values_.find(name);
  return it == values_.end() ? nullptr : &it->second;
}

const Int& State::at(const std::string& name) const {
  const Int* v = find(name);
  if (v == nullptr)
    throw EvalError(EvalError::Kind::UnboundVariable, "unbound variable: " + name);
  return *v;
}

void Signature::declare(const std::string& name, VarType type) {
  VarInfo info;
  info.type = type;
  if (type == VarType::Bool) info.domain = std::make_pair(Int(0), Int(1));
  vars_[name] = std::move(info);
}

void Signature::declare(const std::string& name, VarType type, Int lo, Int hi) {
  declare(name, type);
  set_domain(name, std::move(lo), std::move(hi));
}

void Signature::set_domain(const std::string& name, Int lo, Int hi) {
  if (lo > hi) throw Error("empty domain for " + name);
  vars_.at(name).domain = std::make_pair(std::move(lo), std::move(hi));
}

bool Signature::contains(const std::string& name) const { return vars_.count(name) > 0; }

const VarInfo& Signature::info(const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end())
    throw EvalError(EvalError::Kind::UnboundVariable, "undeclared variable: " + name);
  return it->second;
}

Int eval_term(const Term& t, const State& s) {
  struct Visitor {
    const State& s;

    Int operator()(const Term::Literal& n) const { return n.value; }
    Int operator()(const Term::Var& n) const { return s.at(n.name); }
    Int operator()(const Term::Negate& n) const { return -std::visit(*this, n.operand->node()); }

    Int operator()(const Term::Binary& n) const {
      Int a = std::visit(*this, n.lhs->node());
      Int b = std::visit(*this, n.rhs->node());
      switch (n.op) {
        case BinaryOp::Add:
          return a + b;
        case BinaryOp::Sub:
          return a - b;
        case BinaryOp::Mul:
          return a * b;
        case BinaryOp::Div:
          if (b == 0) throw EvalError(EvalError::Kind::DivisionByZero, "division by zero");
          return a / b;  // mpz_class division truncates toward zero
        case BinaryOp::Mod:
          if (b == 0) throw EvalError(EvalError::Kind::DivisionByZero, "modulo by zero");
          return a % b;
      }
      throw Error("unreachable");
    }
  };
  return std::visit(Visitor{s}, t.node());
}

bool eval_formula(const Formula& f, const State& s) {
  struct Visitor {
    const State& s;

    bool operator()(const Formula::BoolLit& n) const { return n.value; }
    bool operator()(const Formula::Not& n) const { return !std::visit(*this, n.operand->node()); }

    bool operator()(const Formula::Compare& n) const {
      Int a = eval_term(*n.lhs, s);
      Int b = eval_term(*n.rhs, s);
      int c = cmp(a, b);
      switch (n.op) {
        case CmpOp::Eq:
          return c == 0;
        case CmpOp::Ne:
          return c != 0;
        case CmpOp::Lt:
          return c < 0;
        case CmpOp::Le:
          return c <= 0;
        case CmpOp::Gt:
          return c > 0;
        case CmpOp::Ge:
          return c >= 0;
      }
      throw Error("unreachable");
    }

    bool operator()(const Formula::And& n) const {
      return std::visit(*this, n.lhs->node()) && std::visit(*this, n.rhs->node());
    }
    bool operator()(const Formula::Or& n) const {
      return std::visit(*this, n.lhs->node()) || std::visit(*this, n.rhs->node());
    }
    bool operator()(const Formula::Implies& n) const {
      return !std::visit(*this, n.lhs->node()) || std::visit(*this, n.rhs->node());
    }
  };
  return std::visit(Visitor{s}, f.node());
}

namespace {

void collect_vars(const Term& t, std::set<std::string>& out) {
  if (const auto* v = std::get_if<Term::Var>(&t.node())) {
    out.insert(v->name);
  } else if (const auto* b = std::get_if<Term::Binary>(&t.node())) {
    collect_vars(*b->lhs, out);
    collect_vars(*b->rhs, out);
  } else if (const auto* n = std::get_if<Term::Negate>(&t.node())) {
    collect_vars(*n->operand, out);
  }
}

void collect_vars(const Formula& f, std::set<std::string>& out) {
  if (const auto* c = std::get_if<Formula::Compare>(&f.node())) {
    collect_vars(*c->lhs, out);
    collect_vars(*c->rhs, out);
  } else if (const auto* n = std::get_if<Formula::Not>(&f.node())) {
    collect_vars(*n->operand, out);
  } else if (const auto* a = std::get_if<Formula::And>(&f.node())) {
    collect_vars(*a->lhs, out);
    collect_vars(*a->rhs, out);
  } else if (const auto* o = std::get_if<Formula::Or>(&f.node())) {
    collect_vars(*o->lhs, out);
    collect_vars(*o->rhs, out);
  } else if (const auto* i = std::get_if<Formula::Implies>(&f.node())) {
    collect_vars(*i->lhs, out);
    collect_vars(*i->rhs, out);
  }
}

}  // namespace

std::set<std::string> free_vars(const Term& t) {
  std::set<std::string> out;
  collect_vars(t, out);
  return out;
}

std::set<std::string> free_vars(const Formula& f) {
  std::set<std::string> out;
  collect_vars(f, out);
  return out;
}

int term_compare(const Term& a, const Term& b) {
  if (a.node().index() != b.node().index())
    return a.node().index() < b.node().index() ? -1 : 1;
  if (const auto* la = std::get_if<Term::Literal>(&a.node())) {
    const auto& lb = std::get<Term::Literal>(b.node());
    return cmp(la->value, lb.value);
  }
  if (const auto* va = std::get_if<Term::Var>(&a.node())) {
    const auto& vb = std::get<Term::Var>(b.node());
    return va->name.compare(vb.name);
  }
  if (const auto* ba = std::get_if<Term::Binary>(&a.node())) {
    const auto& bb = std::get<Term::Binary>(b.node());
    if (ba->op != bb.op) return static_cast<int>(ba->op) < static_cast<int>(bb.op) ? -1 : 1;
    if (int c = term_compare(*ba->lhs, *bb.lhs)) return c;
    return term_compare(*ba->rhs, *bb.rhs);
  }
  const auto& na = std::get<Term::Negate>(a.node());
  const auto& nb = std::get<Term::Negate>(b.node());
  return term_compare(*na.operand, *nb.operand);
}

bool term_equal(const Term& a, const Term& b) { return term_compare(a, b) == 0; }

int formula_compare(const Formula& a, const Formula& b) {
  if (a.node().index() != b.node().index())
    return a.node().index() < b.node().index() ? -1 : 1;
  if (const auto* ba = std::get_if<Formula::BoolLit>(&a.node())) {
    const auto& bb = std::get<Formula::BoolLit>(b.node());
    return static_cast<int>(ba->value) - static_cast<int>(bb.value);
  }
  if (const auto* ca = std::get_if<Formula::Compare>(&a.node())) {
    const auto& cb = std::get<Formula::Compare>(b.node());
    if (ca->op != cb.op) return static_cast<int>(ca->op) < static_cast<int>(cb.op) ? -1 : 1;
    if (int c = term_compare(*ca->lhs, *cb.lhs)) return c;
    return term_compare(*ca->rhs, *cb.rhs);
  }
  if (const auto* na = std::get_if<Formula::Not>(&a.node())) {
    const auto& nb = std::get<Formula::Not>(b.node());
    return formula_compare(*na->operand, *nb.operand);
  }
  auto binary_parts = [](const Formula& f) {
    if (const auto* x = std::get_if<Formula::And>(&f.node())) return std::make_pair(x->lhs, x->rhs);
    if (const auto* x = std::get_if<Formula::Or>(&f.node())) return std::make_pair(x->lhs, x->rhs);
    const auto& x = std::get<Formula::Implies>(f.node());
    return std::make_pair(x.lhs, x.rhs);
  };
  auto [al, ar] = binary_parts(a);
  auto [bl, br] = binary_parts(b);
  if (int c = formula_compare(*al, *bl)) return c;
  return formula_compare(*ar, *br);
}

bool formula_equal(const Formula& a, const Formula& b) { return formula_compare(a, b) == 0; }

namespace {

// Term precedence: 0 additive, 1 multiplicative, 2 unary/primary.
int term_prec(const Term& t) {
  if (const auto* b = std::get_if<Term::Binary>(&t.node())) {
    switch (b->op) {
      case BinaryOp::Add:
      case BinaryOp::Sub:
        return 0;
      default:
        return 1;
    }
  }
  return 2;
}

const char* op_text(BinaryOp op) {
  switch (op) {
    case BinaryOp::Add:
      return "+";
    case BinaryOp::Sub:
      return "-";
    case BinaryOp::Mul:
      return "*";
    case BinaryOp::Div:
      return "/";
    case BinaryOp::Mod:
      return "%";
  }
  return "?";
}

const char* op_text(CmpOp op) {
  switch (op) {
    case CmpOp::Eq:
      return "==";
    case CmpOp::Ne:
      return "!=";
    case CmpOp::Lt:
      return "<";
    case CmpOp::Le:
      return "<=";
    case CmpOp::Gt:
      return ">";
    case CmpOp::Ge:
      return ">=";
  }
  return "?";
}

void print_term_rec(const Term& t, const NameRenderer& render, std::ostream& os) {
  if (const auto* l = std::get_if<Term::Literal>(&t.node())) {
    os << l->value.get_str();
  } else if (const auto* v = std::get_if<Term::Var>(&t.node())) {
    os << (render ? render(v->name) : v->name);
  } else if (const auto* n = std::get_if<Term::Negate>(&t.node())) {
    os << "-";
    bool parens = term_prec(*n->operand) < 2;
    if (parens) os << "(";
    print_term_rec(*n->operand, render, os);
    if (parens) os << ")";
  } else {
    const auto& b = std::get<Term::Binary>(t.node());
    int p = term_prec(t);
    bool lp = term_prec(*b.lhs) < p;
    // Left-associative grammar: a - (b - c) keeps explicit parens.
    bool rp = term_prec(*b.rhs) <= p;
    if (lp) os << "(";
    print_term_rec(*b.lhs, render, os);
    if (lp) os << ")";
    os << " " << op_text(b.op) << " ";
    if (rp) os << "(";
    print_term_rec(*b.rhs, render, os);
    if (rp) os << ")";
  }
}

// Formula precedence: 0 implies, 1 or, 2 and, 3 atom/not.
int formula_prec(const Formula& f) {
  if (std::holds_alternative<Formula::Implies>(f.node())) return 0;
  if (std::holds_alternative<Formula::Or>(f.node())) return 1;
  if (std::holds_alternative<Formula::And>(f.node())) return 2;
  return 3;
}

void print_formula_rec(const Formula& f, const NameRenderer& render, std::ostream& os) {
  if (const auto* b = std::get_if<Formula::BoolLit>(&f.node())) {
    os << (b->value ? "true" : "false");
  } else if (const auto* c = std::get_if<Formula::Compare>(&f.node())) {
    print_term_rec(*c->lhs, render, os);
    os << " " << op_text(c->op) << " ";
    print_term_rec(*c->rhs, render, os);
  } else if (const auto* n = std::get_if<Formula::Not>(&f.node())) {
    os << "!(";
    print_formula_rec(*n->operand, render, os);
    os << ")";
  } else {
    const Formula* lhs;
    const Formula* rhs;
    const char* op;
    bool right_assoc = false;
    if (const auto* a = std::get_if<Formula::And>(&f.node())) {
      lhs = a->lhs.get(), rhs = a->rhs.get(), op = "&&";
    } else if (const auto* o = std::get_if<Formula::Or>(&f.node())) {
      lhs = o->lhs.get(), rhs = o->rhs.get(), op = "||";
    } else {
      const auto& i = std::get<Formula::Implies>(f.node());
      lhs = i.lhs.get(), rhs = i.rhs.get(), op = "->";
      right_assoc = true;
    }
    int p = formula_prec(f);
    bool lp = right_assoc ? formula_prec(*lhs) <= p : formula_prec(*lhs) < p;
    bool rp = right_assoc ? formula_prec(*rhs) < p : formula_prec(*rhs) <= p;
    if (lp) os << "(";
    print_formula_rec(*lhs, render, os);
    if (lp) os << ")";
    os << " " << op << " ";
    if (rp) os << "(";
    print_formula_rec(*rhs, render, os);
    if (rp) os << ")";
  }
}

}  // namespace

std::string print_term(const Term& t, const NameRenderer& render) {
  std::ostringstream os;
  print_term_rec(t, render, os);
  return os.str();
}

std::string print_formula(const Formula& f, const NameRenderer& render) {
  std::ostringstream os;
  print_formula_rec(f, render, os);
  return os.str();
}

void for_each_state(const Signature& sig, const std::set<std::string>& vars,
                    const std::function<bool(const State&)>& fn) {
  std::vector<std::pair<std::string, std::pair<Int, Int>>> dims;
  for (const auto& name : vars) {
    const VarInfo& info = sig.info(name);
    if (!info.domain)
      throw EvalError(EvalError::Kind::UnboundVariable, "no domain declared for " + name);
    dims.emplace_back(name, *info.domain);
  }

  State state;
  std::function<bool(size_t)> rec = [&](size_t i) -> bool {
    if (i == dims.size()) return fn(state);
    for (Int v = dims[i].second.first; v <= dims[i].second.second; ++v) {
      state.set(dims[i].first, v);
      if (!rec(i + 1)) return false;
    }
    return true;
  };
  rec(0);
}

Int domain_state_count(const Signature& sig, const std::set<std::string>& vars) {
  Int count = 1;
  for (const auto& name : vars) {
    const VarInfo& info = sig.info(name);
    if (!info.domain)
      throw EvalError(EvalError::Kind::UnboundVariable, "no domain declared for " + name);
    count *= info.domain->second - info.domain->first + 1;
  }
  return count;
}

TermPtr substitute(const TermPtr& t, const std::map<std::string, TermPtr>& subst) {
  if (const auto* v = std::get_if<Term::Var>(&t->node())) {
    auto it = subst.find(v->name);
    return it == subst.end() ? t : it->second;
  }
  if (const auto* b = std::get_if<Term::Binary>(&t->node())) {
    TermPtr l = substitute(b->lhs, subst);
    TermPtr r = substitute(b->rhs, subst);
    if (l == b->lhs && r == b->rhs) return t;
    return binary(b->op, std::move(l), std::move(r));
  }
  if (const auto* n = std::get_if<Term::Negate>(&t->node())) {
    TermPtr o = substitute(n->operand, subst);
    if (o == n->operand) return t;
    return negate(std::move(o));
  }
  return t;
}

FormulaPtr substitute(const FormulaPtr& f, const std::map<std::string, TermPtr>& subst) {
  if (const auto* c = std::get_if<Formula::Compare>(&f->node())) {
    TermPtr l = substitute(c->lhs, subst);
    TermPtr r = substitute(c->rhs, subst);
    if (l == c->lhs && r == c->rhs) return f;
    return compare(c->op, std::move(l), std::move(r));
  }
  if (const auto* n = std::get_if<Formula::Not>(&f->node())) {
    FormulaPtr o = substitute(n->operand, subst);
    if (o == n->operand) return f;
    return lnot(std::move(o));
  }
  if (const auto* a = std::get_if<Formula::And>(&f->node())) {
    FormulaPtr l = substitute(a->lhs, subst);
    FormulaPtr r = substitute(a->rhs, subst);
    if (l == a->lhs && r == a->rhs) return f;
    return land(std::move(l), std::move(r));
  }
  if (const auto* o = std::get_if<Formula::Or>(&f->node())) {
    FormulaPtr l = substitute(o->lhs, subst);
    FormulaPtr r = substitute(o->rhs, subst);
    if (l == o->lhs && r == o->rhs) return f;
    return lor(std::move(l), std::move(r));
  }
  if (const auto* i = std::get_if<Formula::Implies>(&f->node())) {
    FormulaPtr l = substitute(i->lhs, subst);
    FormulaPtr r = substitute(i->rhs, subst);
    if (l == i->lhs && r == i->rhs) return f;
    return implies(std::move(l), std::move(r));
  }
  return f;
}

bool implies_on_domains(const Formula& f, const Formula& g, const Signature& sig,
                        unsigned long long max_states) {
  std::set<std::string> vars = free_vars(f);
  std::set<std::string> gv = free_vars(g);
  vars.insert(gv.begin(), gv.end());

  if (domain_state_count(sig, vars) > Int(static_cast<unsigned long>(max_states)))
    throw StateSpaceTooLarge("implication check needs more than " +
                             std::to_string(max_states) + " states");

  bool holds = true;
  for_each_state(sig, vars, [&](const State& s) {
    if (eval_formula(f, s) && !eval_formula(g, s)) {
      holds = false;
      return false;
    }
    return true;
  });
  return holds;
}

}  // namespace covprob
