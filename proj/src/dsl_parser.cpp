#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <utility>

#include <json.hpp>

#include "covprob/dsl.hpp"
#include "dsl_internal.hpp"

namespace covprob {

namespace {

using dsl::Tok;
using dsl::Token;
using dsl::tok_name;

bool is_qualified(const std::string& name) { return name.find('.') != std::string::npos; }

// Untyped expression tree; converted to Term or Formula by context.
struct UExpr;
using UExprPtr = std::shared_ptr<UExpr>;

struct UExpr {
  enum class Kind { IntL, BoolL, Var, Not, Neg, Bin };
  Kind kind = Kind::IntL;
  Int ival;
  bool bval = false;
  std::string name;
  Tok op = Tok::End;
  UExprPtr lhs, rhs;
  SourceSpan span;
};

UExprPtr uexpr(UExpr e) { return std::make_shared<UExpr>(std::move(e)); }

TermPtr to_term(const UExprPtr& e);
FormulaPtr to_formula(const UExprPtr& e);

TermPtr to_term(const UExprPtr& e) {
  switch (e->kind) {
    case UExpr::Kind::IntL:
      return lit(e->ival);
    case UExpr::Kind::Var:
      return var(e->name);
    case UExpr::Kind::Neg:
      return negate(to_term(e->lhs));
    case UExpr::Kind::Bin:
      switch (e->op) {
        case Tok::Plus:
          return binary(BinaryOp::Add, to_term(e->lhs), to_term(e->rhs));
        case Tok::Minus:
          return binary(BinaryOp::Sub, to_term(e->lhs), to_term(e->rhs));
        case Tok::Star:
          return binary(BinaryOp::Mul, to_term(e->lhs), to_term(e->rhs));
        case Tok::Slash:
          return binary(BinaryOp::Div, to_term(e->lhs), to_term(e->rhs));
        case Tok::Percent:
          return binary(BinaryOp::Mod, to_term(e->lhs), to_term(e->rhs));
        default:
          break;
      }
      break;
    default:
      break;
  }
  throw ParseError("SyntaxError", "expected an integer term", e->span);
}

FormulaPtr to_formula(const UExprPtr& e) {
  switch (e->kind) {
    case UExpr::Kind::BoolL:
      return truth(e->bval);
    case UExpr::Kind::Var:
      // Bare identifier in formula position: nonzero test.
      return compare(CmpOp::Ne, var(e->name), lit(0));
    case UExpr::Kind::Not:
      return lnot(to_formula(e->lhs));
    case UExpr::Kind::Bin:
      switch (e->op) {
        case Tok::EqEq:
          return compare(CmpOp::Eq, to_term(e->lhs), to_term(e->rhs));
        case Tok::NotEq:
          return compare(CmpOp::Ne, to_term(e->lhs), to_term(e->rhs));
        case Tok::Lt:
          return compare(CmpOp::Lt, to_term(e->lhs), to_term(e->rhs));
        case Tok::Le:
          return compare(CmpOp::Le, to_term(e->lhs), to_term(e->rhs));
        case Tok::Gt:
          return compare(CmpOp::Gt, to_term(e->lhs), to_term(e->rhs));
        case Tok::Ge:
          return compare(CmpOp::Ge, to_term(e->lhs), to_term(e->rhs));
        case Tok::AndAnd:
          return land(to_formula(e->lhs), to_formula(e->rhs));
        case Tok::OrOr:
          return lor(to_formula(e->lhs), to_formula(e->rhs));
        case Tok::Arrow:
          return implies(to_formula(e->lhs), to_formula(e->rhs));
        default:
          break;
      }
      break;
    default:
      break;
  }
  throw ParseError("SyntaxError", "expected a formula", e->span);
}

enum class StmtContext { Service, Profile, Qpp };

class Parser {
 public:
  Parser(const std::string& text, const std::string& filename)
      : tokens_(dsl::lex(text, filename)) {}

  SystemModel parse_model_text();
  UsageProfile parse_profile_text(const SystemModel& m);
  std::pair<SystemModel, UsageProfile> parse_qpp_text();
  FormulaPtr parse_formula_only();
  TermPtr parse_term_only();

 private:
  std::vector<Token> tokens_;
  size_t pos_ = 0;

  const Token& peek(size_t k = 0) const {
    size_t i = pos_ + k;
    return tokens_[std::min(i, tokens_.size() - 1)];
  }
  const Token& advance() { return tokens_[std::min(pos_++, tokens_.size() - 1)]; }
  bool at(Tok kind) const { return peek().kind == kind; }
  bool at_word(const char* w) const { return at(Tok::Ident) && peek().text == w; }

  [[noreturn]] void fail(const std::string& message) const {
    throw ParseError("SyntaxError", message + ", got " + tok_name(peek().kind), peek().span);
  }
  const Token& expect(Tok kind, const std::string& what) {
    if (!at(kind)) fail("expected " + what);
    return advance();
  }
  std::string expect_ident(const std::string& what) { return expect(Tok::Ident, what).text; }
  void expect_word(const char* w) {
    if (!at_word(w)) fail(std::string("expected '") + w + "'");
    advance();
  }
  bool accept(Tok kind) {
    if (!at(kind)) return false;
    advance();
    return true;
  }

  // name := ID | ID '.' ID
  std::string parse_name() {
    std::string n = expect_ident("a name");
    if (at(Tok::Dot)) {
      advance();
      n += "." + expect_ident("a name after '.'");
    }
    return n;
  }

  Int parse_signed_int() {
    bool neg = accept(Tok::Minus);
    Int v = expect(Tok::IntLit, "an integer").value;
    return neg ? Int(-v) : v;
  }

  Rational decimal_to_rational(const std::string& text) {
    auto dot = text.find('.');
    std::string digits = text.substr(0, dot) + text.substr(dot + 1);
    size_t frac = text.size() - dot - 1;
    Int den;
    mpz_ui_pow_ui(den.get_mpz_t(), 10, frac);
    return make_rational(Int(digits), den);
  }

  Rational parse_rational(bool allow_negative) {
    bool neg = allow_negative && accept(Tok::Minus);
    Rational r;
    if (at(Tok::DecimalLit)) {
      r = decimal_to_rational(advance().text);
    } else {
      Int num = expect(Tok::IntLit, "a number").value;
      if (accept(Tok::Slash)) {
        Int den = expect(Tok::IntLit, "a denominator").value;
        if (den == 0) throw ParseError("SyntaxError", "zero denominator", peek().span);
        r = make_rational(num, den);
      } else {
        r = Rational(num);
      }
    }
    return neg ? Rational(-r) : r;
  }

  Distribution parse_dist() {
    const Token& head = peek();
    if (at_word("uniform")) {
      advance();
      expect(Tok::LParen, "'('");
      Int lo = parse_signed_int();
      expect(Tok::Comma, "','");
      Int hi = parse_signed_int();
      expect(Tok::RParen, "')'");
      try {
        return Distribution::uniform(lo, hi);
      } catch (const InvalidDistribution& e) {
        throw ParseError("InvalidDistribution", e.what(), head.span);
      }
    }
    if (at_word("normal_d")) {
      advance();
      expect(Tok::LParen, "'('");
      Rational mu = parse_rational(true);
      expect(Tok::Comma, "','");
      Rational sigma = parse_rational(true);
      expect(Tok::RParen, "')'");
      try {
        return Distribution::discretized_normal(mu, sigma);
      } catch (const InvalidDistribution& e) {
        throw ParseError("InvalidDistribution", e.what(), head.span);
      }
    }
    if (at_word("pmf")) {
      advance();
      expect(Tok::LBrace, "'{'");
      std::vector<std::pair<Int, Rational>> points;
      do {
        Int value = parse_signed_int();
        expect(Tok::Colon, "':'");
        points.emplace_back(value, parse_rational(false));
      } while (accept(Tok::Comma));
      expect(Tok::RBrace, "'}'");
      try {
        return Distribution::pmf(std::move(points));
      } catch (const InvalidDistribution& e) {
        throw ParseError("InvalidDistribution", e.what(), head.span);
      }
    }
    fail("expected a distribution (uniform, normal_d, pmf)");
  }

  // Precedence-climbing over the unified expression grammar.
  UExprPtr parse_expr() { return parse_implies(); }

  UExprPtr parse_implies() {
    UExprPtr lhs = parse_or();
    if (at(Tok::Arrow)) {
      const Token& t = advance();
      UExprPtr rhs = parse_implies();  // right-associative
      UExpr e;
      e.kind = UExpr::Kind::Bin;
      e.op = Tok::Arrow;
      e.lhs = std::move(lhs);
      e.rhs = std::move(rhs);
      e.span = t.span;
      return uexpr(std::move(e));
    }
    return lhs;
  }

  UExprPtr parse_or() {
    UExprPtr lhs = parse_and();
    while (at(Tok::OrOr)) {
      const Token& t = advance();
      UExpr e;
      e.kind = UExpr::Kind::Bin;
      e.op = Tok::OrOr;
      e.lhs = std::move(lhs);
      e.rhs = parse_and();
      e.span = t.span;
      lhs = uexpr(std::move(e));
    }
    return lhs;
  }

  UExprPtr parse_and() {
    UExprPtr lhs = parse_cmp();
    while (at(Tok::AndAnd)) {
      const Token& t = advance();
      UExpr e;
      e.kind = UExpr::Kind::Bin;
      e.op = Tok::AndAnd;
      e.lhs = std::move(lhs);
      e.rhs = parse_cmp();
      e.span = t.span;
      lhs = uexpr(std::move(e));
    }
    return lhs;
  }

  bool at_cmp() const {
    switch (peek().kind) {
      case Tok::EqEq:
      case Tok::NotEq:
      case Tok::Lt:
      case Tok::Le:
      case Tok::Gt:
      case Tok::Ge:
        return true;
      default:
        return false;
    }
  }

  UExprPtr parse_cmp() {
    UExprPtr lhs = parse_add();
    if (!at_cmp()) return lhs;
    const Token& t = advance();
    UExpr e;
    e.kind = UExpr::Kind::Bin;
    e.op = t.kind;
    e.lhs = std::move(lhs);
    e.rhs = parse_add();
    e.span = t.span;
    if (at_cmp())
      throw ParseError("SyntaxError", "comparisons cannot be chained", peek().span);
    return uexpr(std::move(e));
  }

  UExprPtr parse_add() {
    UExprPtr lhs = parse_mul();
    while (at(Tok::Plus) || at(Tok::Minus)) {
      const Token& t = advance();
      UExpr e;
      e.kind = UExpr::Kind::Bin;
      e.op = t.kind;
      e.lhs = std::move(lhs);
      e.rhs = parse_mul();
      e.span = t.span;
      lhs = uexpr(std::move(e));
    }
    return lhs;
  }

  UExprPtr parse_mul() {
    UExprPtr lhs = parse_unary();
    while (at(Tok::Star) || at(Tok::Slash) || at(Tok::Percent)) {
      const Token& t = advance();
      UExpr e;
      e.kind = UExpr::Kind::Bin;
      e.op = t.kind;
      e.lhs = std::move(lhs);
      e.rhs = parse_unary();
      e.span = t.span;
      lhs = uexpr(std::move(e));
    }
    return lhs;
  }

  UExprPtr parse_unary() {
    if (at(Tok::Bang)) {
      const Token& t = advance();
      UExpr e;
      e.kind = UExpr::Kind::Not;
      e.lhs = parse_unary();
      e.span = t.span;
      return uexpr(std::move(e));
    }
    if (at(Tok::Minus)) {
      const Token& t = advance();
      UExpr e;
      e.kind = UExpr::Kind::Neg;
      e.lhs = parse_unary();
      e.span = t.span;
      return uexpr(std::move(e));
    }
    return parse_primary();
  }

  UExprPtr parse_primary() {
    const Token& t = peek();
    if (at(Tok::IntLit)) {
      advance();
      UExpr e;
      e.kind = UExpr::Kind::IntL;
      e.ival = t.value;
      e.span = t.span;
      return uexpr(std::move(e));
    }
    if (at_word("true") || at_word("false")) {
      bool v = t.text == "true";
      advance();
      UExpr e;
      e.kind = UExpr::Kind::BoolL;
      e.bval = v;
      e.span = t.span;
      return uexpr(std::move(e));
    }
    if (at(Tok::Ident)) {
      SourceSpan span = t.span;
      std::string name = parse_name();
      UExpr e;
      e.kind = UExpr::Kind::Var;
      e.name = std::move(name);
      e.span = span;
      return uexpr(std::move(e));
    }
    if (at(Tok::LParen)) {
      advance();
      UExprPtr inner = parse_expr();
      expect(Tok::RParen, "')'");
      return inner;
    }
    fail("expected an expression");
  }

  FormulaPtr parse_guard_formula() { return to_formula(parse_expr()); }

  // ['if' '(' F ')'] action. In QPP context a ':' follows the guard and
  // semicolons are optional; elsewhere each statement ends with ';'.
  Statement parse_statement(StmtContext ctx) {
    const Token& head = peek();

    if (ctx != StmtContext::Qpp && at_word("repeat")) {
      advance();
      const Token& count_tok = expect(Tok::IntLit, "a repeat count");
      if (count_tok.value < 1 || !count_tok.value.fits_ulong_p())
        throw ParseError("InvalidRepeat", "repeat count must be a positive integer literal",
                         count_tok.span);
      expect(Tok::LBrace, "'{'");
      std::vector<Statement> body;
      while (!at(Tok::RBrace)) body.push_back(parse_statement(ctx));
      expect(Tok::RBrace, "'}'");
      Statement s = make_repeat(count_tok.value.get_ui(), std::move(body));
      s.span = head.span;
      return s;
    }

    FormulaPtr guard;
    if (at_word("if")) {
      advance();
      expect(Tok::LParen, "'('");
      guard = parse_guard_formula();
      expect(Tok::RParen, "')'");
      if (ctx == StmtContext::Qpp) expect(Tok::Colon, "':'");
    }

    Statement s = parse_action(ctx);
    if (guard != nullptr) s.guard = std::move(guard);
    s.span = head.span;

    if (ctx == StmtContext::Qpp) {
      accept(Tok::Semi);
    } else {
      expect(Tok::Semi, "';'");
    }
    return s;
  }

  Statement parse_action(StmtContext ctx) {
    if (at_word("abort") || (ctx == StmtContext::Qpp && at_word("ABORT"))) {
      advance();
      return make_abort();
    }

    std::string name = parse_name();

    if (at(Tok::LParen)) {  // call without result target
      return parse_call_tail(ctx, name, "");
    }
    if (at(Tok::Tilde)) {
      advance();
      return make_sample(name, parse_dist());
    }
    expect(Tok::Assign, "'=', '~' or '('");

    // call with result target?
    bool call_q = peek(0).kind == Tok::Ident && peek(1).kind == Tok::Dot &&
                  peek(2).kind == Tok::Ident && peek(3).kind == Tok::LParen;
    bool call_plain = peek(0).kind == Tok::Ident && peek(1).kind == Tok::LParen &&
                      !at_word("true") && !at_word("false");
    if (call_q || (call_plain && ctx == StmtContext::Qpp)) {
      std::string callee = parse_name();
      return parse_call_tail(ctx, callee, name);
    }
    if (call_plain) {
      throw ParseError("SyntaxError", "calls must name Component.service", peek().span);
    }
    return make_assign(name, to_term(parse_expr()));
  }

  Statement parse_call_tail(StmtContext ctx, const std::string& callee,
                            const std::string& result_target) {
    std::string comp, svc;
    auto dot = callee.find('.');
    if (dot == std::string::npos) {
      if (ctx != StmtContext::Qpp)
        throw ParseError("SyntaxError", "calls must name Component.service", peek().span);
      svc = callee;  // resolved to the flat component later
    } else {
      comp = callee.substr(0, dot);
      svc = callee.substr(dot + 1);
    }
    expect(Tok::LParen, "'('");
    std::vector<TermPtr> args;
    if (!at(Tok::RParen)) {
      do {
        args.push_back(to_term(parse_expr()));
      } while (accept(Tok::Comma));
    }
    expect(Tok::RParen, "')'");
    return make_call(std::move(comp), std::move(svc), std::move(args), nullptr, result_target);
  }

  VarType parse_type() {
    if (at_word("int")) {
      advance();
      return VarType::Int;
    }
    if (at_word("bool")) {
      advance();
      return VarType::Bool;
    }
    fail("expected 'int' or 'bool'");
  }

  std::vector<Param> parse_params() {
    expect(Tok::LParen, "'('");
    std::vector<Param> params;
    if (!at(Tok::RParen)) {
      do {
        Param p;
        p.type = parse_type();
        p.name = expect_ident("a parameter name");
        params.push_back(std::move(p));
      } while (accept(Tok::Comma));
    }
    expect(Tok::RParen, "')'");
    return params;
  }

  ServiceModel parse_service(const std::string& component) {
    ServiceModel s;
    s.component = component;
    s.span = peek().span;
    s.name = expect_ident("a service name");
    s.params = parse_params();
    s.pre = truth(true);
    s.post = truth(true);
    s.cov = truth(true);

    bool saw_pre = false, saw_post = false, saw_cov = false, saw_cost = false;
    while (true) {
      if (at_word("requires")) {
        if (saw_pre) fail("duplicate requires clause");
        saw_pre = true;
        advance();
        s.pre = parse_guard_formula();
      } else if (at_word("ensures")) {
        if (saw_post) fail("duplicate ensures clause");
        saw_post = true;
        advance();
        s.post = parse_guard_formula();
      } else if (at_word("covered")) {
        if (saw_cov) fail("duplicate covered clause");
        saw_cov = true;
        advance();
        s.cov = parse_guard_formula();
      } else if (at_word("cost")) {
        if (saw_cost) fail("duplicate cost clause");
        saw_cost = true;
        advance();
        s.cost = parse_rational(false);
      } else {
        break;
      }
    }

    expect(Tok::LBrace, "'{'");
    while (!at(Tok::RBrace)) s.beh.push_back(parse_statement(StmtContext::Service));
    expect(Tok::RBrace, "'}'");
    return s;
  }

  Component parse_component() {
    Component c;
    c.span = peek().span;
    expect_word("component");
    c.name = expect_ident("a component name");
    expect(Tok::LBrace, "'{'");
    while (!at(Tok::RBrace)) {
      if (at_word("state")) {
        advance();
        StateVar v;
        v.span = peek().span;
        v.type = parse_type();
        v.name = expect_ident("a state variable name");
        expect(Tok::Assign, "'='");
        if (at_word("uniform") || at_word("normal_d") || at_word("pmf")) {
          v.init = parse_dist();
        } else {
          v.init = parse_signed_int();
        }
        expect(Tok::Semi, "';'");
        c.state_vars.push_back(std::move(v));
      } else if (at_word("service")) {
        advance();
        c.services.push_back(parse_service(c.name));
      } else {
        fail("expected 'state' or 'service'");
      }
    }
    expect(Tok::RBrace, "'}'");
    return c;
  }

  void expect_end() {
    if (!at(Tok::End)) fail("expected end of input");
  }

  // --- resolution -------------------------------------------------------

  using Resolver = std::function<std::optional<std::string>(const std::string&)>;

  static FormulaPtr resolve_formula(const FormulaPtr& f, const Resolver& r,
                                    const SourceSpan& span, const char* category) {
    std::map<std::string, TermPtr> subst;
    for (const auto& v : free_vars(*f)) {
      auto canon = r(v);
      if (!canon) throw ParseError(category, "unknown variable " + v, span);
      if (*canon != v) subst[v] = var(*canon);
    }
    return subst.empty() ? f : substitute(f, subst);
  }

  static TermPtr resolve_term(const TermPtr& t, const Resolver& r, const SourceSpan& span,
                              const char* category) {
    std::map<std::string, TermPtr> subst;
    for (const auto& v : free_vars(*t)) {
      auto canon = r(v);
      if (!canon) throw ParseError(category, "unknown variable " + v, span);
      if (*canon != v) subst[v] = var(*canon);
    }
    return subst.empty() ? t : substitute(t, subst);
  }

  static void resolve_statements(std::vector<Statement>& stmts, const SystemModel& m,
                                 const Resolver& vars,
                                 const std::function<std::string(const std::string&, const SourceSpan&)>&
                                     target_resolver,
                                 bool allow_plain_callee) {
    for (auto& st : stmts) {
      if (st.kind == Statement::Kind::Repeat) {
        resolve_statements(st.body, m, vars, target_resolver, allow_plain_callee);
        continue;
      }
      st.guard = resolve_formula(st.guard, vars, st.span, "UnknownReference");
      switch (st.kind) {
        case Statement::Kind::Assign:
          st.value = resolve_term(st.value, vars, st.span, "UnknownReference");
          st.target = target_resolver(st.target, st.span);
          break;
        case Statement::Kind::Sample:
          st.target = target_resolver(st.target, st.span);
          break;
        case Statement::Kind::Call: {
          if (st.callee_component.empty() && !allow_plain_callee)
            throw ParseError("SyntaxError", "calls must name Component.service", st.span);
          const ServiceModel* callee = st.callee_component.empty()
                                           ? nullptr
                                           : m.find_service(st.callee_component, st.callee_service);
          if (!st.callee_component.empty() && callee == nullptr)
            throw ParseError("UnknownReference",
                             "unknown service " + st.callee_component + "." + st.callee_service,
                             st.span);
          for (auto& a : st.args) a = resolve_term(a, vars, st.span, "UnknownReference");
          if (!st.target.empty()) st.target = target_resolver(st.target, st.span);
          break;
        }
        case Statement::Kind::Abort:
        case Statement::Kind::Repeat:
          break;
      }
    }
  }

  static void resolve_model(SystemModel& m) {
    std::set<std::string> comp_names;
    for (const auto& c : m.components) {
      if (!comp_names.insert(c.name).second)
        throw ParseError("DuplicateName", "duplicate component " + c.name, c.span);
      std::set<std::string> vars, svcs;
      for (const auto& v : c.state_vars)
        if (!vars.insert(v.name).second)
          throw ParseError("DuplicateName", "duplicate state variable " + c.name + "." + v.name,
                           v.span);
      for (const auto& s : c.services)
        if (!svcs.insert(s.name).second)
          throw ParseError("DuplicateName", "duplicate service " + c.name + "." + s.name, s.span);
    }

    for (auto& c : m.components) {
      for (auto& s : c.services) {
        std::set<std::string> params;
        for (const auto& p : s.params) params.insert(p.name);

        auto make_resolver = [&m, &c, params](bool with_result) {
          return [&m, &c, params, with_result](
                     const std::string& name) -> std::optional<std::string> {
            if (!is_qualified(name)) {
              if (params.count(name)) return name;
              if (with_result && name == "result") return name;
              if (c.find_state_var(name) != nullptr) return c.name + "." + name;
              return std::nullopt;
            }
            auto dot = name.find('.');
            const Component* oc = m.find_component(name.substr(0, dot));
            if (oc != nullptr && oc->find_state_var(name.substr(dot + 1)) != nullptr) return name;
            return std::nullopt;
          };
        };
        Resolver contract_scope = make_resolver(false);
        Resolver body_scope = make_resolver(true);

        s.pre = resolve_formula(s.pre, contract_scope, s.span, "UnknownReference");
        s.cov = resolve_formula(s.cov, contract_scope, s.span, "UnknownReference");
        s.post = resolve_formula(s.post, body_scope, s.span, "UnknownReference");

        auto target_resolver = [&body_scope](const std::string& name,
                                             const SourceSpan& span) -> std::string {
          auto canon = body_scope(name);
          if (!canon)
            throw ParseError("UnknownReference", "unknown assignment target " + name, span);
          return *canon;
        };
        resolve_statements(s.beh, m, body_scope, target_resolver, false);
      }
    }
  }

 public:
  static void resolve_profile(UsageProfile& p, const SystemModel& m) {
    Resolver vars = [&m](const std::string& name) -> std::optional<std::string> {
      if (!is_qualified(name)) return name;  // profile local
      auto dot = name.find('.');
      const Component* c = m.find_component(name.substr(0, dot));
      if (c != nullptr && c->find_state_var(name.substr(dot + 1)) != nullptr) return name;
      return std::nullopt;
    };
    auto target_resolver = [&m](const std::string& name, const SourceSpan& span) -> std::string {
      if (!is_qualified(name)) return name;
      auto dot = name.find('.');
      const Component* c = m.find_component(name.substr(0, dot));
      if (c == nullptr || c->find_state_var(name.substr(dot + 1)) == nullptr)
        throw ParseError("UnknownReference", "unknown state variable " + name, span);
      return name;
    };
    resolve_statements(p.statements, m, vars, target_resolver, false);
  }
};

SystemModel Parser::parse_model_text() {
  SystemModel m;
  while (!at(Tok::End)) m.components.push_back(parse_component());
  if (m.components.empty()) fail("expected at least one component");
  resolve_model(m);
  return m;
}

UsageProfile Parser::parse_profile_text(const SystemModel& m) {
  UsageProfile p;
  p.span = peek().span;
  expect_word("profile");
  p.name = expect_ident("a profile name");
  expect(Tok::LBrace, "'{'");
  while (!at(Tok::RBrace)) p.statements.push_back(parse_statement(StmtContext::Profile));
  expect(Tok::RBrace, "'}'");
  expect_end();
  resolve_profile(p, m);
  return p;
}

std::pair<SystemModel, UsageProfile> Parser::parse_qpp_text() {
  // Globals, then one fun per service plus main.
  std::vector<StateVar> globals;
  while (at_word("int") || at_word("bool")) {
    StateVar v;
    v.span = peek().span;
    v.type = parse_type();
    v.name = expect_ident("a global name");
    v.init = Int(0);
    if (accept(Tok::Assign)) v.init = parse_signed_int();
    accept(Tok::Semi);
    globals.push_back(std::move(v));
  }

  struct Fun {
    std::string name;
    std::vector<Param> params;
    std::vector<Statement> body;
    SourceSpan span;
  };
  std::vector<Fun> funs;
  while (at_word("fun")) {
    Fun f;
    f.span = peek().span;
    advance();
    f.name = expect_ident("a function name");
    f.params = parse_params();
    expect(Tok::Colon, "':'");
    while (!at_word("fun") && !at(Tok::End)) f.body.push_back(parse_statement(StmtContext::Qpp));
    funs.push_back(std::move(f));
  }
  expect_end();

  SystemModel m;
  Component prog;
  prog.name = "Program";
  prog.state_vars = std::move(globals);

  const Fun* main_fun = nullptr;
  for (auto& f : funs) {
    if (f.name == "main") {
      if (main_fun != nullptr)
        throw ParseError("DuplicateName", "duplicate main function", f.span);
      main_fun = &f;
      continue;
    }
    ServiceModel s;
    s.name = f.name;
    s.component = "Program";
    s.params = f.params;
    s.pre = truth(true);
    s.post = truth(true);
    s.cov = truth(true);
    s.beh = f.body;
    s.span = f.span;

    // Leading `if (!(F)): ABORT` encodes the coverage region.
    if (!s.beh.empty() && s.beh.front().kind == Statement::Kind::Abort &&
        !is_true_literal(*s.beh.front().guard)) {
      const Formula& g = *s.beh.front().guard;
      if (const auto* n = std::get_if<Formula::Not>(&g.node())) {
        s.cov = n->operand;
      } else {
        s.cov = lnot(s.beh.front().guard);
      }
      s.beh.erase(s.beh.begin());
    }
    prog.services.push_back(std::move(s));
  }
  if (main_fun == nullptr)
    throw ParseError("SyntaxError", "missing main function", SourceSpan{"<qpp>", 0, 0, 0});

  m.components.push_back(std::move(prog));
  const Component& pc = m.components.front();

  // Fix up plain callees and resolve names against the flat component.
  auto resolve_fun = [&m, &pc](std::vector<Statement>& stmts, const std::set<std::string>& params,
                               bool in_profile) {
    std::function<void(std::vector<Statement>&)> fix = [&](std::vector<Statement>& list) {
      for (auto& st : list) {
        if (st.kind == Statement::Kind::Call && st.callee_component.empty())
          st.callee_component = "Program";
        if (st.kind == Statement::Kind::Repeat) fix(st.body);
      }
    };
    fix(stmts);

    Resolver vars = [&pc, params, in_profile](
                        const std::string& name) -> std::optional<std::string> {
      if (is_qualified(name)) {
        auto dot = name.find('.');
        if (name.substr(0, dot) == pc.name &&
            pc.find_state_var(name.substr(dot + 1)) != nullptr)
          return name;
        return std::nullopt;
      }
      if (params.count(name)) return name;
      if (pc.find_state_var(name) != nullptr) return pc.name + "." + name;
      if (!in_profile && name == "result") return name;
      if (in_profile) return name;  // profile local
      return std::nullopt;
    };
    auto target_resolver = [&vars](const std::string& name, const SourceSpan& span) {
      auto canon = vars(name);
      if (!canon) throw ParseError("UnknownReference", "unknown assignment target " + name, span);
      return *canon;
    };
    resolve_statements(stmts, m, vars, target_resolver, true);
  };

  for (auto& s : m.components.front().services) {
    std::set<std::string> params;
    for (const auto& p : s.params) params.insert(p.name);
    Resolver contract_scope = [&pc, params](const std::string& name) -> std::optional<std::string> {
      if (is_qualified(name)) {
        auto dot = name.find('.');
        if (name.substr(0, dot) == pc.name &&
            pc.find_state_var(name.substr(dot + 1)) != nullptr)
          return name;
        return std::nullopt;
      }
      if (params.count(name)) return name;
      if (pc.find_state_var(name) != nullptr) return pc.name + "." + name;
      return std::nullopt;
    };
    s.cov = resolve_formula(s.cov, contract_scope, s.span, "UnknownReference");
    resolve_fun(s.beh, params, false);
  }

  UsageProfile profile;
  profile.name = "main";
  profile.span = main_fun->span;
  profile.statements = main_fun->body;
  resolve_fun(profile.statements, {}, true);

  return {std::move(m), std::move(profile)};
}

FormulaPtr Parser::parse_formula_only() {
  FormulaPtr f = to_formula(parse_expr());
  expect_end();
  return f;
}

TermPtr Parser::parse_term_only() {
  TermPtr t = to_term(parse_expr());
  expect_end();
  return t;
}

}  // namespace

SystemModel parse_model(const std::string& text, const std::string& filename) {
  return Parser(text, filename).parse_model_text();
}

UsageProfile parse_profile(const std::string& text, const SystemModel& m,
                           const std::string& filename) {
  return Parser(text, filename).parse_profile_text(m);
}

FormulaPtr parse_formula(const std::string& text, const std::string& filename) {
  return Parser(text, filename).parse_formula_only();
}

TermPtr parse_term(const std::string& text, const std::string& filename) {
  return Parser(text, filename).parse_term_only();
}

std::pair<SystemModel, UsageProfile> parse_qpp(const std::string& text,
                                               const std::string& filename) {
  return Parser(text, filename).parse_qpp_text();
}

ProofGoals parse_goals(const std::string& json_text, const SystemModel& m,
                       const std::string& filename) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("SyntaxError", e.what(), SourceSpan{filename, 0, 0, 0});
  }
  SourceSpan here{filename, 0, 0, 0};

  if (!root.is_object() || !root.contains("service") || !root["service"].is_string())
    throw ParseError("SyntaxError", "goal file needs a \"service\" string", here);

  ProofGoals goals;
  goals.service = root["service"].get<std::string>();
  const ServiceModel* svc = m.find_service_qualified(goals.service);
  if (svc == nullptr)
    throw ParseError("UnknownReference", "unknown service " + goals.service, here);

  if (root.contains("tool")) {
    if (!root["tool"].is_string())
      throw ParseError("SyntaxError", "\"tool\" must be a string", here);
    goals.tool = root["tool"].get<std::string>();
  }
  if (root.contains("auxiliary")) {
    if (!root["auxiliary"].is_array())
      throw ParseError("SyntaxError", "\"auxiliary\" must be an array of names", here);
    for (const auto& a : root["auxiliary"]) {
      if (!a.is_string())
        throw ParseError("SyntaxError", "\"auxiliary\" must be an array of names", here);
      goals.auxiliaries.push_back(a.get<std::string>());
    }
  }
  if (!root.contains("goals") || !root["goals"].is_array())
    throw ParseError("SyntaxError", "goal file needs a \"goals\" array", here);

  const Component* comp = m.find_component(svc->component);
  std::set<std::string> params;
  for (const auto& p : svc->params) params.insert(p.name);
  std::set<std::string> aux(goals.auxiliaries.begin(), goals.auxiliaries.end());

  auto resolve = [&](FormulaPtr f) -> FormulaPtr {
    std::map<std::string, TermPtr> subst;
    for (const auto& v : free_vars(*f)) {
      std::optional<std::string> canon;
      if (is_qualified(v)) {
        auto dot = v.find('.');
        const Component* oc = m.find_component(v.substr(0, dot));
        if (oc != nullptr && oc->find_state_var(v.substr(dot + 1)) != nullptr) canon = v;
      } else if (params.count(v) || v == "result" || aux.count(v)) {
        canon = v;
      } else if (comp != nullptr && comp->find_state_var(v) != nullptr) {
        canon = svc->component + "." + v;
      }
      if (!canon)
        throw ParseError("UnknownVariable",
                         "unknown variable " + v + " in goals for " + goals.service, here);
      if (*canon != v) subst[v] = var(*canon);
    }
    return subst.empty() ? f : substitute(f, subst);
  };

  for (const auto& g : root["goals"]) {
    if (!g.is_object())
      throw ParseError("SyntaxError", "each goal must be an object", here);
    Sequent seq;
    for (const char* key : {"antecedent", "succedent"}) {
      if (!g.contains(key)) continue;
      if (!g[key].is_array())
        throw ParseError("SyntaxError", std::string("\"") + key + "\" must be an array", here);
      for (const auto& s : g[key]) {
        if (!s.is_string())
          throw ParseError("SyntaxError", std::string("\"") + key + "\" must hold strings", here);
        FormulaPtr f = resolve(parse_formula(s.get<std::string>(), filename));
        if (std::string(key) == "antecedent")
          seq.antecedent.push_back(std::move(f));
        else
          seq.succedent.push_back(std::move(f));
      }
    }
    goals.goals.push_back(std::move(seq));
  }
  return goals;
}

}  // namespace covprob
