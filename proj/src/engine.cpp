#include "covprob/engine.hpp"

#include <algorithm>
#include <functional>
#include <set>
#include <thread>
#include <utility>
#include <variant>

#include "covprob/dsl.hpp"

namespace covprob {

Rational ExactResult::error_mass() const {
  Rational total(0);
  for (const auto& [name, mass] : per_service) total += mass;
  return total;
}

namespace {

using u64 = unsigned long long;
using u128 = unsigned __int128;

// ---------------------------------------------------------------------------
// Compiled representation: variables become slots (globals for component
// state, frame slots for parameters/result/profile locals), formulas and
// terms become slot-addressed trees, distributions get exact cumulative
// thresholds for sampling.

struct SlotRef {
  bool global = true;
  int index = 0;
};

struct CTerm {
  enum class K { Lit, Slot, Bin, Neg };
  K k = K::Lit;
  Int value;
  SlotRef slot;
  BinaryOp op = BinaryOp::Add;
  std::unique_ptr<CTerm> l, r;
};

struct CFormula {
  enum class K { Bool, Cmp, Not, And, Or, Implies };
  K k = K::Bool;
  bool b = true;
  CmpOp op = CmpOp::Eq;
  std::unique_ptr<CTerm> tl, tr;
  std::unique_ptr<CFormula> l, r;
};

struct CDist {
  Distribution dist;
  std::vector<Int> values;
  std::vector<Rational> mass;
  std::vector<u128> thresholds;  // cumulative probability scaled by 2^64

  explicit CDist(Distribution d) : dist(std::move(d)) {}
};

struct CStmt {
  Statement::Kind kind = Statement::Kind::Abort;
  std::unique_ptr<CFormula> guard;
  bool guard_true = true;
  bool has_target = false;
  SlotRef target;
  std::unique_ptr<CTerm> value;  // Assign
  int callee = -1;               // Call
  std::vector<std::unique_ptr<CTerm>> args;
  int dist = -1;  // Sample
  std::string debug_target;
};

struct CService {
  std::string qualified;
  int param_count = 0;
  int result_slot = 0;
  int frame_size = 0;
  std::unique_ptr<CFormula> cov, pre, post;
  bool cov_true = true, pre_true = true, post_true = true;
  std::vector<CStmt> body;
  Rational cost = Rational(1);
  std::set<int> may_read_globals;
};

struct GlobalInit {
  bool is_dist = false;
  Int value;
  int dist = -1;
};

struct Program {
  std::vector<std::string> global_names;
  std::vector<GlobalInit> global_init;
  std::map<std::string, int> global_index;
  std::vector<CService> services;
  std::map<std::string, int> service_index;
  std::vector<CDist> dists;
  std::vector<CStmt> main_stmts;  // synthetic initializer samples, then profile
  std::vector<std::string> local_names;
  std::map<std::string, int> local_index;
  std::string profile_name;
  std::vector<std::vector<int>> live;  // per main stmt: sorted unified slot ids

  int global_count() const { return static_cast<int>(global_names.size()); }
  int local_count() const { return static_cast<int>(local_names.size()); }
};

CDist make_cdist(const Distribution& d) {
  CDist c(d);
  Rational cum(0);
  for (const auto& [value, mass] : d.points()) {
    c.values.push_back(value);
    c.mass.push_back(mass);
    cum += mass;
    Int scaled = (cum.get_num() << 64) / cum.get_den();
    Int hi_part = scaled >> 64;
    Int lo_part = scaled - (hi_part << 64);
    u128 t = (static_cast<u128>(hi_part.get_ui()) << 64) | lo_part.get_ui();
    c.thresholds.push_back(t);
  }
  c.thresholds.back() = static_cast<u128>(1) << 64;
  return c;
}

size_t pick_index(const CDist& d, u64 u) {
  for (size_t i = 0; i + 1 < d.thresholds.size(); ++i)
    if (static_cast<u128>(u) < d.thresholds[i]) return i;
  return d.thresholds.size() - 1;
}

using SlotResolver = std::function<SlotRef(const std::string&)>;

std::unique_ptr<CTerm> compile_term(const Term& t, const SlotResolver& resolve) {
  auto out = std::make_unique<CTerm>();
  if (const auto* l = std::get_if<Term::Literal>(&t.node())) {
    out->k = CTerm::K::Lit;
    out->value = l->value;
  } else if (const auto* v = std::get_if<Term::Var>(&t.node())) {
    out->k = CTerm::K::Slot;
    out->slot = resolve(v->name);
  } else if (const auto* n = std::get_if<Term::Negate>(&t.node())) {
    out->k = CTerm::K::Neg;
    out->l = compile_term(*n->operand, resolve);
  } else {
    const auto& b = std::get<Term::Binary>(t.node());
    out->k = CTerm::K::Bin;
    out->op = b.op;
    out->l = compile_term(*b.lhs, resolve);
    out->r = compile_term(*b.rhs, resolve);
  }
  return out;
}

std::unique_ptr<CFormula> compile_formula(const Formula& f, const SlotResolver& resolve) {
  auto out = std::make_unique<CFormula>();
  if (const auto* b = std::get_if<Formula::BoolLit>(&f.node())) {
    out->k = CFormula::K::Bool;
    out->b = b->value;
  } else if (const auto* c = std::get_if<Formula::Compare>(&f.node())) {
    out->k = CFormula::K::Cmp;
    out->op = c->op;
    out->tl = compile_term(*c->lhs, resolve);
    out->tr = compile_term(*c->rhs, resolve);
  } else if (const auto* n = std::get_if<Formula::Not>(&f.node())) {
    out->k = CFormula::K::Not;
    out->l = compile_formula(*n->operand, resolve);
  } else if (const auto* a = std::get_if<Formula::And>(&f.node())) {
    out->k = CFormula::K::And;
    out->l = compile_formula(*a->lhs, resolve);
    out->r = compile_formula(*a->rhs, resolve);
  } else if (const auto* o = std::get_if<Formula::Or>(&f.node())) {
    out->k = CFormula::K::Or;
    out->l = compile_formula(*o->lhs, resolve);
    out->r = compile_formula(*o->rhs, resolve);
  } else {
    const auto& i = std::get<Formula::Implies>(f.node());
    out->k = CFormula::K::Implies;
    out->l = compile_formula(*i.lhs, resolve);
    out->r = compile_formula(*i.rhs, resolve);
  }
  return out;
}

class Compiler {
 public:
  Compiler(const SystemModel& m, const UsageProfile* u) : m_(m), u_(u) {}

  Program compile() {
    for (const auto& c : m_.components) {
      for (const auto& v : c.state_vars) {
        std::string name = c.name + "." + v.name;
        p_.global_index[name] = p_.global_count();
        p_.global_names.push_back(name);
        GlobalInit init;
        if (const auto* iv = std::get_if<Int>(&v.init)) {
          init.value = *iv;
        } else {
          init.is_dist = true;
          init.dist = add_dist(std::get<Distribution>(v.init));
        }
        p_.global_init.push_back(std::move(init));
      }
    }

    for (const auto& c : m_.components) {
      for (const auto& s : c.services) {
        p_.service_index[s.qualified_name()] = static_cast<int>(p_.services.size());
        p_.services.emplace_back();
      }
    }
    for (const auto& c : m_.components)
      for (const auto& s : c.services)
        compile_service(s, p_.services[static_cast<size_t>(p_.service_index[s.qualified_name()])]);

    for (auto& svc : p_.services) compute_service_reads(svc);

    if (u_ != nullptr) {
      p_.profile_name = u_->name;
      std::vector<Statement> stmts = unroll(u_->statements);
      discover_locals(stmts);

      // Distribution-initialized state samples run before the profile.
      for (int g = 0; g < p_.global_count(); ++g) {
        if (!p_.global_init[static_cast<size_t>(g)].is_dist) continue;
        CStmt s;
        s.kind = Statement::Kind::Sample;
        s.guard_true = true;
        s.has_target = true;
        s.target = SlotRef{true, g};
        s.dist = p_.global_init[static_cast<size_t>(g)].dist;
        s.debug_target = p_.global_names[static_cast<size_t>(g)];
        p_.main_stmts.push_back(std::move(s));
      }
      SlotResolver resolve = [this](const std::string& name) { return main_slot(name); };
      for (const auto& st : stmts) p_.main_stmts.push_back(compile_stmt(st, resolve));

      compute_liveness();
    }
    return std::move(p_);
  }

 private:
  const SystemModel& m_;
  const UsageProfile* u_;
  Program p_;

  int add_dist(const Distribution& d) {
    p_.dists.push_back(make_cdist(d));
    return static_cast<int>(p_.dists.size()) - 1;
  }

  SlotRef main_slot(const std::string& name) {
    auto git = p_.global_index.find(name);
    if (git != p_.global_index.end()) return SlotRef{true, git->second};
    auto lit_ = p_.local_index.find(name);
    if (lit_ != p_.local_index.end()) return SlotRef{false, lit_->second};
    int idx = p_.local_count();
    p_.local_index[name] = idx;
    p_.local_names.push_back(name);
    return SlotRef{false, idx};
  }

  void discover_locals(const std::vector<Statement>& stmts) {
    auto touch = [this](const std::string& name) {
      if (name.find('.') == std::string::npos) main_slot(name);
    };
    for (const auto& st : stmts) {
      if (st.guard) {
        for (const auto& v : free_vars(*st.guard)) touch(v);
      }
      switch (st.kind) {
        case Statement::Kind::Assign:
          for (const auto& v : free_vars(*st.value)) touch(v);
          touch(st.target);
          break;
        case Statement::Kind::Sample:
          touch(st.target);
          break;
        case Statement::Kind::Call:
          for (const auto& a : st.args)
            for (const auto& v : free_vars(*a)) touch(v);
          if (!st.target.empty()) touch(st.target);
          break;
        default:
          break;
      }
    }
  }

  CStmt compile_stmt(const Statement& st, const SlotResolver& resolve) {
    CStmt out;
    out.kind = st.kind;
    out.guard_true = is_true_literal(*st.guard);
    if (!out.guard_true) out.guard = compile_formula(*st.guard, resolve);
    switch (st.kind) {
      case Statement::Kind::Assign:
        out.has_target = true;
        out.target = resolve(st.target);
        out.debug_target = st.target;
        out.value = compile_term(*st.value, resolve);
        break;
      case Statement::Kind::Sample:
        out.has_target = true;
        out.target = resolve(st.target);
        out.debug_target = st.target;
        out.dist = add_dist(*st.dist);
        break;
      case Statement::Kind::Call: {
        auto it = p_.service_index.find(st.callee_component + "." + st.callee_service);
        if (it == p_.service_index.end())
          throw Error("unknown service " + st.callee_component + "." + st.callee_service);
        out.callee = it->second;
        for (const auto& a : st.args) out.args.push_back(compile_term(*a, resolve));
        if (!st.target.empty()) {
          out.has_target = true;
          out.target = resolve(st.target);
          out.debug_target = st.target;
        }
        break;
      }
      case Statement::Kind::Abort:
        break;
      case Statement::Kind::Repeat:
        throw Error("internal: repeat must be unrolled before compilation");
    }
    return out;
  }

  void compile_service(const ServiceModel& s, CService& out) {
    out.qualified = s.qualified_name();
    out.param_count = static_cast<int>(s.params.size());
    out.result_slot = out.param_count;
    out.frame_size = out.param_count + 1;
    out.cost = s.cost;

    std::map<std::string, int> frame;
    for (size_t i = 0; i < s.params.size(); ++i)
      frame[s.params[i].name] = static_cast<int>(i);
    frame["result"] = out.result_slot;

    SlotResolver resolve = [this, frame](const std::string& name) -> SlotRef {
      auto fit = frame.find(name);
      if (fit != frame.end()) return SlotRef{false, fit->second};
      auto git = p_.global_index.find(name);
      if (git != p_.global_index.end()) return SlotRef{true, git->second};
      throw Error("unresolved name " + name + " (expected canonical Component.var)");
    };

    out.cov_true = is_true_literal(*s.cov);
    out.pre_true = is_true_literal(*s.pre);
    out.post_true = is_true_literal(*s.post);
    if (!out.cov_true) out.cov = compile_formula(*s.cov, resolve);
    if (!out.pre_true) out.pre = compile_formula(*s.pre, resolve);
    if (!out.post_true) out.post = compile_formula(*s.post, resolve);

    for (const auto& st : unroll(s.beh)) out.body.push_back(compile_stmt(st, resolve));
  }

  static void collect_global_reads(const CTerm& t, std::set<int>& out) {
    switch (t.k) {
      case CTerm::K::Slot:
        if (t.slot.global) out.insert(t.slot.index);
        break;
      case CTerm::K::Neg:
        collect_global_reads(*t.l, out);
        break;
      case CTerm::K::Bin:
        collect_global_reads(*t.l, out);
        collect_global_reads(*t.r, out);
        break;
      default:
        break;
    }
  }

  static void collect_global_reads(const CFormula& f, std::set<int>& out) {
    switch (f.k) {
      case CFormula::K::Cmp:
        collect_global_reads(*f.tl, out);
        collect_global_reads(*f.tr, out);
        break;
      case CFormula::K::Not:
        collect_global_reads(*f.l, out);
        break;
      case CFormula::K::And:
      case CFormula::K::Or:
      case CFormula::K::Implies:
        collect_global_reads(*f.l, out);
        collect_global_reads(*f.r, out);
        break;
      default:
        break;
    }
  }

  void compute_service_reads(CService& svc) {
    if (!svc.may_read_globals.empty()) return;
    std::set<int>& out = svc.may_read_globals;
    if (svc.cov) collect_global_reads(*svc.cov, out);
    if (svc.pre) collect_global_reads(*svc.pre, out);
    if (svc.post) collect_global_reads(*svc.post, out);
    for (const auto& st : svc.body) {
      if (st.guard) collect_global_reads(*st.guard, out);
      if (st.value) collect_global_reads(*st.value, out);
      for (const auto& a : st.args) collect_global_reads(*a, out);
      if (st.callee >= 0) {
        CService& callee = p_.services[static_cast<size_t>(st.callee)];
        compute_service_reads(callee);  // call graph is acyclic
        out.insert(callee.may_read_globals.begin(), callee.may_read_globals.end());
      }
    }
  }

  int unified_slot(const SlotRef& s) const {
    return s.global ? s.index : p_.global_count() + s.index;
  }

  void add_term_reads(const CTerm& t, std::set<int>& out) const {
    switch (t.k) {
      case CTerm::K::Slot:
        out.insert(unified_slot(t.slot));
        break;
      case CTerm::K::Neg:
        add_term_reads(*t.l, out);
        break;
      case CTerm::K::Bin:
        add_term_reads(*t.l, out);
        add_term_reads(*t.r, out);
        break;
      default:
        break;
    }
  }

  void add_formula_reads(const CFormula& f, std::set<int>& out) const {
    switch (f.k) {
      case CFormula::K::Cmp:
        add_term_reads(*f.tl, out);
        add_term_reads(*f.tr, out);
        break;
      case CFormula::K::Not:
        add_formula_reads(*f.l, out);
        break;
      case CFormula::K::And:
      case CFormula::K::Or:
      case CFormula::K::Implies:
        add_formula_reads(*f.l, out);
        add_formula_reads(*f.r, out);
        break;
      default:
        break;
    }
  }

  void compute_liveness() {
    size_t n = p_.main_stmts.size();
    p_.live.assign(n + 1, {});
    std::set<int> live;
    for (size_t i = n; i-- > 0;) {
      const CStmt& st = p_.main_stmts[i];
      // Only an unconditional write definitely kills the old value.
      if (st.guard_true && st.has_target) live.erase(unified_slot(st.target));
      if (st.guard) add_formula_reads(*st.guard, live);
      if (st.value) add_term_reads(*st.value, live);
      for (const auto& a : st.args) add_term_reads(*a, live);
      if (st.callee >= 0) {
        const CService& callee = p_.services[static_cast<size_t>(st.callee)];
        live.insert(callee.may_read_globals.begin(), callee.may_read_globals.end());
      }
      p_.live[i].assign(live.begin(), live.end());
    }
  }
};

// ---------------------------------------------------------------------------
// Runtime.

struct RtState {
  std::vector<Int> g;
  std::vector<char> gb;
  std::vector<Int> loc;
  std::vector<char> lb;
};

RtState initial_state(const Program& p) {
  RtState st;
  size_t gc = static_cast<size_t>(p.global_count());
  st.g.resize(gc);
  st.gb.assign(gc, 0);
  st.loc.resize(static_cast<size_t>(p.local_count()));
  st.lb.assign(static_cast<size_t>(p.local_count()), 0);
  for (size_t i = 0; i < gc; ++i) {
    if (!p.global_init[i].is_dist) {
      st.g[i] = p.global_init[i].value;
      st.gb[i] = 1;
    }
  }
  return st;
}

// Thrown for premature termination and contract errors; caught per analysis.
struct TSignal {
  Outcome::Kind kind = Outcome::Kind::Premature;
  int svc = -1;     // service index, -1 for the profile
  int caller = -1;  // PreViolation only
};

struct FaultSignal {
  ModelFault::Kind kind;
  std::string message;
};

struct Recorder {
  std::vector<TraceEvent> events;
  void add(TraceEvent::Kind kind, std::string name, Int value = Int(0)) {
    events.push_back(TraceEvent{kind, std::move(name), std::move(value)});
  }
};

enum class Mode { Coverage, Correctness };

struct Ctx {
  const Program& p;
  Mode mode = Mode::Coverage;
  int watched = -1;
  bool entered = false;
  Recorder* rec = nullptr;
  SplitMix64* rng = nullptr;
  const SampleResolver* resolver = nullptr;
  size_t resolver_count = 0;
  Rational* trace_prob = nullptr;
};

struct EvalEnv {
  RtState& st;
  std::vector<Int>& fv;
  std::vector<char>& fb;
  const Program& p;
  bool frame_is_main;
};

const Int& read_slot(const SlotRef& s, const EvalEnv& env) {
  if (s.global) {
    if (!env.st.gb[static_cast<size_t>(s.index)])
      throw EvalError(EvalError::Kind::UnboundVariable,
                      "unbound variable " + env.p.global_names[static_cast<size_t>(s.index)]);
    return env.st.g[static_cast<size_t>(s.index)];
  }
  if (!env.fb[static_cast<size_t>(s.index)]) {
    std::string name = env.frame_is_main && s.index < env.p.local_count()
                           ? env.p.local_names[static_cast<size_t>(s.index)]
                           : "local";
    throw EvalError(EvalError::Kind::UnboundVariable, "unbound variable " + name);
  }
  return env.fv[static_cast<size_t>(s.index)];
}

void write_slot(const SlotRef& s, Int value, const EvalEnv& env) {
  if (s.global) {
    env.st.g[static_cast<size_t>(s.index)] = std::move(value);
    env.st.gb[static_cast<size_t>(s.index)] = 1;
  } else {
    env.fv[static_cast<size_t>(s.index)] = std::move(value);
    env.fb[static_cast<size_t>(s.index)] = 1;
  }
}

Int eval_cterm(const CTerm& t, const EvalEnv& env) {
  switch (t.k) {
    case CTerm::K::Lit:
      return t.value;
    case CTerm::K::Slot:
      return read_slot(t.slot, env);
    case CTerm::K::Neg:
      return -eval_cterm(*t.l, env);
    case CTerm::K::Bin: {
      Int a = eval_cterm(*t.l, env);
      Int b = eval_cterm(*t.r, env);
      switch (t.op) {
        case BinaryOp::Add:
          return a + b;
        case BinaryOp::Sub:
          return a - b;
        case BinaryOp::Mul:
          return a * b;
        case BinaryOp::Div:
          if (b == 0) throw EvalError(EvalError::Kind::DivisionByZero, "division by zero");
          return a / b;
        case BinaryOp::Mod:
          if (b == 0) throw EvalError(EvalError::Kind::DivisionByZero, "modulo by zero");
          return a % b;
      }
      break;
    }
  }
  throw Error("unreachable");
}

bool eval_cformula(const CFormula& f, const EvalEnv& env) {
  switch (f.k) {
    case CFormula::K::Bool:
      return f.b;
    case CFormula::K::Cmp: {
      int c = cmp(eval_cterm(*f.tl, env), eval_cterm(*f.tr, env));
      switch (f.op) {
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
      break;
    }
    case CFormula::K::Not:
      return !eval_cformula(*f.l, env);
    case CFormula::K::And:
      return eval_cformula(*f.l, env) && eval_cformula(*f.r, env);
    case CFormula::K::Or:
      return eval_cformula(*f.l, env) || eval_cformula(*f.r, env);
    case CFormula::K::Implies:
      return !eval_cformula(*f.l, env) || eval_cformula(*f.r, env);
  }
  throw Error("unreachable");
}

Int run_service_call(const CStmt& call, const EvalEnv& caller_env, Ctx& cx, int caller_idx,
                     bool from_profile);

void run_service_body(const CService& svc, int self_idx, EvalEnv& env, Ctx& cx) {
  for (const CStmt& s : svc.body) {
    if (!s.guard_true && !eval_cformula(*s.guard, env)) continue;
    switch (s.kind) {
      case Statement::Kind::Assign: {
        Int v = eval_cterm(*s.value, env);
        if (cx.rec) cx.rec->add(TraceEvent::Kind::Assign, s.debug_target, v);
        write_slot(s.target, std::move(v), env);
        break;
      }
      case Statement::Kind::Abort:
        if (cx.rec) cx.rec->add(TraceEvent::Kind::Abort, svc.qualified);
        throw TSignal{Outcome::Kind::Premature, self_idx, -1};
      case Statement::Kind::Call:
        run_service_call(s, env, cx, self_idx, false);
        break;
      case Statement::Kind::Sample:
        throw FaultSignal{ModelFault::Kind::EvaluationError,
                          "sample statement inside service " + svc.qualified};
      case Statement::Kind::Repeat:
        throw Error("unreachable");
    }
  }
}

Int run_service_call(const CStmt& call, const EvalEnv& caller_env, Ctx& cx, int caller_idx,
                     bool from_profile) {
  const CService& svc = cx.p.services[static_cast<size_t>(call.callee)];

  std::vector<Int> fv(static_cast<size_t>(svc.frame_size));
  std::vector<char> fb(static_cast<size_t>(svc.frame_size), 1);
  for (size_t i = 0; i < call.args.size(); ++i)
    fv[i] = eval_cterm(*call.args[i], caller_env);
  // fv[result_slot] starts at 0, the reserved result default.

  if (cx.rec) cx.rec->add(TraceEvent::Kind::CallEnter, svc.qualified);
  if (cx.watched == call.callee) cx.entered = true;

  EvalEnv env{caller_env.st, fv, fb, cx.p, false};

  if (from_profile && !svc.pre_true && !eval_cformula(*svc.pre, env))
    throw FaultSignal{ModelFault::Kind::ProfileContractViolation,
                      "profile calls " + svc.qualified + " with its precondition violated"};

  if (cx.mode == Mode::Coverage) {
    if (!svc.cov_true && !eval_cformula(*svc.cov, env))
      throw TSignal{Outcome::Kind::Premature, call.callee, -1};
  } else {
    if (!from_profile && !svc.pre_true && !eval_cformula(*svc.pre, env))
      throw TSignal{Outcome::Kind::PreViolation, call.callee, caller_idx};
  }

  run_service_body(svc, call.callee, env, cx);

  if (cx.mode == Mode::Correctness && !svc.post_true && !eval_cformula(*svc.post, env))
    throw TSignal{Outcome::Kind::PostViolation, call.callee, -1};

  Int result = fv[static_cast<size_t>(svc.result_slot)];
  if (cx.rec) cx.rec->add(TraceEvent::Kind::CallReturn, svc.qualified, result);
  if (call.has_target) {
    if (cx.rec) cx.rec->add(TraceEvent::Kind::Assign, call.debug_target, result);
    write_slot(call.target, result, caller_env);
  }
  return result;
}

constexpr size_t kRanToEnd = static_cast<size_t>(-1);

// Executes top-level statements starting at `from`. Returns the index of the
// next taken sample statement when no sampling driver is installed, or
// kRanToEnd after the last statement.
size_t run_main_segment(size_t from, RtState& st, Ctx& cx) {
  EvalEnv env{st, st.loc, st.lb, cx.p, true};
  const auto& stmts = cx.p.main_stmts;
  for (size_t i = from; i < stmts.size(); ++i) {
    const CStmt& s = stmts[i];
    if (!s.guard_true && !eval_cformula(*s.guard, env)) continue;
    switch (s.kind) {
      case Statement::Kind::Sample: {
        const CDist& d = cx.p.dists[static_cast<size_t>(s.dist)];
        Int v;
        if (cx.rng != nullptr) {
          v = d.values[pick_index(d, cx.rng->next())];
        } else if (cx.resolver != nullptr) {
          v = (*cx.resolver)(s.debug_target, d.dist, cx.resolver_count++);
          if (cx.trace_prob != nullptr) *cx.trace_prob *= d.dist.mass_at(v);
        } else {
          return i;  // exact enumeration branches here
        }
        if (cx.rec) cx.rec->add(TraceEvent::Kind::Sample, s.debug_target, v);
        write_slot(s.target, std::move(v), env);
        break;
      }
      case Statement::Kind::Assign: {
        Int v = eval_cterm(*s.value, env);
        if (cx.rec) cx.rec->add(TraceEvent::Kind::Assign, s.debug_target, v);
        write_slot(s.target, std::move(v), env);
        break;
      }
      case Statement::Kind::Abort:
        if (cx.rec) cx.rec->add(TraceEvent::Kind::Abort, cx.p.profile_name);
        throw TSignal{Outcome::Kind::Premature, -1, -1};
      case Statement::Kind::Call:
        run_service_call(s, env, cx, -1, true);
        break;
      case Statement::Kind::Repeat:
        throw Error("unreachable");
    }
  }
  return kRanToEnd;
}

// ---------------------------------------------------------------------------
// Exact enumeration with memoization over live state at top-level points.

struct ClassKey {
  Outcome::Kind kind = Outcome::Kind::Normal;
  int svc = -1;
  int caller = -1;
  bool entered = false;

  bool operator<(const ClassKey& o) const {
    if (kind != o.kind) return kind < o.kind;
    if (svc != o.svc) return svc < o.svc;
    if (caller != o.caller) return caller < o.caller;
    return entered < o.entered;
  }
};

using OutcomeMap = std::map<ClassKey, Rational>;

struct DpValue {
  OutcomeMap mass;
  Int traces;
};

struct MemoKey {
  std::vector<char> bound;
  std::vector<Int> vals;

  bool operator<(const MemoKey& o) const {
    if (bound != o.bound) return bound < o.bound;
    for (size_t i = 0; i < vals.size(); ++i) {
      int c = cmp(vals[i], o.vals[i]);
      if (c != 0) return c < 0;
    }
    return false;
  }
};

class ExactRunner {
 public:
  ExactRunner(const Program& p, Mode mode, int watched, const EngineOptions& opt)
      : cx_{p, mode, watched}, opt_(opt) {
    memo_.resize(p.main_stmts.size() + 1);
  }

  DpValue run() {
    RtState st = initial_state(cx_.p);
    return run_from(0, std::move(st));
  }

  u64 used() const { return used_; }

  // Sample choices along the active enumeration path, for fault reports.
  std::vector<TraceEvent> sample_prefix() const { return sample_stack_; }

 private:
  Ctx cx_;
  EngineOptions opt_;
  u64 used_ = 0;
  std::vector<std::map<MemoKey, DpValue>> memo_;
  std::vector<TraceEvent> sample_stack_;

  void bump() {
    if (++used_ > opt_.branch_budget)
      throw BranchBudgetExceeded("exact enumeration exceeds branch budget of " +
                                 std::to_string(opt_.branch_budget));
  }

  MemoKey make_key(size_t idx, const RtState& st) const {
    MemoKey key;
    const auto& slots = cx_.p.live[idx];
    key.bound.reserve(slots.size());
    key.vals.reserve(slots.size());
    int gc = cx_.p.global_count();
    for (int sid : slots) {
      bool global = sid < gc;
      size_t i = static_cast<size_t>(global ? sid : sid - gc);
      bool b = global ? st.gb[i] != 0 : st.lb[i] != 0;
      key.bound.push_back(static_cast<char>(b));
      key.vals.push_back(b ? (global ? st.g[i] : st.loc[i]) : Int(0));
    }
    return key;
  }

  // Merging only pays where paths can converge, which needs a small live
  // footprint; wide keys would be near-unique and only burn memory.
  static constexpr size_t kMemoLiveLimit = 4;

  DpValue run_from(size_t idx, RtState st) {
    std::map<MemoKey, DpValue>* table = nullptr;
    MemoKey key;
    if (opt_.memoize && cx_.p.live[idx].size() <= kMemoLiveLimit) {
      table = &memo_[idx];
      key = make_key(idx, st);
      auto it = table->find(key);
      if (it != table->end()) return it->second;
    }

    bump();
    cx_.entered = false;
    DpValue result;
    try {
      size_t stop = run_main_segment(idx, st, cx_);
      bool seg_entered = cx_.entered;
      if (stop == kRanToEnd) {
        result.mass[ClassKey{Outcome::Kind::Normal, -1, -1, seg_entered}] = Rational(1);
        result.traces = 1;
      } else {
        const CStmt& s = cx_.p.main_stmts[stop];
        const CDist& d = cx_.p.dists[static_cast<size_t>(s.dist)];
        result.traces = 0;
        for (size_t vi = 0; vi < d.values.size(); ++vi) {
          bump();
          RtState child = st;
          if (s.target.global) {
            child.g[static_cast<size_t>(s.target.index)] = d.values[vi];
            child.gb[static_cast<size_t>(s.target.index)] = 1;
          } else {
            child.loc[static_cast<size_t>(s.target.index)] = d.values[vi];
            child.lb[static_cast<size_t>(s.target.index)] = 1;
          }
          sample_stack_.push_back(
              TraceEvent{TraceEvent::Kind::Sample, s.debug_target, d.values[vi]});
          DpValue sub = run_from(stop + 1, std::move(child));
          sample_stack_.pop_back();
          for (const auto& [cls, pr] : sub.mass) {
            ClassKey ck = cls;
            ck.entered = ck.entered || seg_entered;
            result.mass[ck] += d.mass[vi] * pr;
          }
          result.traces += sub.traces;
        }
      }
    } catch (const TSignal& t) {
      result.mass[ClassKey{t.kind, t.svc, t.caller, cx_.entered}] = Rational(1);
      result.traces = 1;
    }

    if (table != nullptr) table->emplace(std::move(key), result);
    return result;
  }
};

std::string outcome_service_name(const Program& p, int idx) {
  return idx < 0 ? p.profile_name : p.services[static_cast<size_t>(idx)].qualified;
}

Outcome outcome_from_class(const Program& p, const ClassKey& cls) {
  Outcome o;
  o.kind = cls.kind;
  if (cls.kind != Outcome::Kind::Normal) o.service = outcome_service_name(p, cls.svc);
  if (cls.kind == Outcome::Kind::PreViolation) o.caller = outcome_service_name(p, cls.caller);
  return o;
}

[[noreturn]] void rethrow_fault(const FaultSignal& f, std::vector<TraceEvent> prefix) {
  Trace t;
  t.events = std::move(prefix);
  throw ModelFault(f.kind, f.message, std::move(t));
}

[[noreturn]] void rethrow_eval(const EvalError& e, std::vector<TraceEvent> prefix) {
  Trace t;
  t.events = std::move(prefix);
  throw ModelFault(ModelFault::Kind::EvaluationError, e.what(), std::move(t));
}

DpValue run_exact(const Program& p, Mode mode, int watched, const EngineOptions& options,
                  u64* used_out) {
  ExactRunner runner(p, mode, watched, options);
  try {
    DpValue v = runner.run();
    if (used_out != nullptr) *used_out = runner.used();
    return v;
  } catch (const FaultSignal& f) {
    rethrow_fault(f, runner.sample_prefix());
  } catch (const EvalError& e) {
    rethrow_eval(e, runner.sample_prefix());
  }
}

ExactResult summarize(const Program& p, const DpValue& v, Mode mode, u64 used) {
  ExactResult out;
  out.probability = Rational(0);
  for (const auto& [cls, mass] : v.mass) {
    switch (cls.kind) {
      case Outcome::Kind::Normal:
        out.probability += mass;
        break;
      case Outcome::Kind::Premature:
        if (mode == Mode::Coverage) {
          out.per_service[outcome_service_name(p, cls.svc)] += mass;
        } else {
          out.probability += mass;  // explicit abort is not a contract error
        }
        break;
      case Outcome::Kind::PostViolation:
        out.per_service[outcome_service_name(p, cls.svc)] += mass;
        break;
      case Outcome::Kind::PreViolation:
        out.per_service[outcome_service_name(p, cls.caller)] += mass;
        break;
    }
  }
  out.trace_count = v.traces;
  out.enumerated_branches = used;
  return out;
}

Program compile_program(const SystemModel& m, const UsageProfile& u) {
  UsageProfile unrolled = unroll(u);
  return Compiler(m, &unrolled).compile();
}

}  // namespace

ExactResult exact_coverage(const SystemModel& m, const UsageProfile& u,
                           const EngineOptions& options) {
  Program p = compile_program(m, u);
  u64 used = 0;
  DpValue v = run_exact(p, Mode::Coverage, -1, options, &used);
  return summarize(p, v, Mode::Coverage, used);
}

ExactResult exact_correctness(const SystemModel& m, const UsageProfile& u,
                              const EngineOptions& options) {
  Program p = compile_program(m, u);
  u64 used = 0;
  DpValue v = run_exact(p, Mode::Correctness, -1, options, &used);
  return summarize(p, v, Mode::Correctness, used);
}

Rational call_probability(const SystemModel& m, const UsageProfile& u,
                          const std::string& qualified_service, const EngineOptions& options) {
  Program p = compile_program(m, u);
  auto it = p.service_index.find(qualified_service);
  if (it == p.service_index.end()) throw Error("unknown service " + qualified_service);
  u64 used = 0;
  DpValue v = run_exact(p, Mode::Coverage, it->second, options, &used);
  Rational entered(0);
  for (const auto& [cls, mass] : v.mass)
    if (cls.entered) entered += mass;
  return entered;
}

Rational expected_error_cost(const SystemModel& m, const UsageProfile& u,
                             const EngineOptions& options) {
  ExactResult r = exact_coverage(m, u, options);
  Rational total(0);
  for (const auto& [name, mass] : r.per_service) {
    const ServiceModel* svc = m.find_service_qualified(name);
    Rational cost = svc != nullptr ? svc->cost : Rational(1);  // profile aborts cost 1
    total += cost * mass;
  }
  return total;
}

Trace execute_trace(const SystemModel& m, const UsageProfile& u, const SampleResolver& resolver) {
  Program p = compile_program(m, u);
  Recorder rec;
  Rational prob(1);
  Ctx cx{p, Mode::Coverage};
  cx.rec = &rec;
  cx.resolver = &resolver;
  cx.trace_prob = &prob;

  RtState st = initial_state(p);
  Trace t;
  try {
    run_main_segment(0, st, cx);
    t.outcome.kind = Outcome::Kind::Normal;
  } catch (const TSignal& sig) {
    ClassKey cls{sig.kind, sig.svc, sig.caller, false};
    t.outcome = outcome_from_class(p, cls);
  } catch (const FaultSignal& f) {
    rethrow_fault(f, std::move(rec.events));
  } catch (const EvalError& e) {
    rethrow_eval(e, std::move(rec.events));
  }
  t.events = std::move(rec.events);
  t.probability = std::move(prob);
  return t;
}

IntervalResult approx_coverage(const SystemModel& m, const UsageProfile& u,
                               const ApproxOptions& options) {
  if (options.samples == 0) throw Error("approx_coverage needs at least one sample");
  if (!(options.confidence > 0.0 && options.confidence < 1.0))
    throw Error("confidence must be in (0, 1)");
  Program p = compile_program(m, u);

  // One decorrelated stream per trace index keeps results independent of the
  // worker count.
  auto run_one = [&p](std::uint64_t seed, std::uint64_t index, Recorder* rec) -> bool {
    SplitMix64 rng = SplitMix64::stream_for(seed, index);
    Ctx cx{p, Mode::Coverage};
    cx.rng = &rng;
    cx.rec = rec;
    RtState st = initial_state(p);
    try {
      run_main_segment(0, st, cx);
      return true;
    } catch (const TSignal&) {
      return false;
    }
  };

  int workers = std::max(1, options.workers);
  std::uint64_t n = options.samples;
  std::vector<std::uint64_t> hits(static_cast<size_t>(workers), 0);
  std::vector<std::uint64_t> fault_index(static_cast<size_t>(workers), ~0ULL);

  auto worker_fn = [&](int w) {
    std::uint64_t chunk = (n + static_cast<std::uint64_t>(workers) - 1) /
                          static_cast<std::uint64_t>(workers);
    std::uint64_t lo = static_cast<std::uint64_t>(w) * chunk;
    std::uint64_t hi = std::min(n, lo + chunk);
    for (std::uint64_t i = lo; i < hi; ++i) {
      try {
        if (run_one(options.seed, i, nullptr)) ++hits[static_cast<size_t>(w)];
      } catch (...) {
        fault_index[static_cast<size_t>(w)] = i;
        return;
      }
    }
  };

  if (workers == 1) {
    worker_fn(0);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) threads.emplace_back(worker_fn, w);
    for (auto& t : threads) t.join();
  }

  std::uint64_t first_fault = ~0ULL;
  for (auto fi : fault_index) first_fault = std::min(first_fault, fi);
  if (first_fault != ~0ULL) {
    // Deterministic replay of the faulting trace, now with recording.
    Recorder rec;
    try {
      run_one(options.seed, first_fault, &rec);
      throw Error("internal: fault did not replay");
    } catch (const FaultSignal& f) {
      rethrow_fault(f, std::move(rec.events));
    } catch (const EvalError& e) {
      rethrow_eval(e, std::move(rec.events));
    }
  }

  std::uint64_t k = 0;
  for (auto h : hits) k += h;

  IntervalResult out;
  out.estimate = make_rational(Int(k), Int(n));
  Interval iv = clopper_pearson(k, n, options.confidence);
  out.lo = iv.lo;
  out.hi = iv.hi;
  out.confidence = options.confidence;
  out.samples = n;
  out.successes = k;
  out.seed = options.seed;
  return out;
}

// ---------------------------------------------------------------------------
// Region execution: single service, callee bodies skipped.

struct RegionViolation {};

struct RegionExecutor::Impl {
  Program p;
  int svc_idx = -1;
  std::vector<std::string> param_names;

  bool run(const State& s) {
    const CService& svc = p.services[static_cast<size_t>(svc_idx)];
    RtState st;
    size_t gc = static_cast<size_t>(p.global_count());
    st.g.resize(gc);
    st.gb.assign(gc, 0);
    for (size_t i = 0; i < gc; ++i) {
      const Int* v = s.find(p.global_names[i]);
      if (v != nullptr) {
        st.g[i] = *v;
        st.gb[i] = 1;
      }
    }
    std::vector<Int> fv(static_cast<size_t>(svc.frame_size));
    std::vector<char> fb(static_cast<size_t>(svc.frame_size), 1);
    for (size_t i = 0; i < param_names.size(); ++i) fv[i] = s.at(param_names[i]);

    EvalEnv env{st, fv, fb, p, false};
    try {
      run_region_body(svc, env);
      if (!svc.post_true && !eval_cformula(*svc.post, env)) return false;
      return true;
    } catch (const RegionViolation&) {
      return false;
    } catch (const TSignal&) {
      return true;  // explicit abort: premature, not a contract error
    }
  }

  void run_region_body(const CService& svc, EvalEnv& env) {
    for (const CStmt& st : svc.body) {
      if (!st.guard_true && !eval_cformula(*st.guard, env)) continue;
      switch (st.kind) {
        case Statement::Kind::Assign:
          write_slot(st.target, eval_cterm(*st.value, env), env);
          break;
        case Statement::Kind::Abort:
          throw TSignal{Outcome::Kind::Premature, svc_idx, -1};
        case Statement::Kind::Call: {
          const CService& callee = p.services[static_cast<size_t>(st.callee)];
          std::vector<Int> cfv(static_cast<size_t>(callee.frame_size));
          std::vector<char> cfb(static_cast<size_t>(callee.frame_size), 1);
          for (size_t i = 0; i < st.args.size(); ++i) cfv[i] = eval_cterm(*st.args[i], env);
          EvalEnv callee_env{env.st, cfv, cfb, p, false};
          if (!callee.pre_true && !eval_cformula(*callee.pre, callee_env))
            throw RegionViolation{};
          // Callee body is not executed; a result target gets the default 0.
          if (st.has_target) write_slot(st.target, Int(0), env);
          break;
        }
        case Statement::Kind::Sample:
        case Statement::Kind::Repeat:
          throw Error("unreachable");
      }
    }
  }
};

RegionExecutor::RegionExecutor(const SystemModel& m, const ServiceModel& s)
    : impl_(std::make_unique<Impl>()) {
  impl_->p = Compiler(m, nullptr).compile();
  auto it = impl_->p.service_index.find(s.qualified_name());
  if (it == impl_->p.service_index.end()) throw Error("unknown service " + s.qualified_name());
  impl_->svc_idx = it->second;
  for (const auto& p : s.params) impl_->param_names.push_back(p.name);
}

RegionExecutor::~RegionExecutor() = default;
RegionExecutor::RegionExecutor(RegionExecutor&&) noexcept = default;

bool RegionExecutor::ok(const State& state) { return impl_->run(state); }

CorrectnessRegion correctness_region(const SystemModel& m, const ServiceModel& s,
                                     const Signature& domains, unsigned long long max_states) {
  std::set<std::string> vars;
  for (const auto& p : s.params) vars.insert(p.name);
  for (const auto& c : m.components)
    for (const auto& v : c.state_vars) vars.insert(c.name + "." + v.name);

  if (domain_state_count(domains, vars) > Int(static_cast<unsigned long>(max_states)))
    throw StateSpaceTooLarge("region enumeration needs more than " +
                             std::to_string(max_states) + " states");

  RegionExecutor exec(m, s);
  CorrectnessRegion out;
  Int checked = 0;
  for_each_state(domains, vars, [&](const State& st) {
    ++checked;
    if (exec.ok(st)) out.states.push_back(st);
    return true;
  });
  out.states_checked = checked;

  // Canonical DNF of point formulas, in enumeration order.
  FormulaPtr dnf;
  for (const auto& st : out.states) {
    FormulaPtr point;
    for (const auto& [name, value] : st.values()) {
      FormulaPtr eq = compare(CmpOp::Eq, var(name), lit(value));
      point = point ? land(std::move(point), std::move(eq)) : std::move(eq);
    }
    dnf = dnf ? lor(std::move(dnf), std::move(point)) : std::move(point);
  }
  out.formula = dnf ? dnf : truth(false);
  return out;
}

}  // namespace covprob
