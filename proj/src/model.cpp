#include "covprob/model.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace covprob {

Statement make_assign(std::string target, TermPtr value, FormulaPtr guard) {
  Statement s;
  s.kind = Statement::Kind::Assign;
  s.guard = guard ? std::move(guard) : truth(true);
  s.target = std::move(target);
  s.value = std::move(value);
  return s;
}

Statement make_call(std::string component, std::string service, std::vector<TermPtr> args,
                    FormulaPtr guard, std::string result_target) {
  Statement s;
  s.kind = Statement::Kind::Call;
  s.guard = guard ? std::move(guard) : truth(true);
  s.callee_component = std::move(component);
  s.callee_service = std::move(service);
  s.args = std::move(args);
  s.target = std::move(result_target);
  return s;
}

Statement make_abort(FormulaPtr guard) {
  Statement s;
  s.kind = Statement::Kind::Abort;
  s.guard = guard ? std::move(guard) : truth(true);
  return s;
}

Statement make_sample(std::string target, Distribution dist, FormulaPtr guard) {
  Statement s;
  s.kind = Statement::Kind::Sample;
  s.guard = guard ? std::move(guard) : truth(true);
  s.target = std::move(target);
  s.dist = std::move(dist);
  return s;
}

Statement make_repeat(unsigned long count, std::vector<Statement> body) {
  Statement s;
  s.kind = Statement::Kind::Repeat;
  s.repeat_count = count;
  s.body = std::move(body);
  return s;
}

const StateVar* Component::find_state_var(const std::string& plain_name) const {
  for (const auto& v : state_vars)
    if (v.name == plain_name) return &v;
  return nullptr;
}

const ServiceModel* Component::find_service(const std::string& service_name) const {
  for (const auto& s : services)
    if (s.name == service_name) return &s;
  return nullptr;
}

const Component* SystemModel::find_component(const std::string& name) const {
  for (const auto& c : components)
    if (c.name == name) return &c;
  return nullptr;
}

const ServiceModel* SystemModel::find_service(const std::string& component,
                                              const std::string& service) const {
  const Component* c = find_component(component);
  return c == nullptr ? nullptr : c->find_service(service);
}

const ServiceModel* SystemModel::find_service_qualified(const std::string& qualified) const {
  auto dot = qualified.find('.');
  if (dot == std::string::npos) return nullptr;
  return find_service(qualified.substr(0, dot), qualified.substr(dot + 1));
}

Signature SystemModel::state_signature() const {
  Signature sig;
  for (const auto& c : components)
    for (const auto& v : c.state_vars) sig.declare(c.name + "." + v.name, v.type);
  return sig;
}

namespace {

bool is_qualified(const std::string& name) { return name.find('.') != std::string::npos; }

// Scope of names a service's formulas and body may reference.
std::set<std::string> service_names(const SystemModel& m, const ServiceModel& s,
                                    bool with_result) {
  std::set<std::string> names;
  for (const auto& p : s.params) names.insert(p.name);
  if (with_result) names.insert("result");
  for (const auto& c : m.components)
    for (const auto& v : c.state_vars) names.insert(c.name + "." + v.name);
  return names;
}

void check_scope(const Formula& f, const std::set<std::string>& names,
                 const std::string& where, const SourceSpan& span,
                 std::vector<Diagnostic>& diags) {
  for (const auto& v : free_vars(f)) {
    if (names.count(v) == 0) {
      diags.push_back({Severity::Error, "UnknownReference",
                       "unknown variable " + v + " in " + where, span});
    }
  }
}

void check_scope(const Term& t, const std::set<std::string>& names, const std::string& where,
                 const SourceSpan& span, std::vector<Diagnostic>& diags) {
  for (const auto& v : free_vars(t)) {
    if (names.count(v) == 0) {
      diags.push_back({Severity::Error, "UnknownReference",
                       "unknown variable " + v + " in " + where, span});
    }
  }
}

void check_statements(const SystemModel& m, const std::vector<Statement>& stmts,
                      const std::set<std::string>* service_scope, const std::string& where,
                      bool in_profile, std::vector<Diagnostic>& diags) {
  for (const auto& st : stmts) {
    if (st.kind == Statement::Kind::Repeat) {
      if (st.repeat_count < 1) {
        diags.push_back({Severity::Error, "InvalidRepeat",
                         "repeat count must be at least 1 in " + where, st.span});
      }
      check_statements(m, st.body, service_scope, where, in_profile, diags);
      continue;
    }

    if (st.guard == nullptr) {
      diags.push_back({Severity::Error, "MissingGuard", "statement lacks a guard in " + where,
                       st.span});
      continue;
    }
    if (service_scope != nullptr)
      check_scope(*st.guard, *service_scope, where, st.span, diags);

    auto check_target = [&](const std::string& target) {
      if (target.empty()) return;
      if (is_qualified(target)) {
        auto dot = target.find('.');
        const Component* c = m.find_component(target.substr(0, dot));
        if (c == nullptr || c->find_state_var(target.substr(dot + 1)) == nullptr) {
          diags.push_back({Severity::Error, "UnknownReference",
                           "unknown state variable " + target + " in " + where, st.span});
        }
      } else if (service_scope != nullptr && service_scope->count(target) == 0) {
        diags.push_back({Severity::Error, "UnknownReference",
                         "unknown assignment target " + target + " in " + where, st.span});
      }
      // Plain targets in profiles declare locals implicitly.
    };

    switch (st.kind) {
      case Statement::Kind::Assign:
        check_target(st.target);
        if (service_scope != nullptr)
          check_scope(*st.value, *service_scope, where, st.span, diags);
        break;
      case Statement::Kind::Sample:
        if (!in_profile) {
          diags.push_back({Severity::Error, "MisplacedSample",
                           "sample statement outside a usage profile in " + where, st.span});
        }
        check_target(st.target);
        break;
      case Statement::Kind::Call: {
        const ServiceModel* callee = m.find_service(st.callee_component, st.callee_service);
        if (callee == nullptr) {
          diags.push_back({Severity::Error, "UnknownReference",
                           "unknown service " + st.callee_component + "." + st.callee_service +
                               " in " + where,
                           st.span});
        } else if (callee->params.size() != st.args.size()) {
          std::ostringstream os;
          os << st.callee_component << "." << st.callee_service << " takes "
             << callee->params.size() << " arguments, got " << st.args.size() << " in " << where;
          diags.push_back({Severity::Error, "ArityMismatch", os.str(), st.span});
        }
        for (const auto& a : st.args)
          if (service_scope != nullptr) check_scope(*a, *service_scope, where, st.span, diags);
        check_target(st.target);
        break;
      }
      case Statement::Kind::Abort:
        break;
      case Statement::Kind::Repeat:
        break;
    }
  }
}

void collect_callees(const std::vector<Statement>& stmts,
                     std::set<std::pair<std::string, std::string>>& out) {
  for (const auto& st : stmts) {
    if (st.kind == Statement::Kind::Call)
      out.insert({st.callee_component, st.callee_service});
    if (st.kind == Statement::Kind::Repeat) collect_callees(st.body, out);
  }
}

}  // namespace

std::vector<Diagnostic> validate_model(const SystemModel& m, const UsageProfile* profile) {
  std::vector<Diagnostic> diags;

  std::set<std::string> comp_names;
  for (const auto& c : m.components) {
    if (!comp_names.insert(c.name).second) {
      diags.push_back(
          {Severity::Error, "DuplicateName", "duplicate component " + c.name, c.span});
    }
    std::set<std::string> var_names;
    for (const auto& v : c.state_vars) {
      if (!var_names.insert(v.name).second) {
        diags.push_back({Severity::Error, "DuplicateName",
                         "duplicate state variable " + c.name + "." + v.name, v.span});
      }
    }
    std::set<std::string> svc_names;
    for (const auto& s : c.services) {
      if (!svc_names.insert(s.name).second) {
        diags.push_back({Severity::Error, "DuplicateName",
                         "duplicate service " + s.qualified_name(), s.span});
      }
    }
  }

  for (const auto& c : m.components) {
    for (const auto& s : c.services) {
      std::string where = s.qualified_name();
      std::set<std::string> param_names;
      for (const auto& p : s.params) {
        if (!param_names.insert(p.name).second) {
          diags.push_back({Severity::Error, "DuplicateName",
                           "duplicate parameter " + p.name + " in " + where, s.span});
        }
        if (p.name == "result") {
          diags.push_back({Severity::Error, "DuplicateName",
                           "parameter may not be named result in " + where, s.span});
        }
      }
      if (s.pre == nullptr || s.post == nullptr || s.cov == nullptr) {
        diags.push_back({Severity::Error, "MissingFormula",
                         "service " + where + " lacks a contract formula", s.span});
        continue;
      }
      std::set<std::string> scope = service_names(m, s, false);
      std::set<std::string> post_scope = service_names(m, s, true);
      check_scope(*s.pre, scope, where + " precondition", s.span, diags);
      check_scope(*s.cov, scope, where + " coverage region", s.span, diags);
      check_scope(*s.post, post_scope, where + " postcondition", s.span, diags);
      if (s.cost < 0) {
        diags.push_back(
            {Severity::Error, "InvalidCost", "negative error cost in " + where, s.span});
      }
      check_statements(m, s.beh, &post_scope, where, false, diags);
    }
  }

  // Call-graph acyclicity over services.
  std::map<std::string, std::set<std::pair<std::string, std::string>>> edges;
  for (const auto& c : m.components)
    for (const auto& s : c.services) collect_callees(s.beh, edges[s.qualified_name()]);

  std::map<std::string, int> color;  // 0 new, 1 active, 2 done
  std::function<bool(const std::string&, std::vector<std::string>&)> dfs =
      [&](const std::string& node, std::vector<std::string>& path) -> bool {
    color[node] = 1;
    path.push_back(node);
    for (const auto& [cc, cs] : edges[node]) {
      const ServiceModel* callee = m.find_service(cc, cs);
      if (callee == nullptr) continue;  // reported above
      std::string q = callee->qualified_name();
      if (color[q] == 1) {
        path.push_back(q);
        return true;
      }
      if (color[q] == 0 && dfs(q, path)) return true;
    }
    path.pop_back();
    color[node] = 2;
    return false;
  };
  for (const auto& c : m.components) {
    for (const auto& s : c.services) {
      std::string q = s.qualified_name();
      if (color[q] != 0) continue;
      std::vector<std::string> path;
      if (dfs(q, path)) {
        std::ostringstream os;
        os << "service call cycle:";
        for (const auto& p : path) os << " " << p;
        diags.push_back({Severity::Error, "Recursion", os.str(), s.span});
        break;
      }
    }
  }

  if (profile != nullptr)
    check_statements(m, profile->statements, nullptr, "profile " + profile->name, true, diags);

  return diags;
}

namespace {

// Forward interval analysis: absent entry or unknown means unbounded.
struct IntervalV {
  bool known = false;
  Int lo, hi;
};

IntervalV known_iv(Int lo, Int hi) { return {true, std::move(lo), std::move(hi)}; }

IntervalV merge_iv(const IntervalV& a, const IntervalV& b) {
  if (!a.known || !b.known) return {};
  return known_iv(std::min(a.lo, b.lo), std::max(a.hi, b.hi));
}

IntervalV eval_term_iv(const Term& t, const std::map<std::string, IntervalV>& env) {
  if (const auto* l = std::get_if<Term::Literal>(&t.node())) return known_iv(l->value, l->value);
  if (const auto* v = std::get_if<Term::Var>(&t.node())) {
    auto it = env.find(v->name);
    return it == env.end() ? IntervalV{} : it->second;
  }
  if (const auto* n = std::get_if<Term::Negate>(&t.node())) {
    IntervalV o = eval_term_iv(*n->operand, env);
    if (!o.known) return {};
    return known_iv(-o.hi, -o.lo);
  }
  const auto& b = std::get<Term::Binary>(t.node());
  IntervalV l = eval_term_iv(*b.lhs, env);
  IntervalV r = eval_term_iv(*b.rhs, env);
  if (!l.known || !r.known) return {};
  switch (b.op) {
    case BinaryOp::Add:
      return known_iv(l.lo + r.lo, l.hi + r.hi);
    case BinaryOp::Sub:
      return known_iv(l.lo - r.hi, l.hi - r.lo);
    case BinaryOp::Mul: {
      Int c1 = l.lo * r.lo, c2 = l.lo * r.hi, c3 = l.hi * r.lo, c4 = l.hi * r.hi;
      return known_iv(std::min(std::min(c1, c2), std::min(c3, c4)),
                      std::max(std::max(c1, c2), std::max(c3, c4)));
    }
    case BinaryOp::Div: {
      if (r.lo <= 0 && r.hi >= 0) return {};  // divisor may be 0
      Int mag = std::max(abs(l.lo), abs(l.hi));
      return known_iv(-mag, mag);
    }
    case BinaryOp::Mod: {
      if (r.lo <= 0 && r.hi >= 0) return {};
      Int mag = std::max(abs(r.lo), abs(r.hi)) - 1;
      return known_iv(-mag, mag);
    }
  }
  return {};
}

void collect_writes(const SystemModel& m, const std::vector<Statement>& stmts,
                    const std::string& component, std::set<std::string>& out,
                    std::set<std::string>& visited) {
  for (const auto& st : stmts) {
    switch (st.kind) {
      case Statement::Kind::Assign:
      case Statement::Kind::Sample:
        if (is_qualified(st.target)) {
          out.insert(st.target);
        } else if (!component.empty()) {
          const Component* c = m.find_component(component);
          if (c != nullptr && c->find_state_var(st.target) != nullptr)
            out.insert(component + "." + st.target);
        }
        break;
      case Statement::Kind::Call: {
        const ServiceModel* callee = m.find_service(st.callee_component, st.callee_service);
        // visited doubles as a cycle stop; a visited callee's writes are
        // already in out since out is shared across the whole walk.
        if (callee != nullptr && visited.insert(callee->qualified_name()).second)
          collect_writes(m, callee->beh, callee->component, out, visited);
        break;
      }
      case Statement::Kind::Repeat:
        collect_writes(m, st.body, component, out, visited);
        break;
      case Statement::Kind::Abort:
        break;
    }
  }
}

std::set<std::string> transitive_write_set(const SystemModel& m, const ServiceModel& s) {
  std::set<std::string> out;
  std::set<std::string> visited{s.qualified_name()};
  collect_writes(m, s.beh, s.component, out, visited);
  return out;
}

void unroll_into(const std::vector<Statement>& stmts, std::vector<Statement>& out) {
  for (const auto& st : stmts) {
    if (st.kind == Statement::Kind::Repeat) {
      for (unsigned long i = 0; i < st.repeat_count; ++i) unroll_into(st.body, out);
    } else {
      out.push_back(st);
    }
  }
}

}  // namespace

std::vector<Diagnostic> static_pre_check(const SystemModel& m, const UsageProfile& profile,
                                         const Signature* extra_domains,
                                         unsigned long long max_states) {
  std::vector<Diagnostic> diags;

  std::map<std::string, IntervalV> env;
  for (const auto& c : m.components) {
    for (const auto& v : c.state_vars) {
      std::string name = c.name + "." + v.name;
      if (const auto* iv = std::get_if<Int>(&v.init)) {
        env[name] = known_iv(*iv, *iv);
      } else {
        const auto& d = std::get<Distribution>(v.init);
        env[name] = known_iv(d.min(), d.max());
      }
    }
  }
  if (extra_domains != nullptr) {
    for (const auto& [name, info] : extra_domains->vars())
      if (info.domain) env[name] = known_iv(info.domain->first, info.domain->second);
  }

  std::vector<Statement> stmts;
  unroll_into(profile.statements, stmts);

  for (const auto& st : stmts) {
    bool guard_always = st.guard != nullptr && is_true_literal(*st.guard);
    switch (st.kind) {
      case Statement::Kind::Assign: {
        IntervalV rhs = eval_term_iv(*st.value, env);
        auto it = env.find(st.target);
        env[st.target] =
            guard_always || it == env.end() ? rhs : merge_iv(it->second, rhs);
        break;
      }
      case Statement::Kind::Sample: {
        IntervalV rhs = known_iv(st.dist->min(), st.dist->max());
        auto it = env.find(st.target);
        env[st.target] =
            guard_always || it == env.end() ? rhs : merge_iv(it->second, rhs);
        break;
      }
      case Statement::Kind::Call: {
        const ServiceModel* callee = m.find_service(st.callee_component, st.callee_service);
        if (callee == nullptr || callee->params.size() != st.args.size()) break;

        std::map<std::string, TermPtr> subst;
        for (size_t i = 0; i < callee->params.size(); ++i)
          subst[callee->params[i].name] = st.args[i];
        FormulaPtr pre = substitute(callee->pre, subst);

        if (!is_true_literal(*pre)) {
          std::set<std::string> vars = free_vars(*pre);
          auto gv = free_vars(*st.guard);
          vars.insert(gv.begin(), gv.end());

          Signature sig;
          bool all_known = true;
          for (const auto& v : vars) {
            auto it = env.find(v);
            if (it == env.end() || !it->second.known) {
              all_known = false;
              diags.push_back({Severity::Warning, "PreCheckSkipped",
                               "cannot bound " + v + " for call to " +
                                   callee->qualified_name() + "; check skipped",
                               st.span});
              break;
            }
            sig.declare(v, VarType::Int, it->second.lo, it->second.hi);
          }
          if (all_known) {
            try {
              if (!implies_on_domains(*st.guard, *pre, sig, max_states)) {
                diags.push_back({Severity::Error, "PreconditionRisk",
                                 "guard does not imply precondition of " +
                                     callee->qualified_name(),
                                 st.span});
              }
            } catch (const StateSpaceTooLarge&) {
              diags.push_back({Severity::Warning, "StateSpaceTooLarge",
                               "value ranges too large to check call to " +
                                   callee->qualified_name() + "; check skipped",
                               st.span});
            }
          }
        }

        for (const auto& w : transitive_write_set(m, *callee)) env[w] = {};
        if (!st.target.empty()) env[st.target] = {};
        break;
      }
      case Statement::Kind::Abort:
      case Statement::Kind::Repeat:
        break;
    }
  }

  // Unrolling repeats the same call site; keep one diagnostic per message.
  std::set<std::string> seen;
  std::vector<Diagnostic> unique;
  for (auto& d : diags)
    if (seen.insert(d.to_string()).second) unique.push_back(std::move(d));
  return unique;
}

}  // namespace covprob
