#include "covprob/qpp.hpp"

#include <map>
#include <set>
#include <sstream>
#include <vector>

#include "covprob/dsl.hpp"

namespace covprob {
namespace {

// Words that may not be used as flat names: statement keywords of both
// dialects plus the fixed function and variable names.
const std::set<std::string>& reserved_words() {
  static const std::set<std::string> words = {
      "main",     "result",  "int",     "bool",    "fun",      "if",
      "ABORT",    "abort",   "true",    "false",   "uniform",  "normal_d",
      "pmf",      "repeat",  "component", "state", "service",  "requires",
      "ensures",  "covered", "cost",    "profile",
  };
  return words;
}

class Namer {
 public:
  Namer() : used_(reserved_words()) {}

  void reserve(const std::string& name) { used_.insert(name); }

  std::string alloc(const std::string& preferred, const std::string& fallback) {
    if (used_.insert(preferred).second) return preferred;
    if (used_.insert(fallback).second) return fallback;
    for (int k = 2;; ++k) {
      std::string candidate = fallback + "_" + std::to_string(k);
      if (used_.insert(candidate).second) return candidate;
    }
  }

 private:
  std::set<std::string> used_;
};

std::string type_word(VarType t) { return t == VarType::Bool ? "bool" : "int"; }

void emit_statement(std::ostream& os, const Statement& st, const NameRenderer& render,
                    const std::map<std::string, std::string>& service_names) {
  os << "  ";
  if (!is_true_literal(*st.guard)) os << "if (" << print_formula(*st.guard, render) << "): ";
  switch (st.kind) {
    case Statement::Kind::Assign:
      os << render(st.target) << " = " << print_term(*st.value, render);
      break;
    case Statement::Kind::Sample:
      os << render(st.target) << " ~ " << st.dist->to_string();
      break;
    case Statement::Kind::Abort:
      os << "ABORT";
      break;
    case Statement::Kind::Call: {
      if (!st.target.empty()) os << render(st.target) << " = ";
      os << service_names.at(st.callee_component + "." + st.callee_service) << "(";
      bool first = true;
      for (const auto& a : st.args) {
        if (!first) os << ", ";
        first = false;
        os << print_term(*a, render);
      }
      os << ")";
      break;
    }
    case Statement::Kind::Repeat:
      throw Error("unreachable: repeat is unrolled before export");
  }
  os << "\n";
}

}  // namespace

std::string export_prob_program(const SystemModel& m, const UsageProfile& u) {
  std::vector<Statement> main_stmts = unroll(u.statements);

  Namer namer;

  // Profile locals only ever appear in main, so they go first and usually
  // keep their names.
  std::map<std::string, std::string> local_names;
  auto touch_local = [&](const std::string& name) {
    if (name.find('.') != std::string::npos) return;
    if (local_names.count(name)) return;
    local_names[name] = namer.alloc(name, name);
  };
  for (const auto& st : main_stmts) {
    for (const auto& v : free_vars(*st.guard)) touch_local(v);
    if (st.value) {
      for (const auto& v : free_vars(*st.value)) touch_local(v);
    }
    for (const auto& a : st.args)
      for (const auto& v : free_vars(*a)) touch_local(v);
    if (!st.target.empty()) touch_local(st.target);
  }

  // Parameters keep their names, so flattened globals must avoid them;
  // otherwise a global could be shadowed inside a fun.
  for (const auto& c : m.components)
    for (const auto& s : c.services)
      for (const auto& p : s.params) namer.reserve(p.name);

  std::map<std::string, std::string> global_names;  // canonical -> flat
  for (const auto& c : m.components)
    for (const auto& v : c.state_vars)
      global_names[c.name + "." + v.name] = namer.alloc(v.name, c.name + "_" + v.name);

  std::map<std::string, std::string> service_names;  // qualified -> flat
  for (const auto& c : m.components)
    for (const auto& s : c.services)
      service_names[s.qualified_name()] = namer.alloc(s.name, c.name + "_" + s.name);

  NameRenderer fun_render = [&global_names](const std::string& name) {
    auto it = global_names.find(name);
    return it != global_names.end() ? it->second : name;
  };
  NameRenderer main_render = [&global_names, &local_names](const std::string& name) {
    auto git = global_names.find(name);
    if (git != global_names.end()) return git->second;
    auto lit_ = local_names.find(name);
    return lit_ != local_names.end() ? lit_->second : name;
  };

  std::ostringstream os;

  bool any_global = false;
  for (const auto& c : m.components) {
    for (const auto& v : c.state_vars) {
      any_global = true;
      os << type_word(v.type) << " " << global_names.at(c.name + "." + v.name);
      if (const auto* iv = std::get_if<Int>(&v.init)) os << " = " << iv->get_str();
      os << "\n";
    }
  }
  if (any_global) os << "\n";

  for (const auto& c : m.components) {
    for (const auto& s : c.services) {
      os << "fun " << service_names.at(s.qualified_name()) << "(";
      bool first = true;
      for (const auto& p : s.params) {
        if (!first) os << ", ";
        first = false;
        os << type_word(p.type) << " " << p.name;
      }
      os << "):\n";
      // The coverage region rides along as a leading guarded abort.
      os << "  if (" << print_formula(*lnot(s.cov), fun_render) << "): ABORT\n";
      for (const auto& st : unroll(s.beh)) emit_statement(os, st, fun_render, service_names);
      os << "\n";
    }
  }

  os << "fun main():\n";
  for (const auto& c : m.components) {
    for (const auto& v : c.state_vars) {
      if (const auto* d = std::get_if<Distribution>(&v.init))
        os << "  " << global_names.at(c.name + "." + v.name) << " ~ " << d->to_string() << "\n";
    }
  }
  for (const auto& st : main_stmts) emit_statement(os, st, main_render, service_names);
  return os.str();
}

}  // namespace covprob
