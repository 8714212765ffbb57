#include <set>
#include <sstream>

#include "covprob/dsl.hpp"

namespace covprob {

namespace {

void print_statements(std::ostream& os, const std::vector<Statement>& stmts, int indent,
                      const NameRenderer& render);

void print_statement(std::ostream& os, const Statement& st, int indent,
                     const NameRenderer& render) {
  std::string pad(static_cast<size_t>(indent) * 2, ' ');
  if (st.kind == Statement::Kind::Repeat) {
    os << pad << "repeat " << st.repeat_count << " {\n";
    print_statements(os, st.body, indent + 1, render);
    os << pad << "}\n";
    return;
  }

  os << pad;
  if (!is_true_literal(*st.guard)) os << "if (" << print_formula(*st.guard, render) << ") ";
  auto name = [&](const std::string& n) { return render ? render(n) : n; };
  switch (st.kind) {
    case Statement::Kind::Assign:
      os << name(st.target) << " = " << print_term(*st.value, render) << ";";
      break;
    case Statement::Kind::Sample:
      os << name(st.target) << " ~ " << st.dist->to_string() << ";";
      break;
    case Statement::Kind::Abort:
      os << "abort;";
      break;
    case Statement::Kind::Call: {
      if (!st.target.empty()) os << name(st.target) << " = ";
      os << st.callee_component << "." << st.callee_service << "(";
      for (size_t i = 0; i < st.args.size(); ++i) {
        if (i > 0) os << ", ";
        os << print_term(*st.args[i], render);
      }
      os << ");";
      break;
    }
    case Statement::Kind::Repeat:
      break;
  }
  os << "\n";
}

void print_statements(std::ostream& os, const std::vector<Statement>& stmts, int indent,
                      const NameRenderer& render) {
  for (const auto& st : stmts) print_statement(os, st, indent, render);
}

const char* type_name(VarType t) { return t == VarType::Bool ? "bool" : "int"; }

}  // namespace

std::string print_model(const SystemModel& m) {
  std::ostringstream os;
  bool first_component = true;
  for (const auto& c : m.components) {
    if (!first_component) os << "\n";
    first_component = false;
    os << "component " << c.name << " {\n";
    for (const auto& v : c.state_vars) {
      os << "  state " << type_name(v.type) << " " << v.name << " = ";
      if (const auto* iv = std::get_if<Int>(&v.init)) {
        os << iv->get_str();
      } else {
        os << std::get<Distribution>(v.init).to_string();
      }
      os << ";\n";
    }
    for (const auto& s : c.services) {
      // Print own state unqualified unless a parameter shadows the name.
      std::set<std::string> params;
      for (const auto& p : s.params) params.insert(p.name);
      std::string prefix = c.name + ".";
      NameRenderer render = [&params, &prefix](const std::string& n) {
        if (n.rfind(prefix, 0) == 0) {
          std::string plain = n.substr(prefix.size());
          if (params.count(plain) == 0 && plain != "result") return plain;
        }
        return n;
      };

      os << "\n  service " << s.name << "(";
      for (size_t i = 0; i < s.params.size(); ++i) {
        if (i > 0) os << ", ";
        os << type_name(s.params[i].type) << " " << s.params[i].name;
      }
      os << ")";
      if (!is_true_literal(*s.pre)) os << "\n  requires " << print_formula(*s.pre, render);
      if (!is_true_literal(*s.post)) os << "\n  ensures " << print_formula(*s.post, render);
      if (!is_true_literal(*s.cov)) os << "\n  covered " << print_formula(*s.cov, render);
      if (s.cost != 1) os << "\n  cost " << rational_to_string(s.cost);
      os << "\n  {\n";
      print_statements(os, s.beh, 2, render);
      os << "  }\n";
    }
    os << "}\n";
  }
  return os.str();
}

std::string print_profile(const UsageProfile& profile) {
  std::ostringstream os;
  os << "profile " << profile.name << " {\n";
  print_statements(os, profile.statements, 1, nullptr);
  os << "}\n";
  return os.str();
}

std::vector<Statement> unroll(const std::vector<Statement>& statements) {
  std::vector<Statement> out;
  for (const auto& st : statements) {
    if (st.kind == Statement::Kind::Repeat) {
      std::vector<Statement> body = unroll(st.body);
      for (unsigned long i = 0; i < st.repeat_count; ++i)
        out.insert(out.end(), body.begin(), body.end());
    } else {
      out.push_back(st);
    }
  }
  return out;
}

UsageProfile unroll(const UsageProfile& profile) {
  UsageProfile out;
  out.name = profile.name;
  out.span = profile.span;
  out.statements = unroll(profile.statements);
  return out;
}

}  // namespace covprob
