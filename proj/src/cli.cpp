#include "covprob/cli.hpp"

#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "covprob/dsl.hpp"
#include "covprob/engine.hpp"
#include "covprob/model.hpp"
#include "covprob/proofs.hpp"
#include "covprob/qpp.hpp"

namespace covprob {
namespace {

using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Integers that survive a round trip through a double stay numeric; larger
// ones are emitted as strings so nothing silently loses precision.
json int_json(const Int& v) {
  static const Int limit = Int(1) << 53;
  if (v < limit && v > -limit) return json(static_cast<std::int64_t>(v.get_si()));
  return json(v.get_str());
}

json rational_json(const Rational& r) {
  json j;
  j["num"] = int_json(Int(r.get_num()));
  j["den"] = int_json(Int(r.get_den()));
  j["decimal"] = rational_to_decimal(r);
  return j;
}

json uint_json(unsigned long long v) {
  if (v < (1ULL << 53)) return json(v);
  return json(std::to_string(v));
}

struct DomainSpec {
  std::string name;
  Int lo, hi;
};

// "Network.load=0..8,n=-2..5"
std::vector<DomainSpec> parse_domain_list(const std::string& text) {
  std::vector<DomainSpec> out;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t comma = text.find(',', pos);
    std::string item = text.substr(pos, comma == std::string::npos ? comma : comma - pos);
    pos = comma == std::string::npos ? text.size() : comma + 1;
    if (item.empty()) continue;
    size_t eq = item.find('=');
    size_t dots = item.find("..", eq == std::string::npos ? 0 : eq + 1);
    if (eq == std::string::npos || dots == std::string::npos)
      throw Error("bad domain '" + item + "', expected NAME=LO..HI");
    DomainSpec d;
    d.name = item.substr(0, eq);
    try {
      d.lo = Int(item.substr(eq + 1, dots - eq - 1));
      d.hi = Int(item.substr(dots + 2));
    } catch (const std::invalid_argument&) {
      throw Error("bad domain bounds in '" + item + "'");
    }
    if (d.lo > d.hi) throw Error("empty domain '" + item + "'");
    out.push_back(std::move(d));
  }
  return out;
}

std::string trace_event_line(const TraceEvent& e) {
  switch (e.kind) {
    case TraceEvent::Kind::Sample:
      return e.name + " ~ " + e.value.get_str();
    case TraceEvent::Kind::Assign:
      return e.name + " = " + e.value.get_str();
    case TraceEvent::Kind::CallEnter:
      return "enter " + e.name;
    case TraceEvent::Kind::CallReturn:
      return "return " + e.name + " = " + e.value.get_str();
    case TraceEvent::Kind::Abort:
      return "abort in " + e.name;
  }
  return "?";
}

void print_fault(const ModelFault& f, std::ostream& err) {
  err << "fault: " << f.what() << "\n";
  if (!f.trace_prefix().events.empty()) {
    err << "trace prefix:\n";
    for (const auto& e : f.trace_prefix().events) err << "  " << trace_event_line(e) << "\n";
  }
}

// Renders canonical state names the way the service's own text reads: the
// component prefix is dropped unless a parameter shadows the plain name.
NameRenderer scoped_renderer(const ServiceModel& s) {
  std::set<std::string> taken{"result"};
  for (const auto& p : s.params) taken.insert(p.name);
  std::string prefix = s.component + ".";
  return [taken, prefix](const std::string& name) {
    if (name.rfind(prefix, 0) != 0) return name;
    std::string plain = name.substr(prefix.size());
    return taken.count(plain) ? name : plain;
  };
}

struct CommonArgs {
  std::string model_path;
  std::string profile_path;
  std::string format;
  unsigned long long budget = 10'000'000ULL;
  bool no_memo = false;
};

SystemModel load_model(const CommonArgs& a, std::ostream& err) {
  SystemModel m = parse_model(read_file(a.model_path), a.model_path);
  auto diags = validate_model(m);
  for (const auto& d : diags) err << d.to_string() << "\n";
  if (has_errors(diags)) throw ParseError("Validation", "model has errors", SourceSpan{a.model_path, 0, 0, 0});
  return m;
}

UsageProfile load_profile(const CommonArgs& a, const SystemModel& m, std::ostream& err) {
  UsageProfile u = parse_profile(read_file(a.profile_path), m, a.profile_path);
  auto diags = validate_model(m, &u);
  for (const auto& d : diags) err << d.to_string() << "\n";
  if (has_errors(diags))
    throw ParseError("Validation", "profile has errors", SourceSpan{a.profile_path, 0, 0, 0});
  return u;
}

EngineOptions engine_options(const CommonArgs& a) {
  EngineOptions o;
  o.branch_budget = a.budget;
  o.memoize = !a.no_memo;
  return o;
}

void emit_exact(const CommonArgs& a, const ExactResult& r, const std::string& mode,
                std::ostream& out) {
  if (a.format == "text") {
    out << mode << " probability: " << rational_to_string(r.probability) << " ("
        << rational_to_decimal(r.probability) << ")\n";
    for (const auto& [name, mass] : r.per_service)
      out << "  error mass " << name << ": " << rational_to_string(mass) << "\n";
    out << "traces: " << r.trace_count.get_str() << "\n";
    out << "enumerated branches: " << r.enumerated_branches << "\n";
    return;
  }
  json j;
  j["mode"] = mode;
  j["model"] = a.model_path;
  j["profile"] = a.profile_path;
  j[mode + "_probability"] = rational_json(r.probability);
  json per = json::object();
  for (const auto& [name, mass] : r.per_service) per[name] = rational_json(mass);
  j["per_service"] = per;
  j["error_mass"] = rational_json(r.error_mass());
  j["trace_count"] = int_json(r.trace_count);
  j["enumerated_branches"] = uint_json(r.enumerated_branches);
  out << j.dump(2) << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"coverage-probability analyses for component models"};
  app.require_subcommand(1);

  CommonArgs a;
  std::string service_name, goals_path, domains_text;
  ApproxOptions approx;

  auto add_common = [&a](CLI::App* cmd, bool needs_profile) {
    cmd->add_option("-m,--model", a.model_path, "model file")->required();
    auto* p = cmd->add_option("-p,--profile", a.profile_path, "usage profile file");
    if (needs_profile) p->required();
    return cmd;
  };
  auto add_budget = [&a](CLI::App* cmd) {
    cmd->add_option("--budget", a.budget, "branch budget for exact enumeration");
    cmd->add_flag("--no-memo", a.no_memo, "disable state merging");
  };

  CLI::App* check = add_common(app.add_subcommand("check", "validate a model and profile"), false);
  check->add_option("--domains", domains_text, "extra ranges NAME=LO..HI[,...]");

  CLI::App* exact =
      add_common(app.add_subcommand("exact", "exact coverage probability"), true);
  add_budget(exact);
  exact->add_option("--format", a.format, "json or text");

  CLI::App* correctness =
      add_common(app.add_subcommand("correctness", "exact correctness probability"), true);
  add_budget(correctness);
  correctness->add_option("--format", a.format, "json or text");

  CLI::App* approx_cmd = add_common(
      app.add_subcommand("approx", "estimate coverage probability by sampling"), true);
  approx_cmd->add_option("--samples", approx.samples, "number of sampled traces")
      ->default_val(10'000);
  approx_cmd->add_option("--confidence", approx.confidence, "interval confidence level")
      ->default_val(0.95);
  approx_cmd->add_option("--seed", approx.seed, "base random seed")->default_val(0);
  approx_cmd->add_option("--workers", approx.workers, "worker threads")->default_val(1);
  approx_cmd->add_option("--format", a.format, "json or text");

  CLI::App* callprob =
      add_common(app.add_subcommand("callprob", "probability a service is entered"), true);
  callprob->add_option("--service", service_name, "qualified Component.service")->required();
  add_budget(callprob);
  callprob->add_option("--format", a.format, "json or text");

  CLI::App* cost = add_common(
      app.add_subcommand("cost", "expected error cost under the profile"), true);
  add_budget(cost);
  cost->add_option("--format", a.format, "json or text");

  CLI::App* regions = add_common(
      app.add_subcommand("regions", "coverage region from residual proof goals"), false);
  regions->add_option("--goals", goals_path, "goal file (json)")->required();
  regions->add_option("--domains", domains_text, "check ranges NAME=LO..HI[,...]");
  regions->add_option("--format", a.format, "json or text");

  CLI::App* export_cmd = add_common(
      app.add_subcommand("export", "flatten to the probabilistic-program format"), true);
  std::string export_format = "qpp";
  export_cmd->add_option("--format", export_format, "qpp");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (app.got_subcommand(check)) {
      SystemModel m = parse_model(read_file(a.model_path), a.model_path);
      std::vector<Diagnostic> diags;
      UsageProfile u;
      bool have_profile = !a.profile_path.empty();
      if (have_profile) u = parse_profile(read_file(a.profile_path), m, a.profile_path);
      diags = validate_model(m, have_profile ? &u : nullptr);
      if (have_profile && !has_errors(diags)) {
        Signature extra;
        for (const auto& d : parse_domain_list(domains_text))
          extra.declare(d.name, VarType::Int, d.lo, d.hi);
        auto pre = static_pre_check(m, u, domains_text.empty() ? nullptr : &extra);
        diags.insert(diags.end(), pre.begin(), pre.end());
      }
      for (const auto& d : diags) err << d.to_string() << "\n";
      if (has_errors(diags)) return 1;
      out << "ok\n";
      return 0;
    }

    if (app.got_subcommand(exact) || app.got_subcommand(correctness)) {
      bool cov = app.got_subcommand(exact);
      SystemModel m = load_model(a, err);
      UsageProfile u = load_profile(a, m, err);
      ExactResult r = cov ? exact_coverage(m, u, engine_options(a))
                          : exact_correctness(m, u, engine_options(a));
      emit_exact(a, r, cov ? "coverage" : "correctness", out);
      return 0;
    }

    if (app.got_subcommand(approx_cmd)) {
      SystemModel m = load_model(a, err);
      UsageProfile u = load_profile(a, m, err);
      IntervalResult r = approx_coverage(m, u, approx);
      if (a.format == "text") {
        out << "estimate: " << rational_to_string(r.estimate) << " ("
            << rational_to_decimal(r.estimate) << ")\n";
        out << "interval: [" << r.lo << ", " << r.hi << "] at confidence " << r.confidence
            << "\n";
        out << "samples: " << r.samples << ", successes: " << r.successes << ", seed: " << r.seed
            << "\n";
      } else {
        json j;
        j["mode"] = "approx";
        j["model"] = a.model_path;
        j["profile"] = a.profile_path;
        j["estimate"] = rational_json(r.estimate);
        j["interval"] = json{{"lo", r.lo}, {"hi", r.hi}};
        j["confidence"] = r.confidence;
        j["samples"] = uint_json(r.samples);
        j["successes"] = uint_json(r.successes);
        j["seed"] = uint_json(r.seed);
        j["workers"] = approx.workers;
        out << j.dump(2) << "\n";
      }
      return 0;
    }

    if (app.got_subcommand(callprob)) {
      SystemModel m = load_model(a, err);
      UsageProfile u = load_profile(a, m, err);
      if (m.find_service_qualified(service_name) == nullptr)
        throw ParseError("UnknownReference", "unknown service " + service_name,
                         SourceSpan{a.model_path, 0, 0, 0});
      Rational p = call_probability(m, u, service_name, engine_options(a));
      if (a.format == "text") {
        out << "call probability of " << service_name << ": " << rational_to_string(p) << " ("
            << rational_to_decimal(p) << ")\n";
      } else {
        json j;
        j["mode"] = "call_probability";
        j["model"] = a.model_path;
        j["profile"] = a.profile_path;
        j["service"] = service_name;
        j["probability"] = rational_json(p);
        out << j.dump(2) << "\n";
      }
      return 0;
    }

    if (app.got_subcommand(cost)) {
      SystemModel m = load_model(a, err);
      UsageProfile u = load_profile(a, m, err);
      Rational c = expected_error_cost(m, u, engine_options(a));
      if (a.format == "text") {
        out << "expected error cost: " << rational_to_string(c) << " ("
            << rational_to_decimal(c) << ")\n";
      } else {
        json j;
        j["mode"] = "expected_error_cost";
        j["model"] = a.model_path;
        j["profile"] = a.profile_path;
        j["expected_error_cost"] = rational_json(c);
        out << j.dump(2) << "\n";
      }
      return 0;
    }

    if (app.got_subcommand(regions)) {
      SystemModel m = load_model(a, err);
      ProofGoals goals = parse_goals(read_file(goals_path), m, goals_path);
      const ServiceModel* svc = m.find_service_qualified(goals.service);
      FormulaPtr region = region_for_model(goals, m, *svc);

      Signature domains = m.state_signature();
      for (const auto& p : svc->params) domains.declare(p.name, p.type);
      for (const auto& d : parse_domain_list(domains_text)) {
        if (!domains.contains(d.name)) domains.declare(d.name, VarType::Int);
        domains.set_domain(d.name, d.lo, d.hi);
      }
      std::vector<std::string> assumed;
      for (const auto& name : service_scope(m, *svc)) {
        if (!domains.info(name).domain.has_value()) {
          domains.set_domain(name, Int(-8), Int(8));
          assumed.push_back(name);
        }
      }

      RegionCheck chk = check_region_correct(m, *svc, *region, domains);
      NameRenderer render = scoped_renderer(*svc);

      if (a.format == "json") {
        json j;
        j["mode"] = "regions";
        j["model"] = a.model_path;
        j["service"] = goals.service;
        j["region"] = print_formula(*region, render);
        j["region_canonical"] = print_formula(*region);
        j["correct"] = chk.correct;
        j["states_checked"] = int_json(chk.states_checked);
        json doms = json::object();
        for (const auto& name : service_scope(m, *svc)) {
          const auto& d = *domains.info(name).domain;
          doms[name] = json::array({int_json(d.first), int_json(d.second)});
        }
        j["domains"] = doms;
        json defaulted = json::array();
        for (const auto& name : assumed) defaulted.push_back(name);
        j["defaulted_domains"] = defaulted;
        if (chk.witness.has_value()) {
          json w = json::object();
          for (const auto& [name, value] : chk.witness->values()) w[render(name)] = int_json(value);
          j["counterexample"] = w;
        }
        out << j.dump(2) << "\n";
      } else {
        out << "service: " << goals.service << "\n";
        out << "region: " << print_formula(*region, render) << "\n";
        out << "correct on declared domains: " << (chk.correct ? "yes" : "no") << "\n";
        if (chk.witness.has_value()) {
          out << "counterexample:";
          bool first = true;
          for (const auto& [name, value] : chk.witness->values()) {
            out << (first ? " " : ", ") << render(name) << " = " << value.get_str();
            first = false;
          }
          out << "\n";
        }
        out << "states checked: " << chk.states_checked.get_str() << "\n";
        if (!assumed.empty()) {
          out << "assumed domain [-8, 8] for:";
          for (size_t i = 0; i < assumed.size(); ++i)
            out << (i == 0 ? " " : ", ") << assumed[i];
          out << "\n";
        }
      }
      return chk.correct ? 0 : 2;
    }

    if (app.got_subcommand(export_cmd)) {
      if (export_format != "qpp") {
        err << "unknown export format: " << export_format << "\n";
        return 1;
      }
      SystemModel m = load_model(a, err);
      UsageProfile u = load_profile(a, m, err);
      out << export_prob_program(m, u);
      return 0;
    }
  } catch (const ModelFault& f) {
    print_fault(f, err);
    return 2;
  } catch (const BranchBudgetExceeded& e) {
    err << "fault: " << e.what() << "\n";
    return 2;
  } catch (const StateSpaceTooLarge& e) {
    err << "fault: " << e.what() << "\n";
    return 2;
  } catch (const SizeBudgetExceeded& e) {
    err << "fault: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    err << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace covprob
