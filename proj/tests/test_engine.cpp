#include <doctest.h>

#include <map>
#include <string>
#include <vector>

#include "covprob/engine.hpp"
#include "covprob/errors.hpp"
#include "generators.hpp"
#include "helpers.hpp"

using namespace covprob;
using covprob::testing::load_fixture_model;
using covprob::testing::load_fixture_profile;

namespace {

SampleResolver fixed(std::map<std::string, long> values) {
  return [values](const std::string& target, const Distribution&, std::size_t) {
    return Int(values.at(target));
  };
}

long count_kind(const Trace& t, TraceEvent::Kind k) {
  long n = 0;
  for (const auto& e : t.events)
    if (e.kind == k) ++n;
  return n;
}

// Exhaustive enumeration of all sample paths through execute_trace, used as
// an oracle for the exact analysis. Returns outcome mass keyed like
// ExactResult::per_service plus the normal mass and the path count.
struct BruteForce {
  Rational normal = Rational(0);
  std::map<std::string, Rational> premature;
  Rational total = Rational(0);
  long paths = 0;
};

BruteForce brute_force_coverage(const SystemModel& m, const UsageProfile& u) {
  BruteForce out;
  std::vector<std::vector<Int>> supports;
  std::vector<std::size_t> chosen;

  for (;;) {
    std::size_t used = 0;
    SampleResolver resolver = [&](const std::string&, const Distribution& d, std::size_t k) {
      if (k >= supports.size()) {
        std::vector<Int> values;
        for (const auto& [v, mass] : d.points()) values.push_back(v);
        supports.push_back(std::move(values));
        chosen.push_back(0);
      }
      used = std::max(used, k + 1);
      return supports[k][chosen[k]];
    };

    Trace t = execute_trace(m, u, resolver);
    ++out.paths;
    out.total += t.probability;
    if (t.outcome.kind == Outcome::Kind::Normal)
      out.normal += t.probability;
    else
      out.premature[t.outcome.service] += t.probability;

    supports.resize(used);
    chosen.resize(used);
    while (!chosen.empty()) {
      if (++chosen.back() < supports[chosen.size() - 1].size()) break;
      chosen.pop_back();
      supports.pop_back();
    }
    if (chosen.empty()) return out;
  }
}

}  // namespace

TEST_CASE("execute_trace: a normal run records the full event history") {
  SystemModel m = load_fixture_model("energy_small.quac");
  UsageProfile u = load_fixture_profile("usage_small.quac", m);

  Trace t = execute_trace(m, u, fixed({{"windSpeed", 8}, {"demand", 2}}));
  CHECK(t.outcome.kind == Outcome::Kind::Normal);
  CHECK(t.probability == Rational(1, 25));
  CHECK(count_kind(t, TraceEvent::Kind::Sample) == 2);
  CHECK(count_kind(t, TraceEvent::Kind::CallEnter) == 4);   // produce, addLoad, consume, useLoad
  CHECK(count_kind(t, TraceEvent::Kind::CallReturn) == 4);

  REQUIRE(!t.events.empty());
  CHECK(t.events[0].kind == TraceEvent::Kind::Sample);
  CHECK(t.events[0].name == "windSpeed");
  CHECK(t.events[0].value == 8);

  // 8 * 3 / 4 = 6 produced, 2 consumed
  bool saw_final_load = false;
  for (const auto& e : t.events)
    if (e.kind == TraceEvent::Kind::Assign && e.name == "Network.load" && e.value == 4)
      saw_final_load = true;
  CHECK(saw_final_load);
}

TEST_CASE("execute_trace: leaving a coverage region ends the trace prematurely") {
  SystemModel m = load_fixture_model("energy_small.quac");
  UsageProfile u = load_fixture_profile("usage_small.quac", m);

  // windSpeed 5 adds 5*3/4 = 3, demand 4 exceeds it inside useLoad
  Trace t = execute_trace(m, u, fixed({{"windSpeed", 5}, {"demand", 4}}));
  CHECK(t.outcome.kind == Outcome::Kind::Premature);
  CHECK(t.outcome.service == "Network.useLoad");
  CHECK(t.probability == Rational(1, 25));
  CHECK(t.events.back().kind == TraceEvent::Kind::CallEnter);
  CHECK(t.events.back().name == "Network.useLoad");
}

TEST_CASE("execute_trace: profile-level precondition violations are faults") {
  SystemModel m = load_fixture_model("energy_small.quac");
  UsageProfile u;
  u.name = "Bad";
  u.statements.push_back(make_call("Consumer", "consume", {lit(-1L)}));

  try {
    execute_trace(m, u, fixed({}));
    FAIL("expected ModelFault");
  } catch (const ModelFault& f) {
    CHECK(f.kind() == ModelFault::Kind::ProfileContractViolation);
    CHECK(!f.trace_prefix().events.empty());
    CHECK(f.trace_prefix().events.back().kind == TraceEvent::Kind::CallEnter);
  }
}

TEST_CASE("execute_trace: evaluation faults carry the trace prefix") {
  SystemModel m = load_fixture_model("energy_small.quac");
  UsageProfile u;
  u.name = "Div";
  u.statements.push_back(make_assign("x", lit(1L)));
  u.statements.push_back(make_assign("y", binary(BinaryOp::Div, lit(1L), lit(0L))));

  try {
    execute_trace(m, u, fixed({}));
    FAIL("expected ModelFault");
  } catch (const ModelFault& f) {
    CHECK(f.kind() == ModelFault::Kind::EvaluationError);
    CHECK(f.trace_prefix().events.size() == 1);  // the first assign
  }
}

TEST_CASE("exact coverage of the small system") {
  SystemModel m = load_fixture_model("energy_small.quac");
  UsageProfile u = load_fixture_profile("usage_small.quac", m);

  ExactResult r = exact_coverage(m, u);
  CHECK(r.probability == Rational(4, 5));
  CHECK(r.trace_count == 25);
  CHECK(r.enumerated_branches > 0);
  REQUIRE(r.per_service.size() == 1);
  CHECK(r.per_service.at("Network.useLoad") == Rational(1, 5));
  CHECK(r.error_mass() == Rational(1, 5));
  CHECK(r.probability + r.error_mass() == Rational(1));
}

TEST_CASE("exact correctness of the small system") {
  SystemModel m = load_fixture_model("energy_small.quac");
  UsageProfile u = load_fixture_profile("usage_small.quac", m);

  ExactResult r = exact_correctness(m, u);
  CHECK(r.probability == Rational(4, 5));
  CHECK(r.trace_count == 25);
  REQUIRE(r.per_service.size() == 1);
  // load goes negative, so the postcondition of Network.useLoad fails
  CHECK(r.per_service.at("Network.useLoad") == Rational(1, 5));
}

TEST_CASE("a violated precondition is charged to the calling service") {
  SystemModel m;
  Component a;
  a.name = "A";
  ServiceModel caller;
  caller.component = "A";
  caller.name = "run";
  caller.beh.push_back(make_call("B", "step", {lit(-1L)}));
  a.services.push_back(std::move(caller));
  Component b;
  b.name = "B";
  ServiceModel callee;
  callee.component = "B";
  callee.name = "step";
  callee.params.push_back({"x", VarType::Int});
  callee.pre = parse_formula("x >= 0");
  b.services.push_back(std::move(callee));
  m.components.push_back(std::move(a));
  m.components.push_back(std::move(b));
  REQUIRE(validate_model(m).empty());

  UsageProfile u;
  u.name = "P";
  u.statements.push_back(make_call("A", "run", {}));

  ExactResult r = exact_correctness(m, u);
  CHECK(r.probability == Rational(0));
  REQUIRE(r.per_service.size() == 1);
  CHECK(r.per_service.at("A.run") == Rational(1));

  // coverage mode does not look at preconditions between services
  CHECK(exact_coverage(m, u).probability == Rational(1));
}

TEST_CASE("a false coverage region makes every entry premature") {
  SystemModel m = load_fixture_model("energy_small.quac");
  UsageProfile u = load_fixture_profile("usage_small.quac", m);
  for (auto& c : m.components)
    for (auto& s : c.services)
      if (s.name == "useLoad") s.cov = truth(false);

  // every run reaches useLoad, so nothing survives
  ExactResult r = exact_coverage(m, u);
  CHECK(r.probability == Rational(0));
  CHECK(r.per_service.at("Network.useLoad") == Rational(1));

  // addLoad is only reached below the storm cutoff
  SystemModel m2 = load_fixture_model("energy_small.quac");
  for (auto& c : m2.components)
    for (auto& s : c.services)
      if (s.name == "addLoad") s.cov = truth(false);

  ExactResult r2 = exact_coverage(m2, u);
  CHECK(r2.per_service.at("Network.addLoad") == Rational(4, 5));
  CHECK(r2.per_service.at("Network.useLoad") == Rational(4, 25));
  CHECK(r2.probability == Rational(1, 25));
  CHECK(r2.probability + r2.error_mass() == Rational(1));
}

TEST_CASE("a profile without calls or samples has coverage one") {
  SystemModel m = load_fixture_model("energy_small.quac");
  UsageProfile u;
  u.name = "Empty";
  u.statements.push_back(make_assign("x", lit(3L)));

  ExactResult r = exact_coverage(m, u);
  CHECK(r.probability == Rational(1));
  CHECK(r.per_service.empty());
  CHECK(r.trace_count == 1);
}

TEST_CASE("explicit abort: coverage failure but not a contract error") {
  SystemModel m;
  Component c;
  c.name = "C";
  ServiceModel s;
  s.component = "C";
  s.name = "s";
  s.beh.push_back(make_abort());
  c.services.push_back(std::move(s));
  m.components.push_back(std::move(c));

  UsageProfile u;
  u.name = "P";
  u.statements.push_back(make_call("C", "s", {}));

  ExactResult cov = exact_coverage(m, u);
  CHECK(cov.probability == Rational(0));
  CHECK(cov.per_service.at("C.s") == Rational(1));

  ExactResult cor = exact_correctness(m, u);
  CHECK(cor.probability == Rational(1));
  CHECK(cor.per_service.empty());
}

TEST_CASE("profile-level abort counts against the profile") {
  SystemModel m = load_fixture_model("energy_small.quac");
  UsageProfile u;
  u.name = "Stop";
  u.statements.push_back(make_sample("x", Distribution::uniform(Int(0), Int(3))));
  u.statements.push_back(make_abort(parse_formula("x == 0")));
  u.statements.push_back(make_call("Consumer", "consume", {var("x")}));

  // x == 0 aborts at the profile; any other x exceeds the empty network
  ExactResult r = exact_coverage(m, u);
  CHECK(r.per_service.at("Stop") == Rational(1, 4));
  CHECK(r.per_service.at("Network.useLoad") == Rational(3, 4));
  CHECK(r.probability == Rational(0));
  // profile aborts cost 1, useLoad failures cost 10
  CHECK(expected_error_cost(m, u) == Rational(1, 4) + Rational(30, 4));
}

TEST_CASE("call probabilities on the small system") {
  SystemModel m = load_fixture_model("energy_small.quac");
  UsageProfile u = load_fixture_profile("usage_small.quac", m);

  CHECK(call_probability(m, u, "WindTurbine.produce") == Rational(1));
  CHECK(call_probability(m, u, "Network.addLoad") == Rational(4, 5));
  CHECK(call_probability(m, u, "Network.useLoad") == Rational(1));  // entry precedes the check
  CHECK_THROWS_AS(call_probability(m, u, "Network.nope"), Error);

  UsageProfile quiet;
  quiet.name = "Quiet";
  quiet.statements.push_back(make_assign("x", lit(1L)));
  CHECK(call_probability(m, quiet, "Network.useLoad") == Rational(0));
}

TEST_CASE("expected error cost weighs premature mass by service cost") {
  SystemModel m = load_fixture_model("energy_small.quac");
  UsageProfile u = load_fixture_profile("usage_small.quac", m);
  // only Network.useLoad fails, mass 1/5, cost 10
  CHECK(expected_error_cost(m, u) == Rational(2));
}

TEST_CASE("branch budget exhaustion raises") {
  SystemModel m = load_fixture_model("energy_small.quac");
  UsageProfile u = load_fixture_profile("usage_small.quac", m);
  EngineOptions opt;
  opt.branch_budget = 3;
  CHECK_THROWS_AS(exact_coverage(m, u, opt), BranchBudgetExceeded);
}

TEST_CASE("memoization does not change results") {
  SystemModel m = load_fixture_model("energy_small.quac");
  UsageProfile u = load_fixture_profile("usage_small.quac", m);
  EngineOptions naive;
  naive.memoize = false;

  ExactResult a = exact_coverage(m, u);
  ExactResult b = exact_coverage(m, u, naive);
  CHECK(a.probability == b.probability);
  CHECK(a.per_service == b.per_service);
  CHECK(a.trace_count == b.trace_count);
}

TEST_CASE("exact analysis reports faults found on any branch") {
  SystemModel m = load_fixture_model("energy_small.quac");
  UsageProfile u;
  u.name = "Sometimes";
  u.statements.push_back(make_sample("x", Distribution::uniform(Int(0), Int(1))));
  u.statements.push_back(
      make_assign("y", binary(BinaryOp::Div, lit(1L), var("x")), parse_formula("x == 0")));

  try {
    exact_coverage(m, u);
    FAIL("expected ModelFault");
  } catch (const ModelFault& f) {
    CHECK(f.kind() == ModelFault::Kind::EvaluationError);
    REQUIRE(!f.trace_prefix().events.empty());
    const TraceEvent& e = f.trace_prefix().events.back();
    CHECK(e.kind == TraceEvent::Kind::Sample);
    CHECK(e.name == "x");
    CHECK(e.value == 0);
  }
}

TEST_CASE("exact coverage matches exhaustive path enumeration") {
  int compared = 0;
  for (std::uint64_t seed = 200; seed < 260; ++seed) {
    covprob::testing::Rng rng(seed);
    covprob::testing::GeneratedSystem g = covprob::testing::random_system(rng);
    ExactResult exact;
    try {
      exact = exact_coverage(g.model, g.profile);
    } catch (const ModelFault&) {
      continue;  // faulting systems are compared elsewhere
    }
    BruteForce brute = brute_force_coverage(g.model, g.profile);
    ++compared;
    CHECK(brute.total == Rational(1));
    CHECK(exact.probability == brute.normal);
    CHECK(exact.per_service == brute.premature);
    CHECK(exact.trace_count == brute.paths);
    CHECK(exact.probability + exact.error_mass() == Rational(1));

    EngineOptions naive;
    naive.memoize = false;
    ExactResult plain = exact_coverage(g.model, g.profile, naive);
    CHECK(plain.probability == exact.probability);
    CHECK(plain.per_service == exact.per_service);
    CHECK(plain.trace_count == exact.trace_count);
  }
  CHECK(compared >= 20);  // the generator must not fault almost always
}

TEST_CASE("correctness conserves probability mass on generated systems") {
  int compared = 0;
  for (std::uint64_t seed = 300; seed < 340; ++seed) {
    covprob::testing::Rng rng(seed);
    covprob::testing::GeneratedSystem g = covprob::testing::random_system(rng);
    try {
      ExactResult r = exact_correctness(g.model, g.profile);
      Rational total = r.probability;
      for (const auto& [svc, mass] : r.per_service) total += mass;
      CHECK(total == Rational(1));
      ++compared;
    } catch (const ModelFault&) {
      continue;
    }
  }
  CHECK(compared >= 15);
}

TEST_CASE("coverage equals correctness when regions coincide with preconditions") {
  covprob::testing::SystemOptions opt;
  opt.cov_equals_pre = true;
  opt.post_always_true = true;
  opt.no_aborts = true;

  int compared = 0;
  for (std::uint64_t seed = 400; seed < 460; ++seed) {
    covprob::testing::Rng rng(seed);
    covprob::testing::GeneratedSystem g = covprob::testing::random_system(rng, opt);

    bool cov_threw = false, cor_threw = false;
    ExactResult cov, cor;
    try {
      cov = exact_coverage(g.model, g.profile);
    } catch (const ModelFault&) {
      cov_threw = true;
    }
    try {
      cor = exact_correctness(g.model, g.profile);
    } catch (const ModelFault&) {
      cor_threw = true;
    }
    CHECK(cov_threw == cor_threw);
    if (cov_threw || cor_threw) continue;
    ++compared;
    CHECK(cov.probability == cor.probability);
  }
  CHECK(compared >= 20);
}

TEST_CASE("coverage bounds correctness from below for strengthened regions") {
  covprob::testing::SystemOptions opt;
  opt.cov_strengthens_pre = true;
  opt.post_always_true = true;

  int compared = 0;
  for (std::uint64_t seed = 500; seed < 570; ++seed) {
    covprob::testing::Rng rng(seed);
    covprob::testing::GeneratedSystem g = covprob::testing::random_system(rng, opt);

    ExactResult cor;
    try {
      cor = exact_correctness(g.model, g.profile);
    } catch (const ModelFault&) {
      continue;  // a fault reachable under correctness semantics
    }
    ExactResult cov;
    try {
      cov = exact_coverage(g.model, g.profile);
    } catch (const ModelFault&) {
      FAIL("coverage faulted where correctness did not");
    }
    ++compared;
    CHECK(cov.probability <= cor.probability);
  }
  CHECK(compared >= 20);
}

TEST_CASE("region executor skips callee bodies but checks their preconditions") {
  SystemModel m = load_fixture_model("energy_small.quac");
  const ServiceModel* use = m.find_service("Network", "useLoad");
  RegionExecutor exec(m, *use);

  State good;
  good.set("Network.load", Int(3));
  good.set("n", Int(2));
  CHECK(exec.ok(good));

  State bad;
  bad.set("Network.load", Int(0));
  bad.set("n", Int(2));
  CHECK_FALSE(exec.ok(bad));  // postcondition load >= 0 fails
}

TEST_CASE("correctness region enumerates the admissible states") {
  SystemModel m = load_fixture_model("energy_small.quac");
  const ServiceModel* use = m.find_service("Network", "useLoad");

  Signature sig;
  sig.declare("Network.load", VarType::Int, Int(0), Int(2));
  sig.declare("n", VarType::Int, Int(0), Int(2));

  CorrectnessRegion region = correctness_region(m, *use, sig);
  CHECK(region.states_checked == 9);
  REQUIRE(region.states.size() == 6);  // n <= load over [0,2]^2

  RegionExecutor exec(m, *use);
  for_each_state(sig, {"Network.load", "n"}, [&](const State& s) {
    CHECK(eval_formula(*region.formula, s) == exec.ok(s));
    return true;
  });
}

TEST_CASE("correctness region can be empty") {
  SystemModel m;
  Component c;
  c.name = "C";
  ServiceModel s;
  s.component = "C";
  s.name = "s";
  s.post = truth(false);
  c.services.push_back(std::move(s));
  m.components.push_back(std::move(c));

  Signature sig;
  CorrectnessRegion region = correctness_region(m, m.components[0].services[0], sig);
  CHECK(region.states.empty());
  CHECK(is_false_literal(*region.formula));
}
