#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "covprob/model.hpp"
#include "covprob/stats.hpp"

namespace covprob {

// How a trace ended. Premature carries the service whose coverage region was
// left (or the profile name for a profile-level abort). PreViolation names
// the calling service and the callee whose precondition was violated;
// PostViolation names the service whose postcondition failed.
struct Outcome {
  enum class Kind { Normal, Premature, PostViolation, PreViolation };

  Kind kind = Kind::Normal;
  std::string service;  // Premature / PostViolation / PreViolation callee
  std::string caller;   // PreViolation only

  bool operator==(const Outcome& other) const {
    return kind == other.kind && service == other.service && caller == other.caller;
  }
};

struct TraceEvent {
  enum class Kind { Assign, Sample, CallEnter, CallReturn, Abort };

  Kind kind = Kind::Assign;
  std::string name;  // variable (canonical) or qualified service name
  Int value;         // Assign/Sample: stored value; CallReturn: result
};

struct Trace {
  std::vector<TraceEvent> events;
  Outcome outcome;
  Rational probability = Rational(1);  // product of chosen sample masses
};

// A model-level fault observed while running a trace: the profile called a
// service with its precondition false, or evaluation failed (division by
// zero, unbound variable). Distinct from premature termination.
class ModelFault : public Error {
 public:
  enum class Kind { ProfileContractViolation, EvaluationError };

  ModelFault(Kind kind, const std::string& what, Trace prefix)
      : Error(what), kind_(kind), prefix_(std::move(prefix)) {}

  Kind kind() const { return kind_; }
  const Trace& trace_prefix() const { return prefix_; }

 private:
  Kind kind_;
  Trace prefix_;
};

struct EngineOptions {
  // Counts segment executions and sample branches during exact enumeration.
  unsigned long long branch_budget = 10'000'000ULL;
  // Merge probability mass across traces that agree on the live part of the
  // state at top-level program points. Results are identical either way.
  bool memoize = true;
};

struct ExactResult {
  Rational probability;                         // coverage or correctness
  std::map<std::string, Rational> per_service;  // error mass by service
  Int trace_count = 0;                          // distinct resolved traces
  unsigned long long enumerated_branches = 0;

  Rational error_mass() const;
};

struct ApproxOptions {
  std::uint64_t samples = 10'000;
  double confidence = 0.95;
  std::uint64_t seed = 0;
  int workers = 1;
};

struct IntervalResult {
  Rational estimate;  // successes / samples
  double lo = 0.0;
  double hi = 1.0;
  double confidence = 0.95;
  std::uint64_t samples = 0;
  std::uint64_t successes = 0;
  std::uint64_t seed = 0;
};

// Chooses the value of each sample statement when replaying a single trace.
// sample_index counts resolved samples from 0 in execution order.
using SampleResolver =
    std::function<Int(const std::string& target, const Distribution& dist, std::size_t sample_index)>;

// Run one trace of the profile under coverage semantics, resolving samples
// through `resolver`. The trace probability is the product of the masses of
// the chosen values. Throws ModelFault on contract or evaluation faults.
Trace execute_trace(const SystemModel& m, const UsageProfile& u, const SampleResolver& resolver);

// Exact probability that a random profile run terminates without leaving any
// entered service's coverage region. per_service maps each service to its
// premature-termination mass. probability + total error mass == 1 exactly.
ExactResult exact_coverage(const SystemModel& m, const UsageProfile& u,
                           const EngineOptions& options = {});

// Exact probability that a random profile run raises no contract error:
// no service-level call with the callee's precondition false and no
// postcondition violation at a service exit. Coverage regions are ignored.
ExactResult exact_correctness(const SystemModel& m, const UsageProfile& u,
                              const EngineOptions& options = {});

// Monte-Carlo estimate of coverage probability with an exact
// (Clopper-Pearson) binomial interval. Bit-identical for equal
// (model, profile, samples, confidence, seed) regardless of workers.
IntervalResult approx_coverage(const SystemModel& m, const UsageProfile& u,
                               const ApproxOptions& options = {});

// Exact probability that the named service ("Component.service") is entered
// at least once. Entry counts even when the coverage check then fails.
Rational call_probability(const SystemModel& m, const UsageProfile& u,
                          const std::string& qualified_service,
                          const EngineOptions& options = {});

// Sum over services of premature-termination mass times the service's error
// cost; profile-level aborts count with cost 1.
Rational expected_error_cost(const SystemModel& m, const UsageProfile& u,
                             const EngineOptions& options = {});

// Executes a single service from explicit initial states (parameters plus
// all component state), checking callee preconditions at call sites and the
// own postcondition at exit. Callee bodies are not executed; a skipped call
// with a result target yields result 0.
class RegionExecutor {
 public:
  RegionExecutor(const SystemModel& m, const ServiceModel& s);
  ~RegionExecutor();
  RegionExecutor(RegionExecutor&&) noexcept;

  // true when execution from `state` raises no contract error.
  bool ok(const State& state);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct CorrectnessRegion {
  std::vector<State> states;  // enumeration order (names sorted, values ascending)
  FormulaPtr formula;         // canonical DNF of point formulas; false if empty
  Int states_checked = 0;
};

// The set of initial states over the given domains from which the service
// executes without contract errors, as a state set and its DNF formula.
// `domains` must cover the parameters and all state variables.
CorrectnessRegion correctness_region(const SystemModel& m, const ServiceModel& s,
                                     const Signature& domains,
                                     unsigned long long max_states = 10'000'000ULL);

}  // namespace covprob
