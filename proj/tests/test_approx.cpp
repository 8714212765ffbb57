#include <doctest.h>

#include <cmath>

#include "covprob/engine.hpp"
#include "covprob/errors.hpp"
#include "covprob/stats.hpp"
#include "helpers.hpp"

using namespace covprob;
using covprob::testing::load_fixture_model;
using covprob::testing::load_fixture_profile;

namespace {

// Direct binomial tail sums, accurate enough as an oracle for small n.
double tail_ge(std::uint64_t k, std::uint64_t n, double p) {
  double sum = 0.0;
  for (std::uint64_t i = k; i <= n; ++i) {
    double c = 1.0;
    for (std::uint64_t j = 0; j < i; ++j) c *= static_cast<double>(n - j) / static_cast<double>(j + 1);
    sum += c * std::pow(p, static_cast<double>(i)) * std::pow(1 - p, static_cast<double>(n - i));
  }
  return sum;
}

double tail_le(std::uint64_t k, std::uint64_t n, double p) {
  double sum = 0.0;
  for (std::uint64_t i = 0; i <= k; ++i) {
    double c = 1.0;
    for (std::uint64_t j = 0; j < i; ++j) c *= static_cast<double>(n - j) / static_cast<double>(j + 1);
    sum += c * std::pow(p, static_cast<double>(i)) * std::pow(1 - p, static_cast<double>(n - i));
  }
  return sum;
}

Interval cp_by_bisection(std::uint64_t k, std::uint64_t n, double confidence) {
  double alpha = 1.0 - confidence;
  Interval out;
  if (k == 0) {
    out.lo = 0.0;
  } else {
    double target = k == n ? alpha : alpha / 2;
    double a = 0.0, b = 1.0;
    for (int i = 0; i < 80; ++i) {
      double mid = (a + b) / 2;
      (tail_ge(k, n, mid) < target ? a : b) = mid;
    }
    out.lo = (a + b) / 2;
  }
  if (k == n) {
    out.hi = 1.0;
  } else {
    double target = k == 0 ? alpha : alpha / 2;
    double a = 0.0, b = 1.0;
    for (int i = 0; i < 80; ++i) {
      double mid = (a + b) / 2;
      (tail_le(k, n, mid) > target ? a : b) = mid;
    }
    out.hi = (a + b) / 2;
  }
  return out;
}

}  // namespace

TEST_CASE("splitmix64 produces the reference sequence") {
  SplitMix64 rng{0};
  CHECK(rng.next() == 0xE220A8397B1DCDAFULL);
  CHECK(rng.next() == 0x6E789E6AA1B965F4ULL);
  CHECK(rng.next() == 0x06C45D188009454FULL);

  SplitMix64 other{42};
  CHECK(other.next() == 0xBDD732262FEB6E95ULL);
  CHECK(other.next() == 0x28EFE333B266F103ULL);
}

TEST_CASE("splitmix64 doubles stay in the unit interval") {
  SplitMix64 rng{7};
  double sum = 0.0;
  for (int i = 0; i < 2000; ++i) {
    double d = rng.next_double();
    CHECK(d >= 0.0);
    CHECK(d < 1.0);
    sum += d;
  }
  CHECK(sum / 2000 == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("derived streams are deterministic and scattered") {
  SplitMix64 a = SplitMix64::stream_for(99, 0);
  SplitMix64 b = SplitMix64::stream_for(99, 0);
  CHECK(a.next() == b.next());
  CHECK(a.next() == b.next());

  SplitMix64 c = SplitMix64::stream_for(99, 1);
  SplitMix64 d = SplitMix64::stream_for(100, 0);
  SplitMix64 e = SplitMix64::stream_for(99, 0);
  std::uint64_t first = e.next();
  CHECK(c.next() != first);
  CHECK(d.next() != first);
}

TEST_CASE("regularized incomplete beta: identities and known points") {
  CHECK(reg_inc_beta(0.0, 3, 2) == 0.0);
  CHECK(reg_inc_beta(1.0, 3, 2) == 1.0);
  // I_x(1, 1) is the identity
  CHECK(reg_inc_beta(0.3, 1, 1) == doctest::Approx(0.3).epsilon(1e-12));
  // I_x(1, b) = 1 - (1-x)^b
  CHECK(reg_inc_beta(0.2, 1, 4) == doctest::Approx(1 - std::pow(0.8, 4)).epsilon(1e-12));
  // symmetry I_x(a, b) = 1 - I_{1-x}(b, a)
  CHECK(reg_inc_beta(0.37, 5, 2) ==
        doctest::Approx(1 - reg_inc_beta(0.63, 2, 5)).epsilon(1e-12));

  CHECK(beta_quantile(reg_inc_beta(0.42, 4, 7), 4, 7) == doctest::Approx(0.42).epsilon(1e-9));
}

TEST_CASE("clopper-pearson matches direct tail bisection") {
  const double confs[] = {0.8, 0.9, 0.95, 0.99};
  for (std::uint64_t n : {1ULL, 2ULL, 5ULL, 10ULL, 17ULL, 30ULL}) {
    for (std::uint64_t k = 0; k <= n; ++k) {
      for (double conf : confs) {
        Interval got = clopper_pearson(k, n, conf);
        Interval want = cp_by_bisection(k, n, conf);
        CHECK(got.lo == doctest::Approx(want.lo).epsilon(1e-7));
        CHECK(got.hi == doctest::Approx(want.hi).epsilon(1e-7));
        CHECK(got.lo <= static_cast<double>(k) / static_cast<double>(n));
        CHECK(got.hi >= static_cast<double>(k) / static_cast<double>(n));
      }
    }
  }
}

TEST_CASE("clopper-pearson frozen values") {
  Interval i = clopper_pearson(8, 10, 0.95);
  CHECK(i.lo == doctest::Approx(0.4439045).epsilon(5e-6));
  CHECK(i.hi == doctest::Approx(0.9747893).epsilon(5e-6));

  Interval all = clopper_pearson(1, 1, 0.8);
  CHECK(all.lo == doctest::Approx(0.2).epsilon(1e-9));
  CHECK(all.hi == 1.0);

  Interval none = clopper_pearson(0, 5, 0.95);
  CHECK(none.lo == 0.0);
  CHECK(none.hi == doctest::Approx(0.4507197).epsilon(5e-6));

  // wider confidence, wider interval
  Interval narrow = clopper_pearson(8, 10, 0.9);
  Interval wide = clopper_pearson(8, 10, 0.99);
  CHECK(wide.lo < narrow.lo);
  CHECK(wide.hi > narrow.hi);
}

TEST_CASE("approximate coverage is reproducible and worker-independent") {
  SystemModel m = load_fixture_model("energy_small.quac");
  UsageProfile u = load_fixture_profile("usage_small.quac", m);

  ApproxOptions opt;
  opt.samples = 10'000;
  opt.seed = 42;

  IntervalResult first = approx_coverage(m, u, opt);
  IntervalResult again = approx_coverage(m, u, opt);
  CHECK(first.successes == again.successes);
  CHECK(first.lo == again.lo);
  CHECK(first.hi == again.hi);

  ApproxOptions threaded = opt;
  threaded.workers = 3;
  IntervalResult parallel = approx_coverage(m, u, threaded);
  CHECK(parallel.successes == first.successes);
  CHECK(parallel.estimate == first.estimate);
  CHECK(parallel.lo == first.lo);
  CHECK(parallel.hi == first.hi);

  // frozen run: seed 42, 10000 samples
  CHECK(first.successes == 8002);
  CHECK(first.estimate == Rational(4001, 5000));
  CHECK(first.lo == doctest::Approx(0.7922262).epsilon(1e-6));
  CHECK(first.hi == doctest::Approx(0.8079986).epsilon(1e-6));
  CHECK(first.samples == 10'000);
  CHECK(first.confidence == 0.95);
  CHECK(first.seed == 42);
}

TEST_CASE("approximate coverage concentrates near the exact value") {
  SystemModel m = load_fixture_model("energy_small.quac");
  UsageProfile u = load_fixture_profile("usage_small.quac", m);
  const double exact = 0.8;

  double total_error = 0.0;
  int contained = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    ApproxOptions opt;
    opt.samples = 10'000;
    opt.seed = seed;
    IntervalResult r = approx_coverage(m, u, opt);
    total_error += std::fabs(rational_to_double(r.estimate) - exact);
    if (r.lo <= exact && exact <= r.hi) ++contained;
    CHECK(r.lo <= rational_to_double(r.estimate));
    CHECK(rational_to_double(r.estimate) <= r.hi);
  }
  CHECK(total_error / 20 <= 0.01);
  CHECK(contained >= 17);  // 95% intervals; a couple of misses would be unusual
}

TEST_CASE("sampling faults surface the smallest faulting trace index") {
  SystemModel m = load_fixture_model("energy_small.quac");
  UsageProfile u;
  u.name = "Div";
  u.statements.push_back(make_sample("x", Distribution::uniform(Int(0), Int(9))));
  u.statements.push_back(
      make_assign("y", binary(BinaryOp::Div, lit(1L), var("x")), parse_formula("x == 0")));

  ApproxOptions opt;
  opt.samples = 2'000;
  opt.seed = 5;

  auto run = [&](int workers) {
    ApproxOptions o = opt;
    o.workers = workers;
    try {
      approx_coverage(m, u, o);
      return std::string("no fault");
    } catch (const ModelFault& f) {
      REQUIRE(!f.trace_prefix().events.empty());
      const TraceEvent& e = f.trace_prefix().events.back();
      CHECK(e.kind == TraceEvent::Kind::Sample);
      CHECK(e.value == 0);
      return std::string(f.what());
    }
  };

  std::string solo = run(1);
  CHECK(solo != "no fault");
  CHECK(run(3) == solo);  // same faulting trace regardless of partitioning
}
