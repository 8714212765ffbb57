#pragma once

#include <cstdint>

namespace covprob {

// Deterministic 64-bit generator (SplitMix64). Streams derived with
// stream_for are decorrelated and stable across platforms and worker counts.
struct SplitMix64 {
  std::uint64_t state = 0;

  std::uint64_t next();
  // Uniform on [0, 1) with 53 bits; only used where exactness is not needed.
  double next_double();

  static SplitMix64 stream_for(std::uint64_t seed, std::uint64_t stream_index);
};

// Regularized incomplete beta function I_x(a, b) via the continued-fraction
// expansion (modified Lentz). Accurate to ~1e-14 for the a, b used here.
double reg_inc_beta(double x, double a, double b);

// Inverse of I_x(a, b) in x, by bisection. p in [0, 1].
double beta_quantile(double p, double a, double b);

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

// Exact (Clopper-Pearson) binomial confidence interval for k successes out
// of n at the given confidence level. Interior k uses equal-tailed Beta
// quantiles; k = 0 and k = n use the one-sided bound at the full error
// budget, so n = 1, k = 1, confidence 0.8 gives [0.2, 1].
Interval clopper_pearson(std::uint64_t k, std::uint64_t n, double confidence);

}  // namespace covprob
