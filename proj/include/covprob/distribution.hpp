#pragma once

#include <string>
#include <utility>
#include <vector>

#include "covprob/rational.hpp"

namespace covprob {

// Finite integer distribution. All constructors materialize an explicit pmf:
// strictly positive rational masses over distinct sorted support points,
// summing exactly to 1. The original shape is kept for printing.
class Distribution {
 public:
  enum class Kind { Uniform, NormalD, Pmf };

  static Distribution uniform(Int lo, Int hi);
  static Distribution pmf(std::vector<std::pair<Int, Rational>> points);
  // Discretized normal: mass(k) proportional to the Gaussian mass of
  // [k - 1/2, k + 1/2], rounded to multiples of 1/precision_denominator,
  // zero-mass points dropped, then renormalized exactly. Support is clipped
  // to [mu - 6 sigma, mu + 6 sigma]. sigma must be > 0 and
  // precision_denominator >= 10^6.
  static Distribution discretized_normal(const Rational& mu, const Rational& sigma,
                                         unsigned long precision_denominator = 1'000'000UL);

  Kind kind() const { return kind_; }
  const std::vector<std::pair<Int, Rational>>& points() const { return points_; }
  const Int& min() const { return points_.front().first; }
  const Int& max() const { return points_.back().first; }
  Rational mass_at(const Int& value) const;  // 0 outside the support

  // Shape parameters, for printing. Uniform: lo/hi; NormalD: mu/sigma plus
  // the precision denominator.
  const Int& uniform_lo() const { return uniform_lo_; }
  const Int& uniform_hi() const { return uniform_hi_; }
  const Rational& mu() const { return mu_; }
  const Rational& sigma() const { return sigma_; }
  unsigned long precision_denominator() const { return precision_den_; }

  bool operator==(const Distribution& other) const;

  std::string to_string() const;

 private:
  Distribution() = default;

  Kind kind_ = Kind::Pmf;
  std::vector<std::pair<Int, Rational>> points_;
  Int uniform_lo_, uniform_hi_;
  Rational mu_, sigma_;
  unsigned long precision_den_ = 0;
};

// Free-function form of Distribution::discretized_normal.
Distribution materialize_normal(const Rational& mu, const Rational& sigma,
                                unsigned long precision_denominator = 1'000'000UL);

}  // namespace covprob
