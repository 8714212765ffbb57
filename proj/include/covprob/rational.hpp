#pragma once

#include <gmpxx.h>

#include <string>

namespace covprob {

using Int = mpz_class;
using Rational = mpq_class;

inline Rational make_rational(const Int& num, const Int& den) {
  Rational r(num, den);
  r.canonicalize();
  return r;
}

inline Rational make_rational(long num, long den = 1) {
  return make_rational(Int(num), Int(den));
}

// "4/5" when the denominator is not 1, "4" otherwise.
std::string rational_to_string(const Rational& r);

// Round-to-nearest decimal rendering with the given number of significant
// digits, e.g. 4/5 -> "0.8", 1/3 -> "0.333333333333".
std::string rational_to_decimal(const Rational& r, int significant_digits = 12);

double rational_to_double(const Rational& r);

}  // namespace covprob
