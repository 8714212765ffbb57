#include "covprob/rational.hpp"

#include <string>

namespace covprob {

std::string rational_to_string(const Rational& r) {
  if (r.get_den() == 1) return r.get_num().get_str();
  return r.get_num().get_str() + "/" + r.get_den().get_str();
}

namespace {

Int pow10(unsigned long exp) {
  Int p;
  mpz_ui_pow_ui(p.get_mpz_t(), 10, exp);
  return p;
}

// floor(x + 1/2) for x >= 0
Int round_half_up(const Rational& x) {
  Rational shifted = x + Rational(1, 2);
  Int q;
  mpz_fdiv_q(q.get_mpz_t(), shifted.get_num().get_mpz_t(), shifted.get_den().get_mpz_t());
  return q;
}

}  // namespace

std::string rational_to_decimal(const Rational& r, int significant_digits) {
  if (significant_digits < 1) significant_digits = 1;
  if (r == 0) return "0";

  bool negative = r < 0;
  Rational a = negative ? Rational(-r) : r;

  // Largest e with 10^e <= a.
  int e = 0;
  if (a >= 1) {
    Rational p(1);
    while (p * 10 <= a) {
      p *= 10;
      ++e;
    }
  } else {
    Rational p(1);
    while (p > a) {
      p /= 10;
      --e;
    }
  }

  int shift = significant_digits - 1 - e;
  Rational scaled = a;
  if (shift >= 0) {
    scaled *= Rational(pow10(static_cast<unsigned long>(shift)));
  } else {
    scaled /= Rational(pow10(static_cast<unsigned long>(-shift)));
  }
  Int digits = round_half_up(scaled);
  Int cap = pow10(static_cast<unsigned long>(significant_digits));
  if (digits >= cap) {  // rounding carried into one more digit
    digits /= 10;
    ++e;
  }

  std::string ds = digits.get_str();
  while (static_cast<int>(ds.size()) < significant_digits) ds.insert(ds.begin(), '0');

  int point = e + 1;  // digits before the decimal point
  std::string out;
  if (point <= 0) {
    out = "0." + std::string(static_cast<size_t>(-point), '0') + ds;
  } else if (point >= static_cast<int>(ds.size())) {
    out = ds + std::string(static_cast<size_t>(point) - ds.size(), '0');
  } else {
    out = ds.substr(0, static_cast<size_t>(point)) + "." + ds.substr(static_cast<size_t>(point));
  }

  if (out.find('.') != std::string::npos) {
    while (out.back() == '0') out.pop_back();
    if (out.back() == '.') out.pop_back();
  }
  return negative ? "-" + out : out;
}

double rational_to_double(const Rational& r) { return r.get_d(); }

}  // namespace covprob
