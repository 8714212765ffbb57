#include "covprob/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "covprob/errors.hpp"

namespace covprob {

Distribution Distribution::uniform(Int lo, Int hi) {
  if (lo > hi) throw InvalidDistribution("uniform: empty range");
  Distribution d;
  d.kind_ = Kind::Uniform;
  d.uniform_lo_ = lo;
  d.uniform_hi_ = hi;
  Rational mass = make_rational(Int(1), Int(hi - lo + 1));
  for (Int v = lo; v <= hi; ++v) d.points_.emplace_back(v, mass);
  return d;
}

Distribution Distribution::pmf(std::vector<std::pair<Int, Rational>> points) {
  if (points.empty()) throw InvalidDistribution("pmf: empty support");
  std::sort(points.begin(), points.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  Rational total(0);
  for (size_t i = 0; i < points.size(); ++i) {
    if (i > 0 && points[i].first == points[i - 1].first)
      throw InvalidDistribution("pmf: duplicate support point " + points[i].first.get_str());
    if (points[i].second <= 0)
      throw InvalidDistribution("pmf: non-positive mass at " + points[i].first.get_str());
    total += points[i].second;
  }
  if (total != 1) throw InvalidDistribution("pmf: masses sum to " + rational_to_string(total));
  Distribution d;
  d.kind_ = Kind::Pmf;
  d.points_ = std::move(points);
  return d;
}

namespace {

Int ceil_rational(const Rational& r) {
  Int q;
  mpz_cdiv_q(q.get_mpz_t(), r.get_num().get_mpz_t(), r.get_den().get_mpz_t());
  return q;
}

Int floor_rational(const Rational& r) {
  Int q;
  mpz_fdiv_q(q.get_mpz_t(), r.get_num().get_mpz_t(), r.get_den().get_mpz_t());
  return q;
}

}  // namespace

Distribution Distribution::discretized_normal(const Rational& mu, const Rational& sigma,
                                              unsigned long precision_denominator) {
  if (sigma <= 0) throw InvalidDistribution("normal_d: sigma must be positive");
  if (precision_denominator < 1'000'000UL)
    throw InvalidDistribution("normal_d: precision denominator below 1000000");

  Int lo = ceil_rational(mu - 6 * sigma);
  Int hi = floor_rational(mu + 6 * sigma);

  double mu_d = rational_to_double(mu);
  double sigma_d = rational_to_double(sigma);
  double inv = 1.0 / (sigma_d * std::sqrt(2.0));

  std::vector<std::pair<Int, Int>> numerators;  // value -> mass numerator over D
  Int total(0);
  for (Int k = lo; k <= hi; ++k) {
    double kd = k.get_d();
    double a = (kd - 0.5 - mu_d) * inv;
    double b = (kd + 0.5 - mu_d) * inv;
    double raw = 0.5 * (std::erf(b) - std::erf(a));
    long num = std::lround(raw * static_cast<double>(precision_denominator));
    if (num <= 0) continue;
    numerators.emplace_back(k, Int(num));
    total += num;
  }
  if (numerators.empty())
    throw InvalidDistribution("normal_d: discretization yields empty support");

  Distribution d;
  d.kind_ = Kind::NormalD;
  d.mu_ = mu;
  d.sigma_ = sigma;
  d.precision_den_ = precision_denominator;
  for (auto& [value, num] : numerators)
    d.points_.emplace_back(value, make_rational(num, total));
  return d;
}

Rational Distribution::mass_at(const Int& value) const {
  auto it = std::lower_bound(points_.begin(), points_.end(), value,
                             [](const auto& p, const Int& v) { return p.first < v; });
  if (it == points_.end() || it->first != value) return Rational(0);
  return it->second;
}

bool Distribution::operator==(const Distribution& other) const {
  if (kind_ != other.kind_) return false;
  switch (kind_) {
    case Kind::Uniform:
      return uniform_lo_ == other.uniform_lo_ && uniform_hi_ == other.uniform_hi_;
    case Kind::NormalD:
      return mu_ == other.mu_ && sigma_ == other.sigma_ &&
             precision_den_ == other.precision_den_;
    case Kind::Pmf:
      return points_ == other.points_;
  }
  return false;
}

std::string Distribution::to_string() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::Uniform:
      os << "uniform(" << uniform_lo_.get_str() << ", " << uniform_hi_.get_str() << ")";
      break;
    case Kind::NormalD:
      os << "normal_d(" << rational_to_string(mu_) << ", " << rational_to_string(sigma_) << ")";
      break;
    case Kind::Pmf: {
      os << "pmf{";
      bool first = true;
      for (const auto& [value, mass] : points_) {
        if (!first) os << ", ";
        first = false;
        os << value.get_str() << ": " << rational_to_string(mass);
      }
      os << "}";
      break;
    }
  }
  return os.str();
}

Distribution materialize_normal(const Rational& mu, const Rational& sigma,
                                unsigned long precision_denominator) {
  return Distribution::discretized_normal(mu, sigma, precision_denominator);
}

}  // namespace covprob
