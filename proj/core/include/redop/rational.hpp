#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <string>

#include "redop/errors.hpp"

namespace redop {

// Exact rational scalar used throughout the kernel.
using Rational = boost::multiprecision::cpp_rational;
using Integer = boost::multiprecision::cpp_int;

inline double to_double(const Rational& q) { return q.convert_to<double>(); }

inline std::string to_string(const Rational& q) { return q.str(); }

inline bool is_integer(const Rational& q) { return denominator(q) == 1; }

// q^k for integer k (k may be negative; q must be nonzero then).
inline Rational rational_pow(const Rational& q, long long k) {
  if (k == 0) return Rational(1);
  if (q == 0) {
    if (k < 0) throw DomainError("0 raised to a negative power");
    return Rational(0);
  }
  bool invert = k < 0;
  unsigned long long e = invert ? static_cast<unsigned long long>(-(k + 1)) + 1ULL
                                : static_cast<unsigned long long>(k);
  Rational base = q;
  Rational acc(1);
  while (e > 0) {
    if (e & 1ULL) acc *= base;
    base *= base;
    e >>= 1ULL;
  }
  if (invert) acc = Rational(1) / acc;
  return acc;
}

// Returns q as a long long when it is an integer that fits; throws otherwise.
inline long long to_long(const Rational& q) {
  if (!is_integer(q)) throw Error("rational is not an integer: " + q.str());
  const Integer& n = numerator(q);
  if (n > Integer((std::numeric_limits<long long>::max)()) ||
      n < Integer((std::numeric_limits<long long>::min)())) {
    throw Error("integer too large: " + n.str());
  }
  return n.convert_to<long long>();
}

}  // namespace redop
