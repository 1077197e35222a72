#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "redop/rational.hpp"

namespace redop {

// Polynomial in the parameter n over Q; coefficients ascending by degree,
// normalized so the highest-degree coefficient is nonzero (empty = zero).
using UniPoly = std::vector<Rational>;

void upoly_trim(UniPoly& p);
UniPoly upoly_const(const Rational& c);
UniPoly upoly_add(const UniPoly& a, const UniPoly& b);
UniPoly upoly_sub(const UniPoly& a, const UniPoly& b);
UniPoly upoly_mul(const UniPoly& a, const UniPoly& b);
UniPoly upoly_scale(const UniPoly& a, const Rational& c);
bool upoly_is_zero(const UniPoly& a);
int upoly_degree(const UniPoly& a);  // -1 for the zero polynomial
Rational upoly_eval(const UniPoly& a, const Rational& x);
double upoly_eval(const UniPoly& a, double x);
// Exact division with remainder over Q.
void upoly_divmod(const UniPoly& num, const UniPoly& den, UniPoly& quot,
                  UniPoly& rem);
// Monic greatest common divisor (Euclid).
UniPoly upoly_gcd(UniPoly a, UniPoly b);
// Three-way lexicographic comparison by degree, then coefficients from the top.
int upoly_compare(const UniPoly& a, const UniPoly& b);

// Exponent of a symbolic power: (A(n) + B(n)·m) / Q(n), with Q monic and
// gcd(A, B, Q) = 1. This covers every exponent the engine needs exactly:
// rational constants, n−1, 1−2n, m−n, and ratios such as −(3n+4)/(2n+2).
// The degenerate view c₀ + c_n·n + c_m·m is available through is_linear()
// and the c0/cn/cm accessors.
class ExponentValue {
 public:
  ExponentValue() : ExponentValue(Rational(0)) {}
  explicit ExponentValue(const Rational& c);
  explicit ExponentValue(long long c) : ExponentValue(Rational(c)) {}
  static ExponentValue param_n();
  static ExponentValue param_m();
  static ExponentValue make(UniPoly a, UniPoly b, UniPoly q);

  ExponentValue operator+(const ExponentValue& o) const;
  ExponentValue operator-(const ExponentValue& o) const;
  ExponentValue operator-() const;
  // Product of exponents (from nested powers). Throws if the result would
  // have degree > 1 in m.
  ExponentValue operator*(const ExponentValue& o) const;
  // Division by an m-free exponent.
  ExponentValue operator/(const ExponentValue& o) const;
  bool operator==(const ExponentValue& o) const {
    return a_ == o.a_ && b_ == o.b_ && q_ == o.q_;
  }
  bool operator!=(const ExponentValue& o) const { return !(*this == o); }

  bool is_zero() const { return upoly_is_zero(a_) && upoly_is_zero(b_); }
  bool is_constant() const;
  // Valid only when is_constant().
  Rational constant_value() const;
  bool is_integer_constant(long long* out = nullptr) const;

  // The spec's ℚ + ℚ·n + ℚ·m view.
  bool is_linear() const;
  Rational c0() const;
  Rational cn() const;
  Rational cm() const;

  // Exact evaluation; throws DomainError when Q(n) = 0.
  Rational eval(const Rational& n, const Rational& m) const;
  double eval(double n, double m) const;

  // Sign of the value for m ≫ n ≫ 0: sign of the m-part's leading
  // coefficient if nonzero, else of the m-free part's. Yields a total order
  // compatible with addition (used for canonical monomial ordering).
  int sign_at_infinity() const;
  // Three-way order: sign_at_infinity of the difference, refined
  // syntactically for formally distinct representations of incomparable
  // values (never needed for well-formed exponents, kept for totality).
  int compare(const ExponentValue& o) const;

  // Canonical rendering in the expression grammar, e.g. "(-3*n-4)/(2*n+2)".
  std::string to_string() const;
  std::size_t hash() const;

  const UniPoly& mfree_part() const { return a_; }
  const UniPoly& m_part() const { return b_; }
  const UniPoly& den_part() const { return q_; }

 private:
  void normalize();
  UniPoly a_;  // m-free numerator, polynomial in n
  UniPoly b_;  // coefficient of m, polynomial in n
  UniPoly q_;  // denominator, monic polynomial in n
};

}  // namespace redop
