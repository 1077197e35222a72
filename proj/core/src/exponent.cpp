#include "redop/exponent.hpp"

#include <algorithm>
#include <cstdlib>
#include <functional>

#include "redop/errors.hpp"

namespace redop {

void upoly_trim(UniPoly& p) {
  while (!p.empty() && p.back() == 0) p.pop_back();
}

UniPoly upoly_const(const Rational& c) {
  if (c == 0) return {};
  return {c};
}

UniPoly upoly_add(const UniPoly& a, const UniPoly& b) {
  UniPoly r(std::max(a.size(), b.size()), Rational(0));
  for (std::size_t i = 0; i < a.size(); ++i) r[i] += a[i];
  for (std::size_t i = 0; i < b.size(); ++i) r[i] += b[i];
  upoly_trim(r);
  return r;
}

UniPoly upoly_sub(const UniPoly& a, const UniPoly& b) {
  UniPoly r(std::max(a.size(), b.size()), Rational(0));
  for (std::size_t i = 0; i < a.size(); ++i) r[i] += a[i];
  for (std::size_t i = 0; i < b.size(); ++i) r[i] -= b[i];
  upoly_trim(r);
  return r;
}

UniPoly upoly_mul(const UniPoly& a, const UniPoly& b) {
  if (a.empty() || b.empty()) return {};
  UniPoly r(a.size() + b.size() - 1, Rational(0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) r[i + j] += a[i] * b[j];
  upoly_trim(r);
  return r;
}

UniPoly upoly_scale(const UniPoly& a, const Rational& c) {
  if (c == 0) return {};
  UniPoly r = a;
  for (auto& x : r) x *= c;
  return r;
}

bool upoly_is_zero(const UniPoly& a) { return a.empty(); }

int upoly_degree(const UniPoly& a) { return static_cast<int>(a.size()) - 1; }

Rational upoly_eval(const UniPoly& a, const Rational& x) {
  Rational r(0);
  for (auto it = a.rbegin(); it != a.rend(); ++it) r = r * x + *it;
  return r;
}

double upoly_eval(const UniPoly& a, double x) {
  double r = 0.0;
  for (auto it = a.rbegin(); it != a.rend(); ++it)
    r = r * x + to_double(*it);
  return r;
}

void upoly_divmod(const UniPoly& num, const UniPoly& den, UniPoly& quot,
                  UniPoly& rem) {
  if (den.empty()) throw DomainError("polynomial division by zero");
  quot.clear();
  rem = num;
  if (num.size() < den.size()) return;
  quot.assign(num.size() - den.size() + 1, Rational(0));
  const Rational& lead = den.back();
  while (rem.size() >= den.size()) {
    Rational c = rem.back() / lead;
    std::size_t shift = rem.size() - den.size();
    quot[shift] = c;
    for (std::size_t i = 0; i < den.size(); ++i) rem[shift + i] -= c * den[i];
    upoly_trim(rem);
    if (rem.empty()) break;
    if (rem.size() < den.size()) break;
  }
  upoly_trim(quot);
}

UniPoly upoly_gcd(UniPoly a, UniPoly b) {
  upoly_trim(a);
  upoly_trim(b);
  while (!b.empty()) {
    UniPoly q, r;
    upoly_divmod(a, b, q, r);
    a = std::move(b);
    b = std::move(r);
  }
  if (!a.empty() && a.back() != 1) {
    Rational inv = Rational(1) / a.back();
    for (auto& c : a) c *= inv;
  }
  return a;
}

int upoly_compare(const UniPoly& a, const UniPoly& b) {
  if (a.size() != b.size()) return a.size() < b.size() ? -1 : 1;
  for (std::size_t i = a.size(); i-- > 0;) {
    if (a[i] != b[i]) return a[i] < b[i] ? -1 : 1;
  }
  return 0;
}

ExponentValue::ExponentValue(const Rational& c)
    : a_(upoly_const(c)), b_(), q_(upoly_const(Rational(1))) {}

ExponentValue ExponentValue::param_n() {
  return make({Rational(0), Rational(1)}, {}, upoly_const(Rational(1)));
}

ExponentValue ExponentValue::param_m() {
  return make({}, upoly_const(Rational(1)), upoly_const(Rational(1)));
}

ExponentValue ExponentValue::make(UniPoly a, UniPoly b, UniPoly q) {
  ExponentValue e(Rational(0));
  e.a_ = std::move(a);
  e.b_ = std::move(b);
  e.q_ = std::move(q);
  upoly_trim(e.a_);
  upoly_trim(e.b_);
  upoly_trim(e.q_);
  e.normalize();
  return e;
}

void ExponentValue::normalize() {
  if (q_.empty()) throw DomainError("exponent with zero denominator");
  if (a_.empty() && b_.empty()) {
    q_ = upoly_const(Rational(1));
    return;
  }
  UniPoly g = upoly_gcd(upoly_gcd(a_, b_), q_);
  if (upoly_degree(g) > 0) {
    UniPoly q, r;
    upoly_divmod(a_, g, q, r);
    a_ = q;
    upoly_divmod(b_, g, q, r);
    b_ = q;
    upoly_divmod(q_, g, q, r);
    q_ = q;
  }
  // Scale so the denominator is monic.
  Rational lead = q_.back();
  if (lead != 1) {
    Rational inv = Rational(1) / lead;
    for (auto& c : q_) c *= inv;
    for (auto& c : a_) c *= inv;
    for (auto& c : b_) c *= inv;
  }
}

ExponentValue ExponentValue::operator+(const ExponentValue& o) const {
  return make(upoly_add(upoly_mul(a_, o.q_), upoly_mul(o.a_, q_)),
              upoly_add(upoly_mul(b_, o.q_), upoly_mul(o.b_, q_)),
              upoly_mul(q_, o.q_));
}

ExponentValue ExponentValue::operator-(const ExponentValue& o) const {
  return make(upoly_sub(upoly_mul(a_, o.q_), upoly_mul(o.a_, q_)),
              upoly_sub(upoly_mul(b_, o.q_), upoly_mul(o.b_, q_)),
              upoly_mul(q_, o.q_));
}

ExponentValue ExponentValue::operator-() const {
  return make(upoly_scale(a_, Rational(-1)), upoly_scale(b_, Rational(-1)),
              q_);
}

ExponentValue ExponentValue::operator*(const ExponentValue& o) const {
  if (!b_.empty() && !o.b_.empty()) {
    throw Error(
        "exponent product leaves the m-linear module: " + to_string() +
        " * " + o.to_string());
  }
  return make(upoly_mul(a_, o.a_),
              upoly_add(upoly_mul(a_, o.b_), upoly_mul(o.a_, b_)),
              upoly_mul(q_, o.q_));
}

ExponentValue ExponentValue::operator/(const ExponentValue& o) const {
  if (!o.b_.empty())
    throw Error("division by an exponent involving m: " + o.to_string());
  if (o.is_zero()) throw DomainError("division of exponent by zero");
  return make(upoly_mul(a_, o.q_), upoly_mul(b_, o.q_), upoly_mul(q_, o.a_));
}

bool ExponentValue::is_constant() const {
  return b_.empty() && upoly_degree(a_) <= 0 && upoly_degree(q_) == 0;
}

Rational ExponentValue::constant_value() const {
  if (!is_constant()) throw Error("exponent is not constant: " + to_string());
  if (a_.empty()) return Rational(0);
  return a_[0] / q_[0];
}

bool ExponentValue::is_integer_constant(long long* out) const {
  if (!is_constant()) return false;
  Rational v = constant_value();
  if (!is_integer(v)) return false;
  if (out) *out = to_long(v);
  return true;
}

bool ExponentValue::is_linear() const {
  return upoly_degree(q_) == 0 && upoly_degree(a_) <= 1 &&
         upoly_degree(b_) <= 0;
}

Rational ExponentValue::c0() const {
  if (!is_linear()) throw Error("exponent not in the linear module");
  return a_.empty() ? Rational(0) : a_[0] / q_[0];
}

Rational ExponentValue::cn() const {
  if (!is_linear()) throw Error("exponent not in the linear module");
  return a_.size() < 2 ? Rational(0) : a_[1] / q_[0];
}

Rational ExponentValue::cm() const {
  if (!is_linear()) throw Error("exponent not in the linear module");
  return b_.empty() ? Rational(0) : b_[0] / q_[0];
}

Rational ExponentValue::eval(const Rational& n, const Rational& m) const {
  Rational den = upoly_eval(q_, n);
  if (den == 0)
    throw DomainError("exponent denominator vanishes at n=" + n.str() +
                      ": " + to_string());
  return (upoly_eval(a_, n) + upoly_eval(b_, n) * m) / den;
}

double ExponentValue::eval(double n, double m) const {
  double den = upoly_eval(q_, n);
  if (den == 0.0)
    throw DomainError("exponent denominator vanishes: " + to_string());
  return (upoly_eval(a_, n) + upoly_eval(b_, n) * m) / den;
}

int ExponentValue::sign_at_infinity() const {
  const UniPoly& lead_part = b_.empty() ? a_ : b_;
  if (lead_part.empty()) return 0;
  // The denominator is monic, hence positive for large n.
  return lead_part.back() > 0 ? 1 : -1;
}

int ExponentValue::compare(const ExponentValue& o) const {
  if (*this == o) return 0;
  int s = (*this - o).sign_at_infinity();
  return s;
}

namespace {

// Renders "A + B*m" with the UniPoly pieces in descending degree.
std::string render_numerator(const UniPoly& a, const UniPoly& b) {
  std::string out;
  auto append_term = [&out](const Rational& coeff, int deg, bool with_m) {
    if (coeff == 0) return;
    Rational c = coeff;
    if (out.empty()) {
      if (c < 0) {
        out += "-";
        c = -c;
      }
    } else {
      out += (c < 0) ? "-" : "+";
      if (c < 0) c = -c;
    }
    bool unit = (c == 1) && (deg > 0 || with_m);
    if (!unit) out += to_string(c);
    if (deg > 0) {
      if (!unit) out += "*";
      out += "n";
      if (deg > 1) out += "^" + std::to_string(deg);
    }
    if (with_m) {
      if (deg > 0 || !unit) out += "*";
      out += "m";
    }
  };
  for (std::size_t i = b.size(); i-- > 0;)
    append_term(b[i], static_cast<int>(i), true);
  for (std::size_t i = a.size(); i-- > 0;)
    append_term(a[i], static_cast<int>(i), false);
  if (out.empty()) out = "0";
  return out;
}

}  // namespace

std::string ExponentValue::to_string() const {
  if (is_constant()) return redop::to_string(constant_value());
  std::string num = render_numerator(a_, b_);
  if (upoly_degree(q_) <= 0) {
    if (!q_.empty() && q_[0] != 1) {
      // Non-monic constant denominators are folded away by normalize();
      // kept for safety.
      return "(" + num + ")/" + redop::to_string(q_[0]);
    }
    return num;
  }
  return "(" + num + ")/(" + render_numerator(q_, {}) + ")";
}

std::size_t ExponentValue::hash() const {
  return std::hash<std::string>{}(to_string());
}

}  // namespace redop
