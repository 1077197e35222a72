#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "redop/errors.hpp"
#include "redop/exponent.hpp"
#include "redop/rational.hpp"

namespace redop {

// Handles into a Workspace's interning tables. Equal ids mean structurally
// identical (canonically normalized) objects; ids are only meaningful within
// the workspace that produced them.
using AtomId = std::uint32_t;
using ExprId = std::uint32_t;
inline constexpr ExprId kNoExpr = 0xFFFFFFFFu;

enum class AtomKind : std::uint8_t {
  Var,       // base variables t, x, u, w
  Param,     // named scalar constants (n, m, r, p, ...)
  Jet,       // derivative coordinates u_t, u_x, u_tt, ...
  Func,      // function symbols with argument lists and derivative indices
  Integral,  // unevaluated antiderivative Int(g, var)
  PowWrap,   // composite base raised to a module exponent, e.g. (1+x^2)^(...)
};

struct AtomData {
  AtomKind kind = AtomKind::Var;
  std::string name;          // Var / Param / Func
  int jt = 0, jx = 0;        // Jet: orders in t and x
  std::vector<ExprId> args;  // Func arguments; Integral {integrand}; PowWrap {base}
  std::vector<int> deriv;    // Func: derivative count per argument
  std::string ivar;          // Integral: integration variable
  std::string key;           // canonical identity and sort key
};

// One multiplicative term: coeff · ∏ atom^exponent · exp(exp_arg).
struct Monomial {
  Rational coeff = Rational(1);
  std::vector<std::pair<AtomId, ExponentValue>> powers;  // sorted by atom key
  ExprId exp_arg = kNoExpr;
};

// Sum of monomials, sorted descending by canonical monomial order.
using Poly = std::vector<Monomial>;

struct DenFactor {
  Poly base;  // multi-term, leading coefficient 1
  int mult = 1;
};

// Canonical normal form: num / ∏ den[i].base^den[i].mult.
struct NormalExpr {
  Poly num;
  std::vector<DenFactor> den;
};

// How a registered function symbol behaves under differentiation.
enum class FuncDefKind : std::uint8_t {
  Opaque,    // derivatives create new derivative atoms (f -> f_x)
  LogDeriv,  // ∂_i F = ratio_i · F, e.g. the classified-family f(x)
  Closed,    // expanded into its body at construction time
};

struct FuncInfo {
  std::vector<std::string> sig;  // argument variable names, e.g. {"t","x"}
  FuncDefKind kind = FuncDefKind::Opaque;
  std::vector<ExprId> ratios;  // LogDeriv: per-argument logarithmic derivative
  ExprId body = kNoExpr;       // Closed: body over the signature variables
  bool positive = false;
};

// Simultaneous substitution: atom replacements plus function-symbol
// replacements (the latter given as a body over the function's signature).
struct Substitution {
  std::map<AtomId, ExprId> atoms;
  std::map<std::string, ExprId> funcs;
};

// Numeric evaluation environment.
struct EvalContext {
  std::unordered_map<AtomId, double> values;  // vars, params, jets
  std::unordered_map<std::string,
                     std::function<double(const std::vector<double>&,
                                          const std::vector<int>&)>>
      funcs;  // name -> f(arg values, derivative multi-index)
  // Evaluates Int(integrand, var) at var = upper; supplied by the numeric
  // layer (quadrature from the session anchor).
  std::function<double(ExprId integrand, const std::string& var, double upper,
                       const EvalContext&)>
      integral = nullptr;
};

// Exact evaluation environment (used by oracle tests); any unsupported
// construct makes eval_rational return nullopt.
struct RationalEvalContext {
  std::unordered_map<AtomId, Rational> values;
  std::unordered_map<std::string,
                     std::function<std::optional<Rational>(
                         const std::vector<Rational>&, const std::vector<int>&)>>
      funcs;
};

// The expression workspace: an arena of hash-consed, always-normalized
// expressions plus the symbol registries. All construction goes through a
// workspace; expressions are immutable once created. Construction is
// serialized internally; read-only operations (eval, render) may run
// concurrently once construction is quiescent.
class Workspace {
 public:
  Workspace();

  // --- symbols ---------------------------------------------------------
  ExprId var(const std::string& name);  // "t", "x", "u", "w"
  AtomId var_atom(const std::string& name);
  ExprId param(const std::string& name);  // registers on first use
  AtomId param_atom(const std::string& name);
  bool has_param(const std::string& name) const;
  ExprId jet(int jt, int jx);  // jt + jx in [1, 4]
  AtomId jet_atom(int jt, int jx);

  void register_function(const std::string& name,
                         std::vector<std::string> sig, bool positive = false);
  void register_logderiv(const std::string& name,
                         std::vector<std::string> sig,
                         std::vector<ExprId> ratios, bool positive = false);
  void register_closed(const std::string& name, std::vector<std::string> sig,
                       ExprId body, bool positive = false);
  bool has_function(const std::string& name) const;
  const FuncInfo& function_info(const std::string& name) const;
  void assume_positive(const std::string& var_or_param);

  ExprId func(const std::string& name);  // identity arguments, no derivatives
  ExprId func(const std::string& name, std::vector<ExprId> args,
              std::vector<int> deriv = {});
  ExprId func_deriv(const std::string& name, const std::vector<int>& deriv);

  // --- construction ----------------------------------------------------
  ExprId constant(const Rational& c);
  ExprId integer(long long v);
  ExprId zero() const { return zero_; }
  ExprId one() const { return one_; }

  ExprId add(ExprId a, ExprId b);
  ExprId add(std::span<const ExprId> terms);
  ExprId sub(ExprId a, ExprId b);
  ExprId neg(ExprId a);
  ExprId mul(ExprId a, ExprId b);
  ExprId mul(std::span<const ExprId> factors);
  ExprId div(ExprId a, ExprId b);
  ExprId pow(ExprId a, const ExponentValue& e);
  ExprId pow(ExprId a, long long k);
  ExprId exp_of(ExprId a);
  ExprId abs_of(ExprId a);
  ExprId integral(ExprId integrand, const std::string& var);

  ExprId exponent_to_expr(const ExponentValue& e);
  // Succeeds when e is a rational function of the parameters n, m inside the
  // exponent module (numerator linear in m, denominator in n alone).
  std::optional<ExponentValue> expr_to_exponent(ExprId e) const;

  // --- queries ---------------------------------------------------------
  bool is_zero(ExprId e) const { return e == zero_; }
  bool is_one(ExprId e) const { return e == one_; }
  bool is_rational_constant(ExprId e, Rational* out = nullptr) const;
  bool depends_on(ExprId e, AtomId a) const;
  bool depends_on_var(ExprId e, const std::string& var_name) const;
  // All atoms appearing in e, including nested occurrences.
  std::set<AtomId> atoms_of(ExprId e) const;
  bool is_positive(ExprId e) const;  // provable under the positivity registry
  const NormalExpr& node(ExprId e) const;
  const AtomData& atom(AtomId a) const;
  const std::string& expr_key(ExprId e) const;
  // Multiplicity of `factor` (a denominator-free expression) among e's
  // denominator factors, matched up to monomial content. 0 when absent.
  int den_multiplicity(ExprId e, ExprId factor) const;

  // --- calculus --------------------------------------------------------
  // Partial derivative; v must be a Var or Jet atom. Jet coordinates are
  // independent; function symbols follow the chain rule on their arguments.
  ExprId diff(ExprId e, AtomId v);
  ExprId diff_var(ExprId e, const std::string& var_name);
  // Total derivative D_t or D_x over jet space (jets through order 3 in the
  // input; order-4 coordinates appear in the result if order-3 are present).
  ExprId total_derivative(ExprId e, char tx);

  ExprId substitute(ExprId e, const Substitution& s);

  // --- collection ------------------------------------------------------
  // e as a polynomial in atom v with integer exponents; throws
  // NotPolynomialError otherwise (v in a denominator, exponent outside Z≥0).
  std::map<long long, ExprId> collect_int(ExprId e, AtomId v);
  // Coefficients of e grouped by the full module exponent of atom v.
  std::vector<std::pair<ExponentValue, ExprId>> collect_classes(ExprId e,
                                                                AtomId v);
  // Multi-coordinate collection over jet coordinates.
  std::vector<std::pair<std::vector<long long>, ExprId>> collect_multi(
      ExprId e, std::span<const AtomId> basis);
  ExprId coefficient_of(ExprId e, AtomId v, long long k);
  long long degree_in(ExprId e, AtomId v) const;

  // --- evaluation ------------------------------------------------------
  double eval(ExprId e, const EvalContext& ctx) const;
  std::optional<Rational> eval_rational(ExprId e,
                                        const RationalEvalContext& ctx) const;

  // --- text ------------------------------------------------------------
  std::string render(ExprId e) const;
  ExprId parse(const std::string& source);

 private:
  friend class Parser;
  friend struct WorkspaceOps;

  AtomId intern_atom(AtomData&& a);
  ExprId intern(NormalExpr&& n);
  ExprId make_expr(Poly num, std::vector<DenFactor> den);
  ExprId from_monomial(Monomial m);
  ExprId poly_to_expr(const Poly& p);

  // normalization helpers (definitions in expr.cpp)
  int mono_cmp(const Monomial& a, const Monomial& b) const;
  void poly_normalize(Poly& p) const;
  Poly poly_add(const Poly& a, const Poly& b) const;
  Poly poly_neg(const Poly& a) const;
  Poly poly_mul(const Poly& a, const Poly& b) const;
  Poly poly_scale(const Poly& a, const Rational& c) const;
  Monomial mono_mul(const Monomial& a, const Monomial& b);
  bool exact_divide(const Poly& num, const Poly& den, Poly* quot);
  void normalize_den(Poly& num, std::vector<DenFactor>& den);
  std::string serialize(const NormalExpr& n) const;
  std::string serialize_poly(const Poly& p) const;
  std::string serialize_mono(const Monomial& m) const;
  bool mono_positive(const Monomial& m) const;
  bool poly_positive(const Poly& p) const;
  bool atom_positive(AtomId a) const;
  ExprId mono_pow(const Monomial& m, const ExponentValue& e);
  ExprId atom_diff(AtomId a, AtomId v);
  ExprId mono_diff(const Monomial& m, AtomId v);
  ExprId subst_rec(ExprId e, const Substitution& s,
                   std::unordered_map<ExprId, ExprId>& memo);
  ExprId subst_atom(AtomId a, const Substitution& s,
                    std::unordered_map<ExprId, ExprId>& memo);
  bool atom_depends(AtomId a, AtomId v) const;
  double eval_rec(ExprId e, const EvalContext& ctx,
                  std::unordered_map<ExprId, double>& memo) const;
  double eval_poly(const Poly& p, const EvalContext& ctx,
                   std::unordered_map<ExprId, double>& memo) const;
  double eval_mono(const Monomial& m, const EvalContext& ctx,
                   std::unordered_map<ExprId, double>& memo) const;
  std::optional<Rational> reval_rec(
      ExprId e, const RationalEvalContext& ctx,
      std::unordered_map<ExprId, std::optional<Rational>>& memo) const;
  std::string render_poly(const Poly& p) const;
  std::string render_mono(const Monomial& m, bool* negated) const;
  std::string render_atom(AtomId a) const;

  mutable std::recursive_mutex mu_;
  std::deque<AtomData> atoms_;
  std::unordered_map<std::string, AtomId> atom_index_;
  std::deque<NormalExpr> exprs_;
  std::deque<std::string> expr_keys_;
  std::unordered_map<std::string, ExprId> expr_index_;
  std::unordered_map<std::string, FuncInfo> funcs_;
  std::unordered_map<std::string, AtomId> params_;
  std::unordered_map<std::string, AtomId> vars_;
  std::unordered_set<AtomId> positive_atoms_;
  std::unordered_map<std::uint64_t, ExprId> diff_cache_;
  mutable std::unordered_map<std::uint64_t, bool> depends_cache_;
  ExprId zero_ = kNoExpr;
  ExprId one_ = kNoExpr;
};

}  // namespace redop
