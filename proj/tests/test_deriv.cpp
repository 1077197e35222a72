// Differentiation, substitution, and coefficient collection.
#include <cmath>
#include <functional>
#include <random>

#include "doctest.h"
#include "redop/expr.hpp"

using namespace redop;

namespace {

void register_standard(Workspace& w) {
  w.register_function("f", {"x"}, /*positive=*/true);
  w.register_function("h", {"x"});
  w.register_function("xi", {"t", "x"}, /*positive=*/true);
  w.register_function("eta", {"t", "x", "u"});
  w.register_function("alpha", {"t", "x"});
  w.register_function("phi", {"w"}, /*positive=*/true);
}

const ExponentValue kN = ExponentValue::param_n();

}  // namespace

TEST_CASE("partial derivatives") {
  Workspace w;
  register_standard(w);
  ExprId u = w.var("u");
  ExprId ux = w.jet(0, 1);

  // d/du (u^n * u_x) = n * u^(n-1) * u_x
  ExprId e1 = w.mul(w.pow(u, kN), ux);
  ExprId d1 = w.diff(e1, w.var_atom("u"));
  ExprId expect1 =
      w.mul(w.param("n"), w.mul(w.pow(u, kN - ExponentValue(1LL)), ux));
  CHECK(d1 == expect1);

  // d/dx (f * u_tt) = f_x * u_tt
  ExprId e2 = w.mul(w.func("f"), w.jet(2, 0));
  CHECK(w.diff(e2, w.var_atom("x")) ==
        w.mul(w.func_deriv("f", {1}), w.jet(2, 0)));

  // d/du_x (xi*u_x - eta) = xi
  ExprId e3 = w.sub(w.mul(w.func("xi"), ux), w.func("eta"));
  CHECK(w.diff(e3, w.jet_atom(0, 1)) == w.func("xi"));

  // derivative with respect to a parameter atom is rejected
  CHECK_THROWS_AS(w.diff(e1, w.param_atom("n")), Error);
}

TEST_CASE("total derivatives") {
  Workspace w;
  register_standard(w);
  ExprId u = w.var("u");

  CHECK(w.total_derivative(u, 'x') == w.jet(0, 1));
  CHECK(w.total_derivative(w.jet(0, 1), 't') == w.jet(1, 1));

  // D_x(u^n u_x) = n u^(n-1) u_x^2 + u^n u_xx
  ExprId e = w.mul(w.pow(u, kN), w.jet(0, 1));
  ExprId expect = w.add(
      w.mul(w.param("n"),
            w.mul(w.pow(u, kN - ExponentValue(1LL)), w.pow(w.jet(0, 1), 2))),
      w.mul(w.pow(u, kN), w.jet(0, 2)));
  CHECK(w.total_derivative(e, 'x') == expect);

  // inputs already at fourth order are rejected
  CHECK_THROWS_AS(w.total_derivative(w.jet(2, 2), 'x'), Error);
}

TEST_CASE("Leibniz rule and commutation of total derivatives") {
  Workspace w;
  register_standard(w);
  std::mt19937 rng(99);
  std::uniform_int_distribution<int> pick(0, 8);
  std::function<ExprId(int)> gen = [&](int depth) -> ExprId {
    if (depth <= 0) {
      switch (pick(rng) % 6) {
        case 0: return w.var("u");
        case 1: return w.var("x");
        case 2: return w.var("t");
        case 3: return w.jet(0, 1);
        case 4: return w.jet(1, 0);
        default: return w.func("xi");
      }
    }
    switch (pick(rng)) {
      case 0:
      case 1:
      case 2: return w.add(gen(depth - 1), gen(depth - 1));
      case 3:
      case 4:
      case 5: return w.mul(gen(depth - 1), gen(depth - 1));
      case 6: return w.sub(gen(depth - 1), gen(depth - 1));
      case 7: return w.pow(gen(depth - 1), 2);
      default: return w.mul(w.pow(w.var("u"), kN), gen(depth - 1));
    }
  };
  for (int i = 0; i < 25; ++i) {
    ExprId a = gen(2);
    ExprId b = gen(2);
    ExprId lhs = w.total_derivative(w.mul(a, b), 't');
    ExprId rhs = w.add(w.mul(w.total_derivative(a, 't'), b),
                       w.mul(a, w.total_derivative(b, 't')));
    CHECK(lhs == rhs);
  }
  for (int i = 0; i < 25; ++i) {
    ExprId e = gen(2);
    ExprId tx = w.total_derivative(w.total_derivative(e, 't'), 'x');
    ExprId xt = w.total_derivative(w.total_derivative(e, 'x'), 't');
    CHECK(tx == xt);
  }
}

TEST_CASE("chain rules for composite atoms") {
  Workspace w;
  register_standard(w);
  ExprId u = w.var("u");
  ExprId x = w.var("x");
  AtomId xa = w.var_atom("x");
  AtomId ua = w.var_atom("u");
  AtomId ta = w.var_atom("t");

  SUBCASE("logarithmic-derivative function symbols") {
    // F with dF/dx = F/x
    w.register_logderiv("F", {"x"}, {w.div(w.one(), x)});
    ExprId F = w.func("F");
    CHECK(w.diff(F, xa) == w.div(F, x));
    CHECK(w.diff(w.pow(F, 3), xa) ==
          w.mul(w.integer(3), w.div(w.pow(F, 3), x)));
  }

  SUBCASE("opaque symbols with composite arguments") {
    ExprId inner = w.pow(x, 2);
    ExprId g = w.func("xi", {w.var("t"), inner});
    ExprId d = w.diff(g, xa);
    ExprId expect =
        w.mul(w.func("xi", {w.var("t"), inner}, {0, 1}), w.mul(w.integer(2), x));
    CHECK(d == expect);
  }

  SUBCASE("antiderivative atoms") {
    ExprId integrand = w.div(w.one(), w.func("xi"));
    ExprId I = w.integral(integrand, "x");
    CHECK(w.diff(I, xa) == integrand);
    ExprId dt = w.diff(I, ta);
    CHECK(dt == w.integral(w.diff(integrand, ta), "x"));
    CHECK(!w.is_zero(dt));
  }

  SUBCASE("wrapped composite powers") {
    ExponentValue half{Rational(1, 2)};
    ExprId base = w.add(w.pow(u, 2), w.one());
    ExprId e = w.pow(base, half);
    ExprId d = w.diff(e, ua);
    ExprId expect = w.mul(u, w.pow(base, ExponentValue(Rational(-1, 2))));
    CHECK(d == expect);
  }

  SUBCASE("quotient rule") {
    ExprId e = w.div(w.var("t"), w.add(u, w.one()));
    ExprId d = w.diff(e, ua);
    // -t*(u+1)^(-2), built so the denominator keeps its factored structure
    ExprId expect = w.neg(w.mul(w.var("t"), w.pow(w.add(u, w.one()), -2)));
    CHECK(d == expect);
    CHECK(w.is_zero(w.sub(
        d, w.neg(w.div(w.var("t"), w.pow(w.add(u, w.one()), 2))))));
  }

  SUBCASE("exponential factors") {
    ExprId arg = w.mul(w.pow(w.var("t"), 2), x);
    ExprId e = w.exp_of(arg);
    CHECK(w.diff(e, ta) ==
          w.mul(w.mul(w.integer(2), w.mul(w.var("t"), x)), e));
  }
}

TEST_CASE("substitution") {
  Workspace w;
  register_standard(w);
  ExprId u = w.var("u");
  ExprId x = w.var("x");

  SUBCASE("invariant surface condition collapses") {
    // u_t -> eta - xi*u_x in u_t + xi*u_x - eta gives 0
    ExprId Q = w.add(w.jet(1, 0),
                     w.sub(w.mul(w.func("xi"), w.jet(0, 1)), w.func("eta")));
    Substitution s;
    s.atoms[w.jet_atom(1, 0)] =
        w.sub(w.func("eta"), w.mul(w.func("xi"), w.jet(0, 1)));
    CHECK(w.is_zero(w.substitute(Q, s)));
  }

  SUBCASE("function replacement rewrites derivative nodes") {
    // f -> 1 in f_x * u gives 0
    ExprId e = w.mul(w.func_deriv("f", {1}), u);
    Substitution s;
    s.funcs["f"] = w.one();
    CHECK(w.is_zero(w.substitute(e, s)));
  }

  SUBCASE("xi -> x in the coefficient formula") {
    // (xi_x^2 - 2 xi xi_xx - p)/(4(n+1) xi^2) -> (1-p)/(4(n+1)x^2)
    ExprId xi = w.func("xi");
    ExprId xix = w.func_deriv("xi", {0, 1});
    ExprId xixx = w.func_deriv("xi", {0, 2});
    ExprId numr = w.sub(w.pow(xix, 2),
                        w.add(w.mul(w.integer(2), w.mul(xi, xixx)), w.param("p")));
    ExprId denr = w.mul(w.integer(4),
                        w.mul(w.add(w.param("n"), w.one()), w.pow(xi, 2)));
    ExprId hform = w.div(numr, denr);
    Substitution s;
    s.funcs["xi"] = x;
    ExprId got = w.substitute(hform, s);
    ExprId expect = w.div(
        w.sub(w.one(), w.param("p")),
        w.mul(w.integer(4), w.mul(w.add(w.param("n"), w.one()), w.pow(x, 2))));
    CHECK(got == expect);

    // exact value at p=0, n=1, x=2 is 1/32
    RationalEvalContext ctx;
    ctx.values[w.param_atom("p")] = Rational(0);
    ctx.values[w.param_atom("n")] = Rational(1);
    ctx.values[w.var_atom("x")] = Rational(2);
    auto v = w.eval_rational(got, ctx);
    REQUIRE(v.has_value());
    CHECK(*v == Rational(1, 32));
  }

  SUBCASE("cyclic bindings are rejected") {
    Substitution s;
    s.atoms[w.param_atom("a")] = w.param("b");
    s.atoms[w.param_atom("b")] = w.add(w.param("a"), w.one());
    CHECK_THROWS_AS(w.substitute(w.param("a"), s), CyclicBindingError);
  }

  SUBCASE("exponent parameter bindings rewrite module exponents") {
    // m -> n+1 in h*u^m
    ExprId e = w.mul(w.func("h"), w.pow(u, ExponentValue::param_m()));
    Substitution s;
    s.atoms[w.param_atom("m")] = w.add(w.param("n"), w.one());
    CHECK(w.substitute(e, s) ==
          w.mul(w.func("h"), w.pow(u, kN + ExponentValue(1LL))));
    // n -> 1 in u^(n-1) * f
    ExprId e2 = w.mul(w.pow(u, kN - ExponentValue(1LL)), w.func("f"));
    Substitution s2;
    s2.atoms[w.param_atom("n")] = w.one();
    CHECK(w.substitute(e2, s2) == w.func("f"));
  }

  SUBCASE("substitution and evaluation commute") {
    // e(u, xi) with sigma: u -> x^2+1, xi -> t*x
    ExprId e = w.add(w.mul(w.func("xi"), w.pow(u, 2)),
                     w.mul(w.exp_of(w.var("t")), u));
    Substitution s;
    s.atoms[w.var_atom("u")] = w.add(w.pow(x, 2), w.one());
    s.funcs["xi"] = w.mul(w.var("t"), x);
    ExprId composed = w.substitute(e, s);

    EvalContext pt;
    pt.values[w.var_atom("t")] = 0.375;
    pt.values[w.var_atom("x")] = 1.25;
    double lhs = w.eval(composed, pt);

    EvalContext pt2 = pt;
    pt2.values[w.var_atom("u")] = 1.25 * 1.25 + 1.0;
    pt2.funcs["xi"] = [](const std::vector<double>& args,
                         const std::vector<int>& deriv) {
      if (deriv[0] == 0 && deriv[1] == 0) return args[0] * args[1];
      return 0.0;
    };
    double rhs = w.eval(e, pt2);
    CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(rhs)));
  }
}

TEST_CASE("coefficient collection") {
  Workspace w;
  register_standard(w);
  ExprId u = w.var("u");
  ExprId ux = w.jet(0, 1);
  AtomId uxa = w.jet_atom(0, 1);

  SUBCASE("quadratic in u_x") {
    ExprId e = w.add(
        w.mul(w.param("a"), w.pow(ux, 2)),
        w.add(w.mul(w.param("b"), ux), w.param("c")));
    auto parts = w.collect_int(e, uxa);
    REQUIRE(parts.size() == 3);
    CHECK(parts.at(2) == w.param("a"));
    CHECK(parts.at(1) == w.param("b"));
    CHECK(parts.at(0) == w.param("c"));
  }

  SUBCASE("zero collects to the empty map") {
    CHECK(w.collect_int(w.zero(), uxa).empty());
    CHECK(w.collect_multi(w.zero(), std::vector<AtomId>{uxa}).empty());
  }

  SUBCASE("non-polynomial occurrences are rejected") {
    CHECK_THROWS_AS(w.collect_int(w.exp_of(ux), uxa), NotPolynomialError);
    CHECK_THROWS_AS(w.collect_int(w.pow(ux, -1), uxa), NotPolynomialError);
    ExprId indenom = w.div(w.one(), w.add(ux, w.one()));
    CHECK_THROWS_AS(w.collect_int(indenom, uxa), NotPolynomialError);
  }

  SUBCASE("collection by symbolic u-powers") {
    ExprId e = w.add(
        w.mul(w.func("h"), w.pow(u, ExponentValue::param_m())),
        w.add(w.mul(w.func("xi"), w.pow(u, ExponentValue(1LL) - kN)), u));
    auto classes = w.collect_classes(e, w.var_atom("u"));
    REQUIRE(classes.size() == 3);
    bool saw_m = false, saw_1mn = false, saw_1 = false;
    for (const auto& [k, v] : classes) {
      if (k == ExponentValue::param_m()) {
        saw_m = true;
        CHECK(v == w.func("h"));
      } else if (k == ExponentValue(1LL) - kN) {
        saw_1mn = true;
        CHECK(v == w.func("xi"));
      } else if (k == ExponentValue(1LL)) {
        saw_1 = true;
        CHECK(v == w.one());
      }
    }
    CHECK(saw_m);
    CHECK(saw_1mn);
    CHECK(saw_1);
  }

  SUBCASE("reassembly is the identity") {
    std::mt19937 rng(4242);
    std::uniform_int_distribution<int> pick(0, 5);
    for (int i = 0; i < 20; ++i) {
      // random polynomial in u_x, u_t with coefficient atoms
      ExprId e = w.zero();
      for (int tgt = 0; tgt < 4; ++tgt) {
        ExprId c = pick(rng) < 3 ? w.func("xi") : w.add(w.param("a"), w.var("x"));
        ExprId term = w.mul(
            c, w.mul(w.pow(w.jet(0, 1), static_cast<long long>(pick(rng) % 3)),
                     w.pow(w.jet(1, 0), static_cast<long long>(pick(rng) % 2))));
        e = w.add(e, term);
      }
      std::vector<AtomId> basis{w.jet_atom(0, 1), w.jet_atom(1, 0)};
      auto parts = w.collect_multi(e, basis);
      ExprId rebuilt = w.zero();
      for (const auto& [key, coeff] : parts) {
        ExprId mono = w.mul(w.pow(w.jet(0, 1), key[0]), w.pow(w.jet(1, 0), key[1]));
        rebuilt = w.add(rebuilt, w.mul(coeff, mono));
      }
      CHECK(rebuilt == e);
    }
  }

  SUBCASE("degree and single-coefficient queries") {
    ExprId e = w.mul(w.func("xi"), w.pow(ux, 3));
    CHECK(w.degree_in(e, uxa) == 3);
    CHECK(w.coefficient_of(e, uxa, 3) == w.func("xi"));
    CHECK(w.coefficient_of(e, uxa, 1) == w.zero());
  }
}
