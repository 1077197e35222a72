// Numerical backbone: quadrature, root finding, finite differences, Halton
// points, the antiderivative evaluation hook, and the parallel map.
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "doctest.h"
#include "redop/expr.hpp"
#include "redop/numeric.hpp"

using namespace redop;

TEST_CASE("adaptive quadrature") {
  auto inv = [](double x) { return 1.0 / x; };
  CHECK(std::abs(quadrature(inv, 1.0, 2.0) - std::log(2.0)) < 1e-10);

  auto cube = [](double x) { return x * x * x; };
  CHECK(std::abs(quadrature(cube, 0.0, 1.0, 1e-12) - 0.25) < 1e-12);

  // reversed and empty ranges
  CHECK(quadrature(cube, 1.0, 1.0) == 0.0);
  CHECK(std::abs(quadrature(inv, 2.0, 1.0) + std::log(2.0)) < 1e-10);

  // a genuinely oscillatory integrand: ∫₀^10 sin(x) dx = 1 - cos(10)
  auto wig = [](double x) { return std::sin(x); };
  CHECK(std::abs(quadrature(wig, 0.0, 10.0) - (1.0 - std::cos(10.0))) < 1e-9);

  SUBCASE("additivity") {
    auto g = [](double x) { return std::exp(-x) * std::sin(3 * x); };
    double whole = quadrature(g, 0.0, 2.0);
    double parts = quadrature(g, 0.0, 0.7) + quadrature(g, 0.7, 2.0);
    CHECK(std::abs(whole - parts) < 2e-10);
  }

  SUBCASE("determinism") {
    auto g = [](double x) { return std::cos(x * x); };
    CHECK(quadrature(g, 0.0, 3.0) == quadrature(g, 0.0, 3.0));
  }

  SUBCASE("singular integrand is reported") {
    CHECK_THROWS_AS(quadrature([](double x) { return 1.0 / x; }, 0.0, 1.0),
                    NonConvergenceError);
  }
}

TEST_CASE("bracketed root finding") {
  // φ²/2 − φ = ω
  auto F = [](double phi, double omega) {
    return 0.5 * phi * phi - phi - omega;
  };
  CHECK(std::abs(solve_implicit(F, 0.0, 1.0, 3.0) - 2.0) < 1e-12);
  CHECK(std::abs(solve_implicit(F, 1.5, 1.0, 5.0) - 3.0) < 1e-12);

  double r = brent_root([](double x) { return std::cos(x); }, 1.0, 2.0);
  CHECK(std::abs(r - std::acos(0.0)) < 1e-12);

  SUBCASE("root/relation consistency") {
    for (double omega : {0.1, 0.5, 1.0, 2.0, 4.0}) {
      double phi = solve_implicit(F, omega, 2.0, 10.0);
      CHECK(std::abs(F(phi, omega)) <= 1e-10);
    }
  }

  SUBCASE("bad bracket") {
    CHECK_THROWS_AS(
        brent_root([](double x) { return x * x + 1.0; }, -1.0, 1.0),
        DomainError);
  }

  SUBCASE("exact endpoint roots") {
    CHECK(brent_root([](double x) { return x; }, 0.0, 1.0) == 0.0);
    CHECK(brent_root([](double x) { return x - 1.0; }, 0.0, 1.0) == 1.0);
  }
}

TEST_CASE("finite-difference derivatives") {
  auto cube = [](double x) { return x * x * x; };
  CHECK(std::abs(fd_derivative(cube, 2.0, 1, 1e-3) - 12.0) < 1e-6);

  auto quart = [](double x) { return x * x * x * x; };
  CHECK(std::abs(fd_derivative(quart, 1.0, 2, 1e-3) - 12.0) < 1e-6);

  // function-backend example: d/dx e^x at 0 is 1
  auto ex = [](double x) { return std::exp(x); };
  CHECK(std::abs(fd_derivative(ex, 0.0, 1, 1e-4) - 1.0) < 1e-6);

  CHECK_THROWS_AS(fd_derivative(ex, 0.0, 3, 1e-4), DomainError);
  CHECK_THROWS_AS(fd_derivative(ex, 0.0, 1, 0.0), DomainError);
  CHECK_THROWS_AS(fd_derivative(ex, 1.0, 1, 1e-300), DomainError);
}

TEST_CASE("halton points") {
  // base-2 radical inverse prefix
  CHECK(halton(1, 2) == doctest::Approx(0.5));
  CHECK(halton(2, 2) == doctest::Approx(0.25));
  CHECK(halton(3, 2) == doctest::Approx(0.75));
  CHECK(halton(4, 2) == doctest::Approx(0.125));
  CHECK(halton(5, 2) == doctest::Approx(0.625));
  CHECK(halton(1, 3) == doctest::Approx(1.0 / 3.0));
  CHECK(halton(2, 3) == doctest::Approx(2.0 / 3.0));

  auto pts = halton_box(64, {{0.0, 1.0}, {0.5, 2.0}, {1.0, 2.0}});
  REQUIRE(pts.size() == 64);
  for (const auto& p : pts) {
    REQUIRE(p.size() == 3);
    CHECK(p[0] > 0.0);
    CHECK(p[0] < 1.0);
    CHECK(p[1] > 0.5);
    CHECK(p[1] < 2.0);
    CHECK(p[2] > 1.0);
    CHECK(p[2] < 2.0);
  }
  CHECK(halton_box(8, {{0.0, 1.0}}) == halton_box(8, {{0.0, 1.0}}));
}

TEST_CASE("antiderivative evaluation hook") {
  Workspace w;
  w.register_function("xi", {"t", "x"}, /*positive=*/true);
  AntiderivativeBackend backend(w);  // anchor 1.0

  EvalContext base;
  base.values[w.var_atom("t")] = 0.0;
  base.funcs["xi"] = [](const std::vector<double>& args,
                        const std::vector<int>& derivs) {
    double x = args[1];
    if (derivs[0] == 0 && derivs[1] == 0) return x;
    if (derivs[0] == 0 && derivs[1] == 1) return 1.0;
    return 0.0;
  };
  EvalContext ctx = backend.attach(base);

  ExprId I = w.integral(w.div(w.one(), w.func("xi")), "x");

  SUBCASE("plain antiderivative value") {
    // ξ = x: ∫₁³ ds/s = ln 3
    ctx.values[w.var_atom("x")] = 3.0;
    CHECK(std::abs(w.eval(I, ctx) - std::log(3.0)) < 1e-9);
  }

  SUBCASE("quadratic coefficient function") {
    // ξ = x²: ∫₁² ds/s² = 1/2
    ctx.funcs["xi"] = [](const std::vector<double>& args,
                         const std::vector<int>& derivs) {
      double x = args[1];
      if (derivs[0] == 0 && derivs[1] == 0) return x * x;
      if (derivs[0] == 0 && derivs[1] == 1) return 2.0 * x;
      return 0.0;
    };
    ctx.values[w.var_atom("x")] = 2.0;
    CHECK(std::abs(w.eval(I, ctx) - 0.5) < 1e-10);
  }

  SUBCASE("exponential of the antiderivative with its chain rule") {
    // E = exp(r·∫dx/ξ) with ξ = x and r = 2 is x², so E(3) = 9 and
    // ∂ₓE = (r/ξ)·E gives 6 at x = 3.
    ExprId E = w.exp_of(w.mul(w.param("r"), I));
    ctx.values[w.param_atom("r")] = 2.0;
    ctx.values[w.var_atom("x")] = 3.0;
    double val = w.eval(E, ctx);
    CHECK(std::abs(val - 9.0) < 1e-8);

    ExprId dE = w.diff(E, w.var_atom("x"));
    double dval = w.eval(dE, ctx);
    CHECK(std::abs(dval - 6.0) < 1e-8);

    auto closure = [&](double xv) {
      EvalContext c2 = ctx;
      c2.values[w.var_atom("x")] = xv;
      return w.eval(E, c2);
    };
    CHECK(std::abs(fd_derivative(closure, 3.0, 1, 1e-4) - dval) < 1e-6);
  }
}

TEST_CASE("symbolic and finite-difference derivatives agree") {
  Workspace w;
  ExponentValue kN = ExponentValue::param_n();
  std::mt19937 rng(2024);
  std::uniform_int_distribution<int> pick(0, 7);
  std::function<ExprId(int)> gen = [&](int depth) -> ExprId {
    if (depth <= 0) {
      switch (pick(rng) % 6) {
        case 0: return w.var("u");
        case 1: return w.var("x");
        case 2: return w.var("t");
        case 3: return w.jet(0, 1);
        case 4: return w.jet(1, 0);
        default: return w.integer(pick(rng) - 3);
      }
    }
    switch (pick(rng)) {
      case 0:
      case 1: return w.add(gen(depth - 1), gen(depth - 1));
      case 2:
      case 3: return w.mul(gen(depth - 1), gen(depth - 1));
      case 4: return w.sub(gen(depth - 1), gen(depth - 1));
      case 5: return w.pow(gen(depth - 1), 2);
      case 6: return w.mul(w.pow(w.var("u"), kN), gen(depth - 1));
      default: return w.exp_of(w.var("x"));
    }
  };
  AtomId xa = w.var_atom("x");
  int checked = 0;
  for (int i = 0; i < 80 && checked < 50; ++i) {
    ExprId e = gen(3);
    if (!w.depends_on(e, xa)) continue;
    ++checked;
    ExprId de = w.diff(e, xa);
    EvalContext ctx;
    ctx.values[w.var_atom("t")] = 0.7;
    ctx.values[w.var_atom("u")] = 1.3;
    ctx.values[w.jet_atom(1, 0)] = 0.4;
    ctx.values[w.jet_atom(0, 1)] = -0.6;
    ctx.values[w.param_atom("n")] = 2.0;
    double sym;
    ctx.values[xa] = 1.1;
    sym = w.eval(de, ctx);
    auto closure = [&](double xv) {
      EvalContext c2 = ctx;
      c2.values[xa] = xv;
      return w.eval(e, c2);
    };
    double fd = fd_derivative(closure, 1.1, 1, 1e-4);
    CHECK(std::abs(sym - fd) <= 1e-5 * (1.0 + std::abs(sym)));
  }
  CHECK(checked == 50);
}

TEST_CASE("parallel map is deterministic and ordered") {
  auto g = [](std::size_t i) {
    double x = 0.1 * static_cast<double>(i);
    return std::sin(x) * std::exp(-x);
  };
  auto out = parallel_map(1000, g);
  REQUIRE(out.size() == 1000);
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == g(i));
  CHECK(parallel_map(7, g) == parallel_map(7, g));
  CHECK(parallel_map(0, g).empty());

  CHECK_THROWS_AS(parallel_map(100,
                               [](std::size_t i) -> double {
                                 if (i == 63) throw DomainError("boom");
                                 return 0.0;
                               }),
                  DomainError);
}
