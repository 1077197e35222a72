// Numerical backbone: adaptive quadrature, bracketed root finding,
// finite-difference derivative oracles, quasi-random point generation, and
// the antiderivative evaluation hook for expression evaluation.
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "redop/errors.hpp"
#include "redop/expr.hpp"

namespace redop {

// --- quadrature --------------------------------------------------------------

// Adaptive Gauss–Kronrod (7/15) integration of g over [a, b] to the given
// absolute+relative tolerance. Deterministic (fixed subdivision order).
// Throws NonConvergenceError after the subdivision budget is exhausted or
// when an interval stops making progress (suspected singularity).
double quadrature(const std::function<double(double)>& g, double a, double b,
                  double tol = 1e-10);

// --- root finding ------------------------------------------------------------

// Root of g on a bracketing interval [lo, hi] (g(lo)·g(hi) ≤ 0) via Brent's
// method to the given tolerance. Throws DomainError when the bracket does
// not change sign and NonConvergenceError when iteration stalls.
double brent_root(const std::function<double(double)>& g, double lo, double hi,
                  double tol = 1e-12);

// Solves F(phi, omega) = 0 for phi on the bracket. Thin wrapper over
// brent_root matching the implicit-solution call shape.
double solve_implicit(const std::function<double(double, double)>& F,
                      double omega, double phi_lo, double phi_hi,
                      double tol = 1e-12);

// --- finite differences ------------------------------------------------------

// 4th-order central finite difference of g at x: order 1 or 2.
double fd_derivative(const std::function<double(double)>& g, double x,
                     int order, double h);

// --- quasi-random points -----------------------------------------------------

// Halton low-discrepancy value: index i (1-based) in the given prime base,
// in (0, 1).
double halton(std::uint64_t i, unsigned base);

// Deterministic sample points in a box: coordinate k of point i uses the
// k-th prime Halton base, scaled to [lo_k, hi_k].
std::vector<std::vector<double>> halton_box(
    std::size_t count, const std::vector<std::pair<double, double>>& box);

// --- antiderivative backend --------------------------------------------------

// Supplies EvalContext::integral: evaluates Int(g, var) at var = upper as
// ∫ from the session anchor to upper, caching per (integrand, upper).
// The anchor realizes the convention that antiderivative atoms vanish at
// the anchor point; any additive constant belongs to the caller.
// The cache assumes the symbol bindings (params, function backends) fed to
// attach() stay fixed for the backend's lifetime; use one backend per
// binding set.
class AntiderivativeBackend {
 public:
  explicit AntiderivativeBackend(Workspace& w, double anchor = 1.0,
                                 double tol = 1e-10)
      : w_(w), anchor_(anchor), tol_(tol) {}

  // Binds this backend into a context (returns a copy with the hook set).
  EvalContext attach(EvalContext ctx) const;

  double anchor() const { return anchor_; }

 private:
  double evaluate(ExprId integrand, const std::string& var, double upper,
                  const EvalContext& outer) const;

  Workspace& w_;
  double anchor_;
  double tol_;
  mutable std::mutex cache_mu_;
  mutable std::map<std::pair<ExprId, double>, double> cache_;
};

// --- deterministic parallel map ----------------------------------------------

// Evaluates g(0..count-1) across a fixed chunk partition on worker threads
// and returns all values in index order. Deterministic: the result does not
// depend on scheduling.
std::vector<double> parallel_map(std::size_t count,
                                 const std::function<double(std::size_t)>& g);

}  // namespace redop
