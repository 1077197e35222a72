// Vector fields on (t, x, u)-space, second prolongation, invariant-surface
// conditions, and restriction of jet expressions to the solution manifold.
#pragma once

#include "redop/errors.hpp"
#include "redop/exponent.hpp"
#include "redop/expr.hpp"

namespace redop {

// First-order field Q = tau·∂_t + xi·∂_x + eta·∂_u with coefficients
// depending on (t, x, u) only.
struct VectorField {
  ExprId tau = kNoExpr;
  ExprId xi = kNoExpr;
  ExprId eta = kNoExpr;
};

// Validates that no coefficient depends on a jet coordinate of order ≥ 1.
// Throws ConstraintViolationError otherwise.
VectorField make_vector_field(Workspace& w, ExprId tau, ExprId xi, ExprId eta);

// Second-prolongation coefficients of Q, expressed in jet coordinates of
// order ≤ 2 (the third-order terms of the defining formula cancel).
struct Prolongation {
  ExprId eta_t = kNoExpr;
  ExprId eta_x = kNoExpr;
  ExprId eta_tt = kNoExpr;
  ExprId eta_tx = kNoExpr;
  ExprId eta_xx = kNoExpr;
};

Prolongation prolong2(Workspace& w, const VectorField& q);

// The equation family F·u_tt = (u^N·u_x)_x + H·u^M in its left-hand-side
// normal form L[u] = F·u_tt − N·u^(N−1)·u_x² − u^N·u_xx − H·u^M, with F, H
// functions of x (symbolic atoms or closed forms) and exponents N, M drawn
// from the exponent module. N = 0 is rejected (the family degenerates).
class ClassEquation {
 public:
  ClassEquation(Workspace& w, ExprId f, ExprId h, ExponentValue n,
                ExponentValue m);

  Workspace& workspace() const { return *w_; }
  ExprId f() const { return f_; }
  ExprId h() const { return h_; }
  const ExponentValue& n() const { return n_; }
  const ExponentValue& m() const { return m_; }
  bool unit_gauge() const { return unit_gauge_; }

  // L[u], the left-hand side whose kernel is the solution manifold.
  ExprId lhs() const { return lhs_; }

 private:
  Workspace* w_;
  ExprId f_, h_;
  ExponentValue n_, m_;
  ExprId lhs_;
  bool unit_gauge_ = true;
};

// Rewrite rules eliminating (u_t, u_tx, u_tt, u_xx) — and their first
// prolongations — on L = 0 ∩ {Q[u] = 0 and its t/x-differential
// consequences}. All right-hand sides are closed in (t, x, u, u_x).
struct ManifoldRestriction {
  ExprId u_t_rule = kNoExpr;
  ExprId u_tx_rule = kNoExpr;
  ExprId u_tt_rule = kNoExpr;
  ExprId u_xx_rule = kNoExpr;
  // Third-order consequence rules (t/x-derivatives of the base rules).
  ExprId u_ttt_rule = kNoExpr;
  ExprId u_ttx_rule = kNoExpr;
  ExprId u_txx_rule = kNoExpr;
  ExprId u_xxx_rule = kNoExpr;
  // The cleared denominator F·xi² − u^N whose nonvanishing makes the
  // elimination regular.
  ExprId regularity_factor = kNoExpr;

  // Substitutes every eliminated jet coordinate in e.
  ExprId apply(Workspace& w, ExprId e) const;
};

// Builds the restriction for a regular operator. Requires tau normalized
// to 1 (UnsupportedCaseError otherwise; tau ≡ 0 is the unsupported no-go
// branch). Throws SingularOperatorError when the regularity factor
// vanishes identically — such operators go through the singular pipeline.
ManifoldRestriction build_restriction(const ClassEquation& eq,
                                      const VectorField& q);

// pr²Q(L) restricted by R and multiplied by the minimal power of the
// regularity factor clearing it from the denominator. The result is
// polynomial in u_x; its identical vanishing is the invariance criterion.
// When cleared_power is non-null it receives that minimal power.
ExprId criterion_residual(const ClassEquation& eq, const VectorField& q,
                          const ManifoldRestriction& r,
                          int* cleared_power = nullptr);

}  // namespace redop
