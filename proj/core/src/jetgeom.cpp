#include "redop/jetgeom.hpp"

#include <string>
#include <utility>
#include <vector>

namespace redop {

namespace {

bool has_jets(const Workspace& w, ExprId e) {
  for (AtomId a : w.atoms_of(e))
    if (w.atom(a).kind == AtomKind::Jet) return true;
  return false;
}

}  // namespace

VectorField make_vector_field(Workspace& w, ExprId tau, ExprId xi,
                              ExprId eta) {
  for (ExprId c : {tau, xi, eta})
    if (has_jets(w, c))
      throw ConstraintViolationError(
          "vector field coefficients must not depend on jet coordinates");
  return VectorField{tau, xi, eta};
}

Prolongation prolong2(Workspace& w, const VectorField& q) {
  // characteristic W = eta − tau·u_t − xi·u_x
  ExprId W = w.sub(q.eta, w.add(w.mul(q.tau, w.jet(1, 0)),
                                w.mul(q.xi, w.jet(0, 1))));
  auto coeff = [&](ExprId dW, int jt, int jx) {
    // D_J(W) + tau·u_{J,t} + xi·u_{J,x}
    return w.add(dW, w.add(w.mul(q.tau, w.jet(jt + 1, jx)),
                           w.mul(q.xi, w.jet(jt, jx + 1))));
  };
  ExprId Wt = w.total_derivative(W, 't');
  ExprId Wx = w.total_derivative(W, 'x');
  Prolongation p;
  p.eta_t = coeff(Wt, 1, 0);
  p.eta_x = coeff(Wx, 0, 1);
  p.eta_tt = coeff(w.total_derivative(Wt, 't'), 2, 0);
  p.eta_tx = coeff(w.total_derivative(Wt, 'x'), 1, 1);
  p.eta_xx = coeff(w.total_derivative(Wx, 'x'), 0, 2);
  return p;
}

ClassEquation::ClassEquation(Workspace& w, ExprId f, ExprId h,
                             ExponentValue n, ExponentValue m)
    : w_(&w), f_(f), h_(h), n_(std::move(n)), m_(std::move(m)) {
  if (n_.is_zero())
    throw ConstraintViolationError(
        "equation family requires a nonzero power in the flux term");
  if (w.is_zero(f_))
    throw ConstraintViolationError(
        "equation family requires a nonvanishing wave-speed coefficient");
  for (ExprId c : {f_, h_})
    if (has_jets(w, c))
      throw ConstraintViolationError(
          "equation coefficients must not depend on jet coordinates");
  ExprId u = w.var("u");
  lhs_ = w.sub(
      w.sub(w.sub(w.mul(f_, w.jet(2, 0)),
                  w.mul(w.exponent_to_expr(n_),
                        w.mul(w.pow(u, n_ - ExponentValue(1LL)),
                              w.pow(w.jet(0, 1), 2)))),
            w.mul(w.pow(u, n_), w.jet(0, 2))),
      w.mul(h_, w.pow(u, m_)));
}

ExprId ManifoldRestriction::apply(Workspace& w, ExprId e) const {
  Substitution s;
  s.atoms[w.jet_atom(1, 0)] = u_t_rule;
  s.atoms[w.jet_atom(1, 1)] = u_tx_rule;
  s.atoms[w.jet_atom(2, 0)] = u_tt_rule;
  s.atoms[w.jet_atom(0, 2)] = u_xx_rule;
  s.atoms[w.jet_atom(3, 0)] = u_ttt_rule;
  s.atoms[w.jet_atom(2, 1)] = u_ttx_rule;
  s.atoms[w.jet_atom(1, 2)] = u_txx_rule;
  s.atoms[w.jet_atom(0, 3)] = u_xxx_rule;
  return w.substitute(e, s);
}

ManifoldRestriction build_restriction(const ClassEquation& eq,
                                      const VectorField& q) {
  Workspace& w = eq.workspace();
  if (w.is_zero(q.tau))
    throw UnsupportedCaseError(
        "tau ≡ 0 operators are outside the supported normalization");
  if (!w.is_one(q.tau))
    throw UnsupportedCaseError(
        "build_restriction expects the regular representative tau = 1");

  ManifoldRestriction r;
  // Invariant-surface condition solved for u_t (tau = 1).
  r.u_t_rule = w.sub(q.eta, w.mul(q.xi, w.jet(0, 1)));

  Substitution sub_t;
  sub_t.atoms[w.jet_atom(1, 0)] = r.u_t_rule;

  // x-consequence: u_tx in terms of (t, x, u, u_x, u_xx).
  ExprId tx_raw =
      w.substitute(w.total_derivative(r.u_t_rule, 'x'), sub_t);
  // t-consequence: u_tt, still carrying u_tx and u_xx.
  ExprId tt_raw = w.substitute(w.total_derivative(r.u_t_rule, 't'), sub_t);
  Substitution sub_tx;
  sub_tx.atoms[w.jet_atom(1, 1)] = tx_raw;
  tt_raw = w.substitute(tt_raw, sub_tx);

  // Substitute u_tt into L[u] = 0 and solve the linear equation in u_xx.
  Substitution sub_tt;
  sub_tt.atoms[w.jet_atom(2, 0)] = tt_raw;
  ExprId L_sub = w.substitute(eq.lhs(), sub_tt);
  AtomId uxx = w.jet_atom(0, 2);
  if (w.degree_in(L_sub, uxx) != 1)
    throw ConstraintViolationError(
        "restricted equation is not linear in u_xx");
  ExprId A = w.coefficient_of(L_sub, uxx, 1);
  ExprId B = w.coefficient_of(L_sub, uxx, 0);

  ExprId u = w.var("u");
  r.regularity_factor =
      w.sub(w.mul(eq.f(), w.pow(q.xi, 2)), w.pow(u, eq.n()));
  if (w.is_zero(r.regularity_factor) || w.is_zero(A))
    throw SingularOperatorError(
        "regularity factor vanishes identically; u_xx cannot be eliminated");
  r.u_xx_rule = w.neg(w.div(B, A));

  // Close the second-order rules over the manifold.
  Substitution sub_xx;
  sub_xx.atoms[uxx] = r.u_xx_rule;
  r.u_tx_rule = w.substitute(tx_raw, sub_xx);
  r.u_tt_rule = w.substitute(tt_raw, sub_xx);

  // Third-order consequences: one more total derivative of each closed
  // rule, re-reduced through the already-closed substitutions.
  Substitution base;
  base.atoms[w.jet_atom(1, 0)] = r.u_t_rule;
  base.atoms[w.jet_atom(1, 1)] = r.u_tx_rule;
  base.atoms[w.jet_atom(2, 0)] = r.u_tt_rule;
  base.atoms[uxx] = r.u_xx_rule;
  auto consequence = [&](ExprId rule, char v) {
    return w.substitute(w.total_derivative(rule, v), base);
  };
  r.u_ttt_rule = consequence(r.u_tt_rule, 't');
  r.u_ttx_rule = consequence(r.u_tt_rule, 'x');
  r.u_txx_rule = consequence(r.u_tx_rule, 'x');
  r.u_xxx_rule = consequence(r.u_xx_rule, 'x');
  return r;
}

ExprId criterion_residual(const ClassEquation& eq, const VectorField& q,
                          const ManifoldRestriction& r, int* cleared_power) {
  Workspace& w = eq.workspace();
  Prolongation p = prolong2(w, q);
  ExprId L = eq.lhs();
  // pr²Q(L): first-order part plus prolonged coefficients against the jet
  // slots of L.
  ExprId acc = w.add(
      w.add(w.mul(q.tau, w.diff(L, w.var_atom("t"))),
            w.mul(q.xi, w.diff(L, w.var_atom("x")))),
      w.mul(q.eta, w.diff(L, w.var_atom("u"))));
  const std::pair<ExprId, AtomId> slots[] = {
      {p.eta_t, w.jet_atom(1, 0)},  {p.eta_x, w.jet_atom(0, 1)},
      {p.eta_tt, w.jet_atom(2, 0)}, {p.eta_tx, w.jet_atom(1, 1)},
      {p.eta_xx, w.jet_atom(0, 2)},
  };
  for (const auto& [coeff, a] : slots)
    acc = w.add(acc, w.mul(coeff, w.diff(L, a)));

  ExprId restricted = r.apply(w, acc);

  // Clear the minimal power of the regularity factor from the denominator.
  int power = w.den_multiplicity(restricted, r.regularity_factor);
  ExprId cleared =
      power > 0 ? w.mul(restricted, w.pow(r.regularity_factor,
                                          static_cast<long long>(power)))
                : restricted;
  if (cleared_power) *cleared_power = power;
  return cleared;
}

}  // namespace redop
