#include <algorithm>
#include <functional>

#include "redop/expr.hpp"

namespace redop {

namespace {
std::uint64_t pack2(std::uint32_t a, std::uint32_t b) {
  return (static_cast<std::uint64_t>(a) << 32) | b;
}
}  // namespace

// --- differentiation ---------------------------------------------------------

ExprId Workspace::atom_diff(AtomId a, AtomId v) {
  if (a == v) return one_;
  const AtomData d = atoms_[a];  // copy: recursion may grow the arena
  switch (d.kind) {
    case AtomKind::Var:
    case AtomKind::Param:
    case AtomKind::Jet:
      return zero_;
    case AtomKind::Func: {
      const FuncInfo info = function_info(d.name);
      ExprId total = zero_;
      for (std::size_t i = 0; i < d.args.size(); ++i) {
        ExprId dai = diff(d.args[i], v);
        if (is_zero(dai)) continue;
        ExprId dFi;
        if (info.kind == FuncDefKind::LogDeriv) {
          // ∂_i F = ratio_i · F (ratio given over the signature variables).
          ExprId ratio = info.ratios[i];
          bool identity = true;
          for (std::size_t j = 0; j < d.args.size(); ++j)
            if (d.args[j] != var(info.sig[j])) identity = false;
          if (!identity) {
            Substitution s;
            for (std::size_t j = 0; j < d.args.size(); ++j)
              s.atoms[var_atom(info.sig[j])] = d.args[j];
            ratio = substitute(ratio, s);
          }
          std::vector<ExprId> args_copy = d.args;
          dFi = mul(ratio, func(d.name, std::move(args_copy), d.deriv));
        } else {
          std::vector<int> dd = d.deriv;
          dd[i] += 1;
          std::vector<ExprId> args_copy = d.args;
          dFi = func(d.name, std::move(args_copy), std::move(dd));
        }
        total = add(total, mul(dai, dFi));
      }
      return total;
    }
    case AtomKind::Integral: {
      const AtomData& vd = atoms_[v];
      if (vd.kind == AtomKind::Var && vd.name == d.ivar) return d.args[0];
      ExprId dg = diff(d.args[0], v);
      return integral(dg, d.ivar);
    }
    case AtomKind::PowWrap:
      return diff(d.args[0], v);
  }
  return zero_;
}

ExprId Workspace::mono_diff(const Monomial& m, AtomId v) {
  ExprId total = zero_;
  for (std::size_t i = 0; i < m.powers.size(); ++i) {
    AtomId a = m.powers[i].first;
    if (!atom_depends(a, v)) continue;
    ExprId da = atom_diff(a, v);
    if (is_zero(da)) continue;
    Monomial rest = m;
    ExponentValue g = rest.powers[i].second;
    ExponentValue gm1 = g - ExponentValue(1);
    if (gm1.is_zero())
      rest.powers.erase(rest.powers.begin() + static_cast<long>(i));
    else
      rest.powers[i].second = gm1;
    ExprId term =
        mul(mul(exponent_to_expr(g), from_monomial(std::move(rest))), da);
    total = add(total, term);
  }
  if (m.exp_arg != kNoExpr) {
    ExprId darg = diff(m.exp_arg, v);
    if (!is_zero(darg)) total = add(total, mul(from_monomial(m), darg));
  }
  return total;
}

ExprId Workspace::diff(ExprId e, AtomId v) {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  {
    const AtomData& vd = atoms_[v];
    if (vd.kind != AtomKind::Var && vd.kind != AtomKind::Jet)
      throw Error(
          "differentiation variable must be a base variable or jet "
          "coordinate");
  }
  if (!depends_on(e, v)) return zero_;
  std::uint64_t key = pack2(e, v);
  auto it = diff_cache_.find(key);
  if (it != diff_cache_.end()) return it->second;
  const NormalExpr n = node(e);  // copy: recursion grows the arena
  ExprId dnum = zero_;
  for (const auto& m : n.num) dnum = add(dnum, mono_diff(m, v));
  ExprId result;
  if (n.den.empty()) {
    result = dnum;
  } else {
    // d(N/∏F^k) = dN/∏F^k − Σ k_i·dF_i·(N/∏F^k)/F_i
    Poly one_poly{Monomial{}};
    ExprId inv_den = make_expr(one_poly, n.den);
    result = mul(dnum, inv_den);
    for (std::size_t i = 0; i < n.den.size(); ++i) {
      ExprId fb = poly_to_expr(n.den[i].base);
      if (!depends_on(fb, v)) continue;
      ExprId dfb = diff(fb, v);
      if (is_zero(dfb)) continue;
      std::vector<DenFactor> den2 = n.den;
      den2[i].mult += 1;
      ExprId over = make_expr(n.num, std::move(den2));
      result = sub(result,
                   mul(integer(n.den[i].mult), mul(dfb, over)));
    }
  }
  diff_cache_.emplace(key, result);
  return result;
}

ExprId Workspace::diff_var(ExprId e, const std::string& var_name) {
  return diff(e, var_atom(var_name));
}

ExprId Workspace::total_derivative(ExprId e, char tx) {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  if (tx != 't' && tx != 'x')
    throw Error("total derivative direction must be 't' or 'x'");
  int dt = tx == 't' ? 1 : 0;
  int dx = 1 - dt;
  for (int jt = 0; jt <= 4; ++jt) {
    int jx = 4 - jt;
    if (depends_on(e, jet_atom(jt, jx)))
      throw Error(
          "total derivative of an expression containing fourth-order jet "
          "coordinates would exceed the supported jet order");
  }
  ExprId result = diff(e, var_atom(tx == 't' ? "t" : "x"));
  AtomId ua = var_atom("u");
  if (depends_on(e, ua)) result = add(result, mul(diff(e, ua), jet(dt, dx)));
  for (int jt = 0; jt <= 3; ++jt)
    for (int jx = 0; jt + jx <= 3; ++jx) {
      if (jt + jx < 1) continue;
      AtomId ja = jet_atom(jt, jx);
      if (depends_on(e, ja))
        result = add(result, mul(diff(e, ja), jet(jt + dt, jx + dx)));
    }
  return result;
}

// --- substitution --------------------------------------------------------------

namespace {

// Bindings of the exponent-module parameters. Monomial exponents are values
// in the module (A(n)+B(n)m)/Q(n), so binding n or m must rewrite them too:
// m may be bound to any module value, n only to a rational constant.
struct ExpBind {
  bool n_bound = false;
  std::optional<Rational> n_const;
  bool m_bound = false;
  std::optional<ExponentValue> m_val;
  bool any() const { return n_bound || m_bound; }
};

ExpBind resolve_exp_bindings(const Workspace& w, const Substitution& s) {
  ExpBind out;
  auto probe = [&](const char* name, bool* bound,
                   std::optional<ExponentValue>* val) {
    if (!w.has_param(name)) return;
    AtomId a = const_cast<Workspace&>(w).param_atom(name);
    auto it = s.atoms.find(a);
    if (it == s.atoms.end()) return;
    if (it->second == const_cast<Workspace&>(w).param(name)) return;
    *bound = true;
    *val = w.expr_to_exponent(it->second);
  };
  std::optional<ExponentValue> nval;
  probe("n", &out.n_bound, &nval);
  if (out.n_bound && nval && nval->is_constant())
    out.n_const = nval->constant_value();
  probe("m", &out.m_bound, &out.m_val);
  return out;
}

ExponentValue compose_exponent(const ExponentValue& g, const ExpBind& b) {
  if (!b.any()) return g;
  bool uses_n = upoly_degree(g.mfree_part()) >= 1 ||
                upoly_degree(g.m_part()) >= 1 ||
                upoly_degree(g.den_part()) >= 1;
  bool uses_m = !upoly_is_zero(g.m_part());
  if (b.n_bound && uses_n && !b.n_const)
    throw UnsupportedCaseError(
        "the exponent parameter n may only be bound to a rational constant");
  if (b.m_bound && uses_m && !b.m_val)
    throw UnsupportedCaseError(
        "the exponent parameter m may only be bound to a value in the "
        "exponent module");
  ExponentValue em = b.m_bound && uses_m ? *b.m_val : ExponentValue::param_m();
  if (b.n_bound && uses_n) {
    Rational av = upoly_eval(g.mfree_part(), *b.n_const);
    Rational bv = upoly_eval(g.m_part(), *b.n_const);
    Rational qv = upoly_eval(g.den_part(), *b.n_const);
    if (qv == 0)
      throw DomainError("exponent denominator vanishes at the bound n value");
    return ExponentValue(av / qv) + ExponentValue(bv / qv) * em;
  }
  if (b.m_bound && uses_m) {
    ExponentValue afrac =
        ExponentValue::make(g.mfree_part(), UniPoly{}, g.den_part());
    ExponentValue bfrac =
        ExponentValue::make(g.m_part(), UniPoly{}, g.den_part());
    return afrac + bfrac * em;
  }
  return g;
}

}  // namespace

ExprId Workspace::subst_atom(AtomId a, const Substitution& s,
                             std::unordered_map<ExprId, ExprId>& memo) {
  auto ait = s.atoms.find(a);
  if (ait != s.atoms.end()) return ait->second;
  const AtomData d = atoms_[a];  // copy
  auto unchanged = [&]() {
    Monomial m;
    m.powers.emplace_back(a, ExponentValue(1));
    return from_monomial(std::move(m));
  };
  switch (d.kind) {
    case AtomKind::Var:
    case AtomKind::Param:
    case AtomKind::Jet:
      return unchanged();
    case AtomKind::Func: {
      std::vector<ExprId> nargs;
      bool changed = false;
      for (ExprId arg : d.args) {
        ExprId na = subst_rec(arg, s, memo);
        changed = changed || na != arg;
        nargs.push_back(na);
      }
      auto fit = s.funcs.find(d.name);
      if (fit != s.funcs.end()) {
        const FuncInfo info = function_info(d.name);
        ExprId body = fit->second;
        for (std::size_t i = 0; i < d.deriv.size(); ++i)
          for (int k = 0; k < d.deriv[i]; ++k)
            body = diff(body, var_atom(info.sig[i]));
        bool identity = true;
        for (std::size_t i = 0; i < nargs.size(); ++i)
          if (nargs[i] != var(info.sig[i])) identity = false;
        if (!identity) {
          Substitution s2;
          for (std::size_t i = 0; i < nargs.size(); ++i)
            s2.atoms[var_atom(info.sig[i])] = nargs[i];
          std::unordered_map<ExprId, ExprId> memo2;
          body = subst_rec(body, s2, memo2);
        }
        return body;
      }
      if (!changed) return unchanged();
      return func(d.name, std::move(nargs), d.deriv);
    }
    case AtomKind::Integral: {
      auto vit = vars_.find(d.ivar);
      if (vit != vars_.end() && s.atoms.count(vit->second))
        throw Error(
            "cannot substitute for the integration variable of an "
            "antiderivative node");
      ExprId ng = subst_rec(d.args[0], s, memo);
      if (ng == d.args[0]) return unchanged();
      return integral(ng, d.ivar);
    }
    case AtomKind::PowWrap:
      return subst_rec(d.args[0], s, memo);
  }
  return unchanged();
}

ExprId Workspace::subst_rec(ExprId e, const Substitution& s,
                            std::unordered_map<ExprId, ExprId>& memo) {
  auto it = memo.find(e);
  if (it != memo.end()) return it->second;
  const NormalExpr n = node(e);  // copy
  const ExpBind eb = resolve_exp_bindings(*this, s);
  auto subst_poly = [&](const Poly& p) {
    ExprId acc = zero_;
    for (const auto& m : p) {
      ExprId term = constant(m.coeff);
      for (const auto& [a, g] : m.powers) {
        ExprId base = subst_atom(a, s, memo);
        term = mul(term, pow(base, compose_exponent(g, eb)));
      }
      if (m.exp_arg != kNoExpr)
        term = mul(term, exp_of(subst_rec(m.exp_arg, s, memo)));
      acc = add(acc, term);
    }
    return acc;
  };
  ExprId result = subst_poly(n.num);
  for (const auto& f : n.den) {
    ExprId fb = subst_poly(f.base);
    if (is_zero(fb))
      throw DomainError("substitution makes a denominator vanish in: " +
                        render(e));
    result = div(result, pow(fb, static_cast<long long>(f.mult)));
  }
  memo.emplace(e, result);
  return result;
}

ExprId Workspace::substitute(ExprId e, const Substitution& s) {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  if (s.atoms.empty() && s.funcs.empty()) return e;

  // Reject cyclic bindings (the substitution is simultaneous, but a cycle in
  // the binding graph almost always indicates a caller error).
  std::map<std::string, ExprId> targets;
  for (const auto& [a, t] : s.atoms)
    targets.emplace("a:" + std::to_string(a), t);
  for (const auto& [fname, t] : s.funcs) targets.emplace("f:" + fname, t);
  auto neighbors = [&](ExprId target) {
    std::vector<std::string> out;
    for (AtomId a : atoms_of(target)) {
      if (s.atoms.count(a)) out.push_back("a:" + std::to_string(a));
      const AtomData& d = atoms_[a];
      if (d.kind == AtomKind::Func && s.funcs.count(d.name))
        out.push_back("f:" + d.name);
    }
    return out;
  };
  std::map<std::string, int> color;  // 0 white, 1 grey, 2 black
  std::function<void(const std::string&)> visit = [&](const std::string& k) {
    int& c = color[k];
    if (c == 1)
      throw CyclicBindingError("cyclic substitution binding involving " + k);
    if (c == 2) return;
    c = 1;
    auto it = targets.find(k);
    if (it != targets.end())
      for (const auto& nk : neighbors(it->second)) visit(nk);
    color[k] = 2;
  };
  for (const auto& [k, t] : targets) {
    (void)t;
    visit(k);
  }

  std::unordered_map<ExprId, ExprId> memo;
  return subst_rec(e, s, memo);
}

// --- collection ----------------------------------------------------------------

std::map<long long, ExprId> Workspace::collect_int(ExprId e, AtomId v) {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  const NormalExpr n = node(e);  // copy
  for (const auto& f : n.den)
    for (const auto& m : f.base)
      for (const auto& [a, g] : m.powers) {
        (void)g;
        if (atom_depends(a, v))
          throw NotPolynomialError(
              "collection variable occurs in a denominator of: " + render(e));
      }
  std::map<long long, ExprId> out;
  for (const auto& m : n.num) {
    long long deg = 0;
    Monomial rest;
    rest.coeff = m.coeff;
    rest.exp_arg = m.exp_arg;
    for (const auto& [a, g] : m.powers) {
      if (a == v) {
        long long k;
        if (!g.is_integer_constant(&k) || k < 0)
          throw NotPolynomialError(
              "collection variable carries a non-integer or negative "
              "exponent: " +
              g.to_string());
        deg = k;
      } else {
        if (atom_depends(a, v))
          throw NotPolynomialError(
              "collection variable occurs inside a composite atom: " +
              render_atom(a));
        rest.powers.emplace_back(a, g);
      }
    }
    if (m.exp_arg != kNoExpr && depends_on(m.exp_arg, v))
      throw NotPolynomialError(
          "collection variable occurs inside an exponential argument");
    ExprId term = from_monomial(std::move(rest));
    if (!n.den.empty()) {
      Poly num_one{Monomial{}};
      term = mul(term, make_expr(num_one, n.den));
    }
    auto it = out.find(deg);
    out[deg] = it == out.end() ? term : add(it->second, term);
  }
  return out;
}

std::vector<std::pair<ExponentValue, ExprId>> Workspace::collect_classes(
    ExprId e, AtomId v) {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  const NormalExpr n = node(e);  // copy
  for (const auto& f : n.den)
    for (const auto& m : f.base)
      for (const auto& [a, g] : m.powers) {
        (void)g;
        if (atom_depends(a, v))
          throw NotPolynomialError(
              "collection variable occurs in a denominator of: " + render(e));
      }
  std::vector<std::pair<ExponentValue, ExprId>> out;
  auto slot = [&](const ExponentValue& g) -> ExprId& {
    for (auto& [k, val] : out)
      if (k == g) return val;
    out.emplace_back(g, zero_);
    return out.back().second;
  };
  for (const auto& m : n.num) {
    ExponentValue deg(0);
    Monomial rest;
    rest.coeff = m.coeff;
    rest.exp_arg = m.exp_arg;
    for (const auto& [a, g] : m.powers) {
      if (a == v) {
        deg = g;
      } else {
        if (atom_depends(a, v))
          throw NotPolynomialError(
              "collection variable occurs inside a composite atom: " +
              render_atom(a));
        rest.powers.emplace_back(a, g);
      }
    }
    if (m.exp_arg != kNoExpr && depends_on(m.exp_arg, v))
      throw NotPolynomialError(
          "collection variable occurs inside an exponential argument");
    ExprId term = from_monomial(std::move(rest));
    if (!n.den.empty()) {
      Poly num_one{Monomial{}};
      term = mul(term, make_expr(num_one, n.den));
    }
    ExprId& dst = slot(deg);
    dst = is_zero(dst) ? term : add(dst, term);
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) {
              return a.first.compare(b.first) > 0;
            });
  return out;
}

std::vector<std::pair<std::vector<long long>, ExprId>> Workspace::collect_multi(
    ExprId e, std::span<const AtomId> basis) {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  const NormalExpr n = node(e);  // copy
  for (AtomId v : basis)
    for (const auto& f : n.den)
      for (const auto& m : f.base)
        for (const auto& [a, g] : m.powers) {
          (void)g;
          if (atom_depends(a, v))
            throw NotPolynomialError(
                "collection coordinate occurs in a denominator of: " +
                render(e));
        }
  std::map<std::vector<long long>, ExprId> acc;
  for (const auto& m : n.num) {
    std::vector<long long> key(basis.size(), 0);
    Monomial rest;
    rest.coeff = m.coeff;
    rest.exp_arg = m.exp_arg;
    for (const auto& [a, g] : m.powers) {
      auto bit = std::find(basis.begin(), basis.end(), a);
      if (bit != basis.end()) {
        long long k;
        if (!g.is_integer_constant(&k) || k < 0)
          throw NotPolynomialError(
              "collection coordinate carries a non-integer or negative "
              "exponent: " +
              g.to_string());
        key[static_cast<std::size_t>(bit - basis.begin())] = k;
      } else {
        for (AtomId v : basis)
          if (atom_depends(a, v))
            throw NotPolynomialError(
                "collection coordinate occurs inside a composite atom: " +
                render_atom(a));
        rest.powers.emplace_back(a, g);
      }
    }
    if (m.exp_arg != kNoExpr)
      for (AtomId v : basis)
        if (depends_on(m.exp_arg, v))
          throw NotPolynomialError(
              "collection coordinate occurs inside an exponential argument");
    ExprId term = from_monomial(std::move(rest));
    if (!n.den.empty()) {
      Poly num_one{Monomial{}};
      term = mul(term, make_expr(num_one, n.den));
    }
    auto it = acc.find(key);
    if (it == acc.end())
      acc.emplace(std::move(key), term);
    else
      it->second = add(it->second, term);
  }
  std::vector<std::pair<std::vector<long long>, ExprId>> out(acc.begin(),
                                                             acc.end());
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.first > b.first;  // lexicographic descending
  });
  return out;
}

ExprId Workspace::coefficient_of(ExprId e, AtomId v, long long k) {
  auto m = collect_int(e, v);
  auto it = m.find(k);
  return it == m.end() ? zero_ : it->second;
}

long long Workspace::degree_in(ExprId e, AtomId v) const {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  const NormalExpr& n = node(e);
  for (const auto& f : n.den)
    for (const auto& m : f.base)
      for (const auto& [a, g] : m.powers) {
        (void)g;
        if (atom_depends(a, v))
          throw NotPolynomialError(
              "degree query: variable occurs in a denominator");
      }
  long long deg = 0;
  for (const auto& m : n.num) {
    for (const auto& [a, g] : m.powers) {
      if (a == v) {
        long long k;
        if (!g.is_integer_constant(&k) || k < 0)
          throw NotPolynomialError(
              "degree query: non-integer or negative exponent");
        deg = std::max(deg, k);
      } else if (atom_depends(a, v)) {
        throw NotPolynomialError(
            "degree query: variable occurs inside a composite atom");
      }
    }
    if (m.exp_arg != kNoExpr && depends_on(m.exp_arg, v))
      throw NotPolynomialError(
          "degree query: variable occurs inside an exponential argument");
  }
  return deg;
}

}  // namespace redop
