#include "redop/expr.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <sstream>

namespace redop {

namespace {

const char* kVarNames[] = {"t", "x", "u", "w"};

bool is_known_var(const std::string& s) {
  for (const char* v : kVarNames)
    if (s == v) return true;
  return false;
}

std::uint64_t pack2(std::uint32_t a, std::uint32_t b) {
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

}  // namespace

Workspace::Workspace() {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  zero_ = intern(NormalExpr{});
  NormalExpr one;
  one.num.push_back(Monomial{});
  one_ = intern(std::move(one));
  for (const char* v : kVarNames) {
    AtomData a;
    a.kind = AtomKind::Var;
    a.name = v;
    a.key = std::string("V.") + v;
    AtomId id = intern_atom(std::move(a));
    vars_.emplace(v, id);
  }
  positive_atoms_.insert(vars_.at("x"));
  positive_atoms_.insert(vars_.at("u"));
  for (const char* p :
       {"n", "m", "r", "p", "b", "q", "s", "a", "c", "d", "g0", "g1", "c1",
        "c2", "e1", "e2", "e3", "e4", "e5", "e6", "e7"}) {
    param_atom(p);
  }
}

// --- interning -----------------------------------------------------------

AtomId Workspace::intern_atom(AtomData&& a) {
  auto it = atom_index_.find(a.key);
  if (it != atom_index_.end()) return it->second;
  AtomId id = static_cast<AtomId>(atoms_.size());
  atom_index_.emplace(a.key, id);
  atoms_.push_back(std::move(a));
  return id;
}

ExprId Workspace::intern(NormalExpr&& n) {
  std::string key = serialize(n);
  auto it = expr_index_.find(key);
  if (it != expr_index_.end()) return it->second;
  ExprId id = static_cast<ExprId>(exprs_.size());
  expr_index_.emplace(key, id);
  exprs_.push_back(std::move(n));
  expr_keys_.push_back(std::move(key));
  return id;
}

const NormalExpr& Workspace::node(ExprId e) const {
  assert(e < exprs_.size());
  return exprs_[e];
}

const AtomData& Workspace::atom(AtomId a) const {
  assert(a < atoms_.size());
  return atoms_[a];
}

const std::string& Workspace::expr_key(ExprId e) const {
  assert(e < expr_keys_.size());
  return expr_keys_[e];
}

// --- serialization (canonical identity keys) ------------------------------

std::string Workspace::serialize_mono(const Monomial& m) const {
  // Exponent text may itself contain '+', '*', and '/'; brace-delimit it so
  // the separators stay unambiguous and the key map stays injective.
  std::string out = m.coeff.str();
  for (const auto& [a, e] : m.powers) {
    out += '*';
    out += atoms_[a].key;
    out += "^{";
    out += e.to_string();
    out += '}';
  }
  if (m.exp_arg != kNoExpr) {
    out += "*E";
    out += std::to_string(m.exp_arg);
  }
  return out;
}

std::string Workspace::serialize_poly(const Poly& p) const {
  std::string out;
  for (const auto& m : p) {
    if (!out.empty()) out += '+';
    out += serialize_mono(m);
  }
  return out.empty() ? "0" : out;
}

std::string Workspace::serialize(const NormalExpr& n) const {
  std::string out = serialize_poly(n.num);
  for (const auto& f : n.den) {
    out += "/(";
    out += serialize_poly(f.base);
    out += ")^";
    out += std::to_string(f.mult);
  }
  return out;
}

// Friend helper with access to the private poly machinery.
struct WorkspaceOps {
  static Poly pow_int(Workspace& w, const Poly& p, int k) {
    Poly r{Monomial{}};
    for (int i = 0; i < k; ++i) r = w.poly_mul(r, p);
    return r;
  }

  // True when some monomial carries a wrapped composite base with an integer
  // exponent; such powers must be expanded back into polynomial form so that
  // zero detection stays complete (e.g. (u+1)^(1/2) squared is u+1).
  static bool has_int_powwrap(const Workspace& w, const Poly& p) {
    for (const auto& m : p)
      for (const auto& [a, e] : m.powers) {
        long long k;
        if (w.atoms_[a].kind == AtomKind::PowWrap &&
            e.is_integer_constant(&k))
          return true;
      }
    return false;
  }

  // Rebuilds a monomial as an expression, expanding integer-exponent wrapped
  // powers through the ordinary pow path.
  static ExprId expand_monomial(Workspace& w, const Monomial& m) {
    Monomial rest;
    rest.coeff = m.coeff;
    rest.exp_arg = m.exp_arg;
    ExprId acc = w.one_;
    for (const auto& [a, e] : m.powers) {
      long long k;
      if (w.atoms_[a].kind == AtomKind::PowWrap &&
          e.is_integer_constant(&k)) {
        acc = w.mul(acc, w.pow(w.atoms_[a].args[0], k));
      } else {
        rest.powers.emplace_back(a, e);
      }
    }
    return w.mul(acc, w.from_monomial(std::move(rest)));
  }

  // Splits base = content · monic_rest where monic_rest has leading
  // coefficient 1 and no atom common to all monomials. base must be
  // multi-term on entry and stays multi-term.
  static Monomial extract_content(Workspace& w, Poly& base) {
    Monomial content;
    const Monomial& first = base.front();
    for (const auto& [a, e] : first.powers) {
      bool in_all = true;
      ExponentValue emin = e;
      for (std::size_t i = 1; i < base.size() && in_all; ++i) {
        bool found = false;
        for (const auto& [a2, e2] : base[i].powers) {
          if (a2 == a) {
            found = true;
            if (e2.compare(emin) < 0) emin = e2;
            break;
          }
        }
        in_all = found;
      }
      if (in_all) content.powers.emplace_back(a, emin);
    }
    if (!content.powers.empty()) {
      Monomial inv;
      for (const auto& [a, e] : content.powers) inv.powers.emplace_back(a, -e);
      base = w.poly_mul(base, {inv});
    }
    Rational lead = base.front().coeff;
    if (lead != 1) {
      base = w.poly_scale(base, Rational(1) / lead);
      content.coeff = lead;
    }
    return content;
  }
};

// --- symbols ---------------------------------------------------------------

AtomId Workspace::var_atom(const std::string& name) {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  auto it = vars_.find(name);
  if (it == vars_.end())
    throw UnknownSymbolError("unknown base variable: " + name);
  return it->second;
}

ExprId Workspace::var(const std::string& name) {
  Monomial m;
  m.powers.emplace_back(var_atom(name), ExponentValue(1));
  return from_monomial(std::move(m));
}

AtomId Workspace::param_atom(const std::string& name) {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  auto it = params_.find(name);
  if (it != params_.end()) return it->second;
  if (is_known_var(name))
    throw Error("name collides with a base variable: " + name);
  AtomData a;
  a.kind = AtomKind::Param;
  a.name = name;
  a.key = "P." + name;
  AtomId id = intern_atom(std::move(a));
  params_.emplace(name, id);
  return id;
}

ExprId Workspace::param(const std::string& name) {
  Monomial m;
  m.powers.emplace_back(param_atom(name), ExponentValue(1));
  return from_monomial(std::move(m));
}

bool Workspace::has_param(const std::string& name) const {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  return params_.count(name) > 0;
}

AtomId Workspace::jet_atom(int jt, int jx) {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  if (jt < 0 || jx < 0 || jt + jx < 1 || jt + jx > 4)
    throw Error("jet order out of range: u_{t^" + std::to_string(jt) +
                " x^" + std::to_string(jx) + "}");
  AtomData a;
  a.kind = AtomKind::Jet;
  a.jt = jt;
  a.jx = jx;
  a.key = "J." + std::to_string(jt) + "." + std::to_string(jx);
  return intern_atom(std::move(a));
}

ExprId Workspace::jet(int jt, int jx) {
  Monomial m;
  m.powers.emplace_back(jet_atom(jt, jx), ExponentValue(1));
  return from_monomial(std::move(m));
}

void Workspace::register_function(const std::string& name,
                                  std::vector<std::string> sig,
                                  bool positive) {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  if (vars_.count(name) || params_.count(name))
    throw Error("function name collides with an existing symbol: " + name);
  for (const auto& v : sig)
    if (!is_known_var(v))
      throw Error("function signature entry is not a base variable: " + v);
  FuncInfo info;
  info.sig = std::move(sig);
  info.kind = FuncDefKind::Opaque;
  info.positive = positive;
  funcs_[name] = std::move(info);
}

void Workspace::register_logderiv(const std::string& name,
                                  std::vector<std::string> sig,
                                  std::vector<ExprId> ratios, bool positive) {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  if (ratios.size() != sig.size())
    throw Error("logarithmic-derivative registration arity mismatch");
  register_function(name, sig, positive);
  FuncInfo& info = funcs_[name];
  info.kind = FuncDefKind::LogDeriv;
  info.ratios = std::move(ratios);
}

void Workspace::register_closed(const std::string& name,
                                std::vector<std::string> sig, ExprId body,
                                bool positive) {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  register_function(name, sig, positive);
  FuncInfo& info = funcs_[name];
  info.kind = FuncDefKind::Closed;
  info.body = body;
}

bool Workspace::has_function(const std::string& name) const {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  return funcs_.count(name) > 0;
}

const FuncInfo& Workspace::function_info(const std::string& name) const {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  auto it = funcs_.find(name);
  if (it == funcs_.end())
    throw UnknownSymbolError("unknown function symbol: " + name);
  return it->second;
}

void Workspace::assume_positive(const std::string& name) {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  auto fit = funcs_.find(name);
  if (fit != funcs_.end()) {
    fit->second.positive = true;
    return;
  }
  auto vit = vars_.find(name);
  if (vit != vars_.end()) {
    positive_atoms_.insert(vit->second);
    return;
  }
  positive_atoms_.insert(param_atom(name));
}

ExprId Workspace::func(const std::string& name) {
  const FuncInfo info = function_info(name);
  std::vector<ExprId> args;
  for (const auto& v : info.sig) args.push_back(var(v));
  return func(name, std::move(args), std::vector<int>(info.sig.size(), 0));
}

ExprId Workspace::func(const std::string& name, std::vector<ExprId> args,
                       std::vector<int> deriv) {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  const FuncInfo info = function_info(name);
  if (args.size() != info.sig.size())
    throw Error("arity mismatch for function symbol: " + name);
  if (deriv.empty()) deriv.assign(args.size(), 0);
  if (deriv.size() != args.size())
    throw Error("derivative multi-index arity mismatch for: " + name);
  for (int d : deriv)
    if (d < 0) throw Error("negative derivative index for: " + name);

  bool has_deriv = std::any_of(deriv.begin(), deriv.end(),
                               [](int d) { return d > 0; });
  bool identity_args = true;
  for (std::size_t i = 0; i < args.size(); ++i) {
    ExprId sig_var = var(info.sig[i]);
    if (args[i] != sig_var) identity_args = false;
  }

  if (info.kind == FuncDefKind::Closed ||
      (has_deriv && info.kind == FuncDefKind::LogDeriv)) {
    // Expand through the definition: differentiate over the signature
    // variables, then substitute the actual arguments.
    ExprId body;
    if (info.kind == FuncDefKind::Closed) {
      body = info.body;
    } else {
      std::vector<ExprId> sig_args;
      for (const auto& v : info.sig) sig_args.push_back(var(v));
      body = func(name, std::move(sig_args),
                  std::vector<int>(info.sig.size(), 0));
    }
    for (std::size_t i = 0; i < args.size(); ++i)
      for (int k = 0; k < deriv[i]; ++k)
        body = diff(body, var_atom(info.sig[i]));
    if (!identity_args) {
      Substitution s;
      for (std::size_t i = 0; i < args.size(); ++i)
        s.atoms[var_atom(info.sig[i])] = args[i];
      body = substitute(body, s);
    }
    return body;
  }

  AtomData a;
  a.kind = AtomKind::Func;
  a.name = name;
  a.args = std::move(args);
  a.deriv = std::move(deriv);
  a.key = "F." + name + "|";
  for (int d : a.deriv) a.key += std::to_string(d) + ",";
  a.key += "|";
  for (ExprId e : a.args) a.key += std::to_string(e) + ",";
  Monomial m;
  m.powers.emplace_back(intern_atom(std::move(a)), ExponentValue(1));
  return from_monomial(std::move(m));
}

ExprId Workspace::func_deriv(const std::string& name,
                             const std::vector<int>& deriv) {
  const FuncInfo info = function_info(name);
  std::vector<ExprId> args;
  for (const auto& v : info.sig) args.push_back(var(v));
  return func(name, std::move(args), deriv);
}

// --- basic construction ------------------------------------------------------

ExprId Workspace::constant(const Rational& c) {
  if (c == 0) return zero_;
  Monomial m;
  m.coeff = c;
  return from_monomial(std::move(m));
}

ExprId Workspace::integer(long long v) { return constant(Rational(v)); }

ExprId Workspace::from_monomial(Monomial m) {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  if (m.coeff == 0) return zero_;
  return make_expr(Poly{std::move(m)}, {});
}

ExprId Workspace::poly_to_expr(const Poly& p) {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  NormalExpr n;
  n.num = p;
  poly_normalize(n.num);
  return intern(std::move(n));
}

ExprId Workspace::make_expr(Poly num, std::vector<DenFactor> den) {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  poly_normalize(num);
  bool needs_expand = WorkspaceOps::has_int_powwrap(*this, num);
  for (const auto& f : den)
    needs_expand = needs_expand || WorkspaceOps::has_int_powwrap(*this, f.base);
  if (needs_expand) {
    // Rebuild through the operation layer so integer powers of wrapped
    // composite bases are expanded into polynomial form.
    ExprId acc = zero_;
    for (const auto& m : num)
      acc = add(acc, WorkspaceOps::expand_monomial(*this, m));
    ExprId dacc = one_;
    for (const auto& f : den) {
      ExprId fb = zero_;
      for (const auto& m : f.base)
        fb = add(fb, WorkspaceOps::expand_monomial(*this, m));
      dacc = mul(dacc, pow(fb, static_cast<long long>(f.mult)));
    }
    return div(acc, dacc);
  }
  normalize_den(num, den);
  NormalExpr n;
  n.num = std::move(num);
  n.den = std::move(den);
  return intern(std::move(n));
}

// --- monomial/poly machinery -------------------------------------------------

int Workspace::mono_cmp(const Monomial& a, const Monomial& b) const {
  std::size_t i = 0, j = 0;
  while (i < a.powers.size() || j < b.powers.size()) {
    if (i == a.powers.size()) {
      // a lacks this atom: exponent 0 versus b's exponent
      int s = ExponentValue(0).compare(b.powers[j].second);
      if (s != 0) return s;
      ++j;
      continue;
    }
    if (j == b.powers.size()) {
      int s = a.powers[i].second.compare(ExponentValue(0));
      if (s != 0) return s;
      ++i;
      continue;
    }
    const std::string& ka = atoms_[a.powers[i].first].key;
    const std::string& kb = atoms_[b.powers[j].first].key;
    if (ka == kb) {
      int s = a.powers[i].second.compare(b.powers[j].second);
      if (s != 0) return s;
      ++i;
      ++j;
    } else if (ka < kb) {
      // a has an atom b lacks: compare its exponent with 0
      int s = a.powers[i].second.compare(ExponentValue(0));
      if (s != 0) return s;
      ++i;
    } else {
      int s = ExponentValue(0).compare(b.powers[j].second);
      if (s != 0) return s;
      ++j;
    }
  }
  long long ea = a.exp_arg == kNoExpr ? -1 : static_cast<long long>(a.exp_arg);
  long long eb = b.exp_arg == kNoExpr ? -1 : static_cast<long long>(b.exp_arg);
  if (ea != eb) return ea < eb ? -1 : 1;
  return 0;
}

void Workspace::poly_normalize(Poly& p) const {
  std::sort(p.begin(), p.end(),
            [this](const Monomial& a, const Monomial& b) {
              return mono_cmp(a, b) > 0;
            });
  Poly out;
  out.reserve(p.size());
  for (auto& m : p) {
    if (m.coeff == 0) continue;
    if (!out.empty() && mono_cmp(out.back(), m) == 0) {
      out.back().coeff += m.coeff;
      if (out.back().coeff == 0) out.pop_back();
    } else {
      out.push_back(std::move(m));
    }
  }
  p = std::move(out);
}

Poly Workspace::poly_add(const Poly& a, const Poly& b) const {
  Poly r = a;
  r.insert(r.end(), b.begin(), b.end());
  poly_normalize(r);
  return r;
}

Poly Workspace::poly_neg(const Poly& a) const {
  Poly r = a;
  for (auto& m : r) m.coeff = -m.coeff;
  return r;
}

Poly Workspace::poly_scale(const Poly& a, const Rational& c) const {
  if (c == 0) return {};
  Poly r = a;
  for (auto& m : r) m.coeff *= c;
  return r;
}

Monomial Workspace::mono_mul(const Monomial& a, const Monomial& b) {
  Monomial r;
  r.coeff = a.coeff * b.coeff;
  r.powers.reserve(a.powers.size() + b.powers.size());
  std::size_t i = 0, j = 0;
  while (i < a.powers.size() || j < b.powers.size()) {
    if (i == a.powers.size()) {
      r.powers.push_back(b.powers[j++]);
    } else if (j == b.powers.size()) {
      r.powers.push_back(a.powers[i++]);
    } else {
      const std::string& ka = atoms_[a.powers[i].first].key;
      const std::string& kb = atoms_[b.powers[j].first].key;
      if (ka == kb) {
        ExponentValue e = a.powers[i].second + b.powers[j].second;
        if (!e.is_zero()) r.powers.emplace_back(a.powers[i].first, e);
        ++i;
        ++j;
      } else if (ka < kb) {
        r.powers.push_back(a.powers[i++]);
      } else {
        r.powers.push_back(b.powers[j++]);
      }
    }
  }
  if (a.exp_arg == kNoExpr) {
    r.exp_arg = b.exp_arg;
  } else if (b.exp_arg == kNoExpr) {
    r.exp_arg = a.exp_arg;
  } else {
    ExprId s = add(a.exp_arg, b.exp_arg);
    r.exp_arg = is_zero(s) ? kNoExpr : s;
  }
  return r;
}

Poly Workspace::poly_mul(const Poly& a, const Poly& b) const {
  // mono_mul may intern exp-argument sums, so cast away constness through a
  // mutable alias; the recursive mutex makes this safe.
  Workspace* self = const_cast<Workspace*>(this);
  Poly r;
  r.reserve(a.size() * b.size());
  for (const auto& ma : a)
    for (const auto& mb : b) r.push_back(self->mono_mul(ma, mb));
  poly_normalize(r);
  return r;
}

bool Workspace::exact_divide(const Poly& num, const Poly& den, Poly* quot) {
  if (den.empty()) return false;
  if (num.empty()) {
    quot->clear();
    return true;
  }
  Poly rem = num;
  Poly q;
  const Monomial& dlead = den.front();
  std::size_t cap = 8 * (num.size() + 2);
  while (!rem.empty()) {
    if (q.size() > cap) return false;
    const Monomial& rlead = rem.front();
    // quotient monomial = rlead / dlead
    Monomial qm;
    qm.coeff = rlead.coeff / dlead.coeff;
    {
      // divide powers: subtract exponents
      std::size_t i = 0, j = 0;
      while (i < rlead.powers.size() || j < dlead.powers.size()) {
        if (i == rlead.powers.size()) {
          qm.powers.emplace_back(dlead.powers[j].first,
                                 -dlead.powers[j].second);
          ++j;
        } else if (j == dlead.powers.size()) {
          qm.powers.push_back(rlead.powers[i]);
          ++i;
        } else {
          const std::string& ka = atoms_[rlead.powers[i].first].key;
          const std::string& kb = atoms_[dlead.powers[j].first].key;
          if (ka == kb) {
            ExponentValue e = rlead.powers[i].second - dlead.powers[j].second;
            if (!e.is_zero())
              qm.powers.emplace_back(rlead.powers[i].first, e);
            ++i;
            ++j;
          } else if (ka < kb) {
            qm.powers.push_back(rlead.powers[i]);
            ++i;
          } else {
            qm.powers.emplace_back(dlead.powers[j].first,
                                   -dlead.powers[j].second);
            ++j;
          }
        }
      }
    }
    if (rlead.exp_arg == dlead.exp_arg) {
      qm.exp_arg = kNoExpr;
    } else if (dlead.exp_arg == kNoExpr) {
      qm.exp_arg = rlead.exp_arg;
    } else {
      ExprId s = sub(rlead.exp_arg == kNoExpr ? zero_ : rlead.exp_arg,
                     dlead.exp_arg);
      qm.exp_arg = is_zero(s) ? kNoExpr : s;
    }
    Poly prod = poly_mul({qm}, den);
    Poly next = poly_add(rem, poly_neg(prod));
    if (!next.empty() && mono_cmp(next.front(), rem.front()) >= 0)
      return false;  // no strict progress: give up (opportunistic division)
    q.push_back(std::move(qm));
    rem = std::move(next);
  }
  poly_normalize(q);
  *quot = std::move(q);
  return true;
}

void Workspace::normalize_den(Poly& num, std::vector<DenFactor>& den) {
  if (num.empty()) {
    den.clear();
    return;
  }
  std::vector<DenFactor> kept;
  for (auto& f : den) {
    if (f.mult == 0 || f.base.empty()) {
      if (f.base.empty()) throw DomainError("division by zero expression");
      continue;
    }
    // Fold single-monomial factors into the numerator as inverse powers.
    if (f.base.size() == 1) {
      Monomial inv;
      const Monomial& m = f.base.front();
      inv.coeff = Rational(1) / rational_pow(m.coeff, f.mult);
      for (const auto& [a, e] : m.powers)
        inv.powers.emplace_back(a, e * ExponentValue(-f.mult));
      if (m.exp_arg != kNoExpr) {
        ExprId s = mul(integer(-f.mult), m.exp_arg);
        inv.exp_arg = is_zero(s) ? kNoExpr : s;
      }
      num = poly_mul(num, {inv});
      continue;
    }
    // Extract monomial content so the factor is monic and content-free;
    // fold content^(-mult) into the numerator.
    Monomial content = WorkspaceOps::extract_content(*this, f.base);
    if (content.coeff != 1 || !content.powers.empty()) {
      Monomial inv_num;
      inv_num.coeff = Rational(1) / rational_pow(content.coeff, f.mult);
      for (const auto& [a, e] : content.powers)
        inv_num.powers.emplace_back(a, e * ExponentValue(-f.mult));
      num = poly_mul(num, {inv_num});
    }
    kept.push_back(std::move(f));
  }
  // Merge identical factors.
  std::sort(kept.begin(), kept.end(),
            [this](const DenFactor& a, const DenFactor& b) {
              return serialize_poly(a.base) < serialize_poly(b.base);
            });
  std::vector<DenFactor> merged;
  for (auto& f : kept) {
    if (!merged.empty() &&
        serialize_poly(merged.back().base) == serialize_poly(f.base)) {
      merged.back().mult += f.mult;
    } else {
      merged.push_back(std::move(f));
    }
  }
  // Opportunistic cancellation against the numerator.
  std::vector<DenFactor> result;
  for (auto& f : merged) {
    while (f.mult > 0) {
      Poly quot;
      if (!exact_divide(num, f.base, &quot)) break;
      num = std::move(quot);
      --f.mult;
    }
    if (f.mult > 0) result.push_back(std::move(f));
    if (num.empty()) break;
  }
  if (num.empty()) {
    den.clear();
    return;
  }
  den = std::move(result);
}

int Workspace::den_multiplicity(ExprId e, ExprId factor) const {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  const NormalExpr& nf = node(factor);
  if (!nf.den.empty())
    throw DomainError("den_multiplicity: factor must be denominator-free");
  if (nf.num.size() <= 1) return 0;  // monomials never appear as den factors
  // Stored factors are monic and content-free; normalize the probe the
  // same way before comparing.
  Poly probe = nf.num;
  Workspace& self = const_cast<Workspace&>(*this);
  (void)WorkspaceOps::extract_content(self, probe);
  std::string key = serialize_poly(probe);
  for (const auto& f : node(e).den)
    if (serialize_poly(f.base) == key) return f.mult;
  return 0;
}

// --- arithmetic ------------------------------------------------------------

ExprId Workspace::add(ExprId a, ExprId b) {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  if (is_zero(a)) return b;
  if (is_zero(b)) return a;
  const NormalExpr na = node(a);
  const NormalExpr nb = node(b);
  // Common denominator: per factor, the max multiplicity of the two sides.
  std::vector<DenFactor> denu;
  auto key_of = [this](const DenFactor& f) { return serialize_poly(f.base); };
  std::map<std::string, std::pair<int, int>> mults;  // key -> (ma, mb)
  std::map<std::string, Poly> bases;
  for (const auto& f : na.den) {
    std::string k = key_of(f);
    mults[k].first += f.mult;
    bases.emplace(k, f.base);
  }
  for (const auto& f : nb.den) {
    std::string k = key_of(f);
    mults[k].second += f.mult;
    bases.emplace(k, f.base);
  }
  Poly numa = na.num;
  Poly numb = nb.num;
  for (const auto& [k, mm] : mults) {
    int m = std::max(mm.first, mm.second);
    denu.push_back(DenFactor{bases.at(k), m});
    if (m > mm.first)
      numa = poly_mul(numa, WorkspaceOps::pow_int(*this, bases.at(k),
                                                  m - mm.first));
    if (m > mm.second)
      numb = poly_mul(numb, WorkspaceOps::pow_int(*this, bases.at(k),
                                                  m - mm.second));
  }
  return make_expr(poly_add(numa, numb), std::move(denu));
}

ExprId Workspace::add(std::span<const ExprId> terms) {
  ExprId acc = zero_;
  for (ExprId t : terms) acc = add(acc, t);
  return acc;
}

ExprId Workspace::sub(ExprId a, ExprId b) { return add(a, neg(b)); }

ExprId Workspace::neg(ExprId a) {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  if (is_zero(a)) return a;
  const NormalExpr& n = node(a);
  NormalExpr r;
  r.num = poly_neg(n.num);
  r.den = n.den;
  return intern(std::move(r));
}

ExprId Workspace::mul(ExprId a, ExprId b) {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  if (is_zero(a) || is_zero(b)) return zero_;
  if (is_one(a)) return b;
  if (is_one(b)) return a;
  const NormalExpr na = node(a);
  const NormalExpr nb = node(b);
  Poly num = poly_mul(na.num, nb.num);
  std::vector<DenFactor> den = na.den;
  den.insert(den.end(), nb.den.begin(), nb.den.end());
  return make_expr(std::move(num), std::move(den));
}

ExprId Workspace::mul(std::span<const ExprId> factors) {
  ExprId acc = one_;
  for (ExprId f : factors) acc = mul(acc, f);
  return acc;
}

ExprId Workspace::div(ExprId a, ExprId b) {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  if (is_zero(b)) throw DomainError("division by zero expression");
  if (is_zero(a)) return zero_;
  if (is_one(b)) return a;
  const NormalExpr nb = node(b);
  // inverse of b: product of b's den factors over b's num.
  Poly num{Monomial{}};
  for (const auto& f : nb.den)
    num = poly_mul(num, WorkspaceOps::pow_int(*this, f.base, f.mult));
  std::vector<DenFactor> den;
  den.push_back(DenFactor{nb.num, 1});
  ExprId binv = make_expr(std::move(num), std::move(den));
  return mul(a, binv);
}

ExprId Workspace::pow(ExprId a, long long k) {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  if (k == 0) return one_;
  if (k == 1) return a;
  if (is_zero(a)) {
    if (k < 0) throw DomainError("zero raised to a negative power");
    return zero_;
  }
  if (k < 0) return pow(div(one_, a), -k);
  ExprId acc = one_;
  ExprId base = a;
  unsigned long long e = static_cast<unsigned long long>(k);
  while (e > 0) {
    if (e & 1ULL) acc = mul(acc, base);
    base = (e >>= 1ULL) ? mul(base, base) : base;
  }
  return acc;
}

ExprId Workspace::mono_pow(const Monomial& m, const ExponentValue& e) {
  // (c · ∏A^g · exp(G))^e = c^e · ∏A^(g·e) · exp(e·G)
  Monomial r;
  r.coeff = Rational(1);
  ExprId extra = one_;
  if (m.coeff != 1) {
    long long k;
    if (e.is_integer_constant(&k)) {
      r.coeff = rational_pow(m.coeff, k);
    } else if (m.coeff > 0) {
      // c^e for positive rational c: keep as a wrapped power.
      AtomData a;
      a.kind = AtomKind::PowWrap;
      a.args = {constant(m.coeff)};
      a.key = "W|" + std::to_string(a.args[0]);
      Monomial wm;
      wm.powers.emplace_back(intern_atom(std::move(a)), e);
      extra = from_monomial(std::move(wm));
    } else {
      throw DomainError(
          "negative constant raised to a symbolic power: " + m.coeff.str());
    }
  }
  for (const auto& [a, g] : m.powers) {
    ExponentValue ge = g * e;
    if (!ge.is_zero()) r.powers.emplace_back(a, ge);
  }
  if (m.exp_arg != kNoExpr) {
    ExprId s = mul(exponent_to_expr(e), m.exp_arg);
    r.exp_arg = is_zero(s) ? kNoExpr : s;
  }
  return mul(from_monomial(std::move(r)), extra);
}

ExprId Workspace::pow(ExprId a, const ExponentValue& e) {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  long long k;
  if (e.is_integer_constant(&k) && std::llabs(k) <= 16) return pow(a, k);
  if (e.is_zero()) return one_;
  if (is_zero(a)) {
    if (e.sign_at_infinity() > 0) return zero_;
    throw DomainError("zero raised to a non-positive symbolic power");
  }
  if (is_one(a)) return one_;
  const NormalExpr n = node(a);
  ExprId acc = one_;
  // Denominator factors become wrapped powers with negated exponent.
  for (const auto& f : n.den) {
    ExprId base = poly_to_expr(f.base);
    acc = mul(acc, pow(base, e * ExponentValue(-f.mult)));
  }
  if (n.num.size() == 1) {
    return mul(acc, mono_pow(n.num.front(), e));
  }
  // Multi-term base: extract monomial content, then wrap the monic rest.
  Poly base_poly = n.num;
  Monomial content = WorkspaceOps::extract_content(*this, base_poly);
  ExprId cpart = mono_pow(content, e);
  ExprId base = poly_to_expr(base_poly);
  AtomData w;
  w.kind = AtomKind::PowWrap;
  w.args = {base};
  w.key = "W|" + std::to_string(base);
  Monomial m;
  m.powers.emplace_back(intern_atom(std::move(w)), e);
  return mul(acc, mul(cpart, from_monomial(std::move(m))));
}

ExprId Workspace::exp_of(ExprId a) {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  if (is_zero(a)) return one_;
  Monomial m;
  m.exp_arg = a;
  return from_monomial(std::move(m));
}

ExprId Workspace::abs_of(ExprId a) {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  if (is_zero(a)) return a;
  if (is_positive(a)) return a;
  ExprId na = neg(a);
  if (is_positive(na)) return na;
  throw DomainError(
      "cannot resolve abs(...) under the positivity registry: " + render(a));
}

ExprId Workspace::integral(ExprId integrand, const std::string& v) {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  if (is_zero(integrand)) return zero_;
  if (!is_known_var(v))
    throw Error("integration variable is not a base variable: " + v);
  AtomData a;
  a.kind = AtomKind::Integral;
  a.args = {integrand};
  a.ivar = v;
  a.key = "N." + v + "|" + std::to_string(integrand);
  Monomial m;
  m.powers.emplace_back(intern_atom(std::move(a)), ExponentValue(1));
  return from_monomial(std::move(m));
}

ExprId Workspace::exponent_to_expr(const ExponentValue& e) {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  ExprId nexp = param("n");
  ExprId mexp = param("m");
  auto upoly_expr = [&](const UniPoly& p) {
    ExprId acc = zero_;
    for (std::size_t i = 0; i < p.size(); ++i)
      acc = add(acc, mul(constant(p[i]), pow(nexp, static_cast<long long>(i))));
    return acc;
  };
  ExprId num = add(upoly_expr(e.mfree_part()),
                   mul(mexp, upoly_expr(e.m_part())));
  ExprId den = upoly_expr(e.den_part());
  return div(num, den);
}

std::optional<ExponentValue> Workspace::expr_to_exponent(ExprId e) const {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  const NormalExpr& x = node(e);
  AtomId an = params_.count("n") ? params_.at("n") : kNoExpr;
  AtomId am = params_.count("m") ? params_.at("m") : kNoExpr;
  auto poly_to_upoly = [&](const Poly& p, UniPoly* a,
                           UniPoly* b) -> bool {  // a + b*m
    for (const auto& mo : p) {
      if (mo.exp_arg != kNoExpr) return false;
      long long ndeg = 0, mdeg = 0;
      for (const auto& [atom_id, ev] : mo.powers) {
        long long k;
        if (!ev.is_integer_constant(&k) || k < 0) return false;
        if (atom_id == an) {
          ndeg = k;
        } else if (atom_id == am) {
          mdeg = k;
        } else {
          return false;
        }
      }
      if (mdeg > 1) return false;
      UniPoly* target = mdeg == 1 ? b : a;
      if (static_cast<long long>(target->size()) <= ndeg)
        target->resize(ndeg + 1, Rational(0));
      (*target)[ndeg] += mo.coeff;
    }
    upoly_trim(*a);
    upoly_trim(*b);
    return true;
  };
  UniPoly a, b;
  if (!poly_to_upoly(x.num, &a, &b)) return std::nullopt;
  UniPoly q = upoly_const(Rational(1));
  for (const auto& f : x.den) {
    UniPoly fa, fb;
    if (!poly_to_upoly(f.base, &fa, &fb)) return std::nullopt;
    if (!fb.empty()) return std::nullopt;  // m in a denominator
    for (int i = 0; i < f.mult; ++i) q = upoly_mul(q, fa);
  }
  try {
    return ExponentValue::make(std::move(a), std::move(b), std::move(q));
  } catch (const Error&) {
    return std::nullopt;
  }
}

// --- queries -----------------------------------------------------------------

bool Workspace::is_rational_constant(ExprId e, Rational* out) const {
  const NormalExpr& n = node(e);
  if (!n.den.empty()) return false;
  if (n.num.empty()) {
    if (out) *out = Rational(0);
    return true;
  }
  if (n.num.size() != 1) return false;
  const Monomial& m = n.num.front();
  if (!m.powers.empty() || m.exp_arg != kNoExpr) return false;
  if (out) *out = m.coeff;
  return true;
}

bool Workspace::atom_depends(AtomId a, AtomId v) const {
  if (a == v) return true;
  const AtomData& d = atoms_[a];
  switch (d.kind) {
    case AtomKind::Var:
    case AtomKind::Param:
    case AtomKind::Jet:
      return false;
    case AtomKind::Func:
    case AtomKind::PowWrap:
      for (ExprId arg : d.args)
        if (depends_on(arg, v)) return true;
      return false;
    case AtomKind::Integral: {
      const AtomData& va = atoms_[v];
      if (va.kind == AtomKind::Var && va.name == d.ivar) return true;
      return depends_on(d.args[0], v);
    }
  }
  return false;
}

bool Workspace::depends_on(ExprId e, AtomId v) const {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  std::uint64_t key = pack2(e, v);
  auto it = depends_cache_.find(key);
  if (it != depends_cache_.end()) return it->second;
  bool dep = false;
  const NormalExpr& n = node(e);
  auto scan_poly = [&](const Poly& p) {
    for (const auto& m : p) {
      for (const auto& [a, ev] : m.powers) {
        (void)ev;
        if (atom_depends(a, v)) return true;
      }
      if (m.exp_arg != kNoExpr && depends_on(m.exp_arg, v)) return true;
    }
    return false;
  };
  dep = scan_poly(n.num);
  for (const auto& f : n.den)
    if (!dep) dep = scan_poly(f.base);
  depends_cache_.emplace(key, dep);
  return dep;
}

bool Workspace::depends_on_var(ExprId e, const std::string& var_name) const {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  auto it = vars_.find(var_name);
  if (it == vars_.end()) return false;
  return depends_on(e, it->second);
}

std::set<AtomId> Workspace::atoms_of(ExprId e) const {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  std::set<AtomId> out;
  std::set<ExprId> seen;
  std::function<void(ExprId)> walk_expr = [&](ExprId id) {
    if (!seen.insert(id).second) return;
    const NormalExpr& n = node(id);
    auto walk_poly = [&](const Poly& p) {
      for (const auto& m : p) {
        for (const auto& [a, ev] : m.powers) {
          (void)ev;
          if (out.insert(a).second) {
            const AtomData& d = atoms_[a];
            for (ExprId arg : d.args) walk_expr(arg);
          }
        }
        if (m.exp_arg != kNoExpr) walk_expr(m.exp_arg);
      }
    };
    walk_poly(n.num);
    for (const auto& f : n.den) walk_poly(f.base);
  };
  walk_expr(e);
  return out;
}

bool Workspace::atom_positive(AtomId a) const {
  if (positive_atoms_.count(a)) return true;
  const AtomData& d = atoms_[a];
  switch (d.kind) {
    case AtomKind::Func: {
      auto it = funcs_.find(d.name);
      return it != funcs_.end() && it->second.positive;
    }
    case AtomKind::PowWrap:
      return is_positive(d.args[0]);
    default:
      return false;
  }
}

bool Workspace::mono_positive(const Monomial& m) const {
  if (m.coeff <= 0) return false;
  for (const auto& [a, e] : m.powers) {
    (void)e;
    if (!atom_positive(a)) return false;
  }
  return true;  // exp(...) is always positive
}

bool Workspace::poly_positive(const Poly& p) const {
  if (p.empty()) return false;
  for (const auto& m : p)
    if (!mono_positive(m)) return false;
  return true;
}

bool Workspace::is_positive(ExprId e) const {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  const NormalExpr& n = node(e);
  if (!poly_positive(n.num)) return false;
  for (const auto& f : n.den)
    if (!poly_positive(f.base)) return false;
  return true;
}

// --- numeric evaluation ------------------------------------------------------

namespace {

double safe_pow(double base, double e, const char* what) {
  if (base == 0.0) {
    if (e > 0.0) return 0.0;
    if (e == 0.0) return 1.0;
    throw DomainError(std::string("zero base raised to a negative power in ") +
                      what);
  }
  if (base < 0.0) {
    double k = std::nearbyint(e);
    if (std::abs(e - k) < 1e-9) return std::pow(base, k);
    throw DomainError(
        std::string("negative base raised to a fractional power in ") + what);
  }
  return std::pow(base, e);
}

}  // namespace

double Workspace::eval_mono(const Monomial& m, const EvalContext& ctx,
                            std::unordered_map<ExprId, double>& memo) const {
  double val = to_double(m.coeff);
  auto exponent_value = [&](const ExponentValue& e) -> double {
    if (e.is_constant()) return to_double(e.constant_value());
    double nv = 0.0, mv = 0.0;
    bool need_n = upoly_degree(e.mfree_part()) >= 1 ||
                  !upoly_is_zero(e.m_part()) ||
                  upoly_degree(e.den_part()) >= 1;
    bool need_m = !upoly_is_zero(e.m_part());
    if (need_n) {
      auto it = params_.find("n");
      auto vt = it == params_.end() ? ctx.values.end()
                                    : ctx.values.find(it->second);
      if (it == params_.end() || vt == ctx.values.end())
        throw UnknownSymbolError(
            "parameter n is unbound but appears in an exponent");
      nv = vt->second;
    }
    if (need_m) {
      auto it = params_.find("m");
      auto vt = it == params_.end() ? ctx.values.end()
                                    : ctx.values.find(it->second);
      if (it == params_.end() || vt == ctx.values.end())
        throw UnknownSymbolError(
            "parameter m is unbound but appears in an exponent");
      mv = vt->second;
    }
    return e.eval(nv, mv);
  };
  for (const auto& [a, e] : m.powers) {
    const AtomData& d = atoms_[a];
    double base = 0.0;
    switch (d.kind) {
      case AtomKind::Var:
      case AtomKind::Param:
      case AtomKind::Jet: {
        auto it = ctx.values.find(a);
        if (it == ctx.values.end())
          throw UnknownSymbolError("unbound symbol: " + render_atom(a));
        base = it->second;
        break;
      }
      case AtomKind::Func: {
        auto it = ctx.funcs.find(d.name);
        if (it == ctx.funcs.end())
          throw UnknownSymbolError("no numeric backend for function symbol: " +
                                   d.name);
        std::vector<double> argv;
        argv.reserve(d.args.size());
        for (ExprId arg : d.args) argv.push_back(eval_rec(arg, ctx, memo));
        base = it->second(argv, d.deriv);
        break;
      }
      case AtomKind::Integral: {
        if (!ctx.integral)
          throw Error("no integral evaluator supplied for " + render_atom(a));
        auto vit = vars_.find(d.ivar);
        auto ut = vit == vars_.end() ? ctx.values.end()
                                     : ctx.values.find(vit->second);
        if (vit == vars_.end() || ut == ctx.values.end())
          throw UnknownSymbolError("unbound integration endpoint: " + d.ivar);
        base = ctx.integral(d.args[0], d.ivar, ut->second, ctx);
        break;
      }
      case AtomKind::PowWrap:
        base = eval_rec(d.args[0], ctx, memo);
        break;
    }
    val *= safe_pow(base, exponent_value(e), atoms_[a].key.c_str());
  }
  if (m.exp_arg != kNoExpr) val *= std::exp(eval_rec(m.exp_arg, ctx, memo));
  return val;
}

double Workspace::eval_poly(const Poly& p, const EvalContext& ctx,
                            std::unordered_map<ExprId, double>& memo) const {
  double s = 0.0;
  for (const auto& m : p) s += eval_mono(m, ctx, memo);
  return s;
}

double Workspace::eval_rec(ExprId e, const EvalContext& ctx,
                           std::unordered_map<ExprId, double>& memo) const {
  auto it = memo.find(e);
  if (it != memo.end()) return it->second;
  const NormalExpr& n = node(e);
  double val = eval_poly(n.num, ctx, memo);
  for (const auto& f : n.den) {
    double fv = eval_poly(f.base, ctx, memo);
    if (fv == 0.0)
      throw DomainError("denominator vanishes at the evaluation point: " +
                        render(e));
    for (int i = 0; i < f.mult; ++i) val /= fv;
  }
  memo.emplace(e, val);
  return val;
}

double Workspace::eval(ExprId e, const EvalContext& ctx) const {
  std::unordered_map<ExprId, double> memo;
  return eval_rec(e, ctx, memo);
}

std::optional<Rational> Workspace::reval_rec(
    ExprId e, const RationalEvalContext& ctx,
    std::unordered_map<ExprId, std::optional<Rational>>& memo) const {
  auto it = memo.find(e);
  if (it != memo.end()) return it->second;
  auto fail = [&]() -> std::optional<Rational> {
    memo.emplace(e, std::nullopt);
    return std::nullopt;
  };
  auto exponent_int = [&](const ExponentValue& ev,
                          long long* out) -> bool {
    if (ev.is_integer_constant(out)) return true;
    auto nit = params_.find("n");
    auto mit = params_.find("m");
    Rational nv(0), mv(0);
    bool have_n = false, have_m = false;
    if (nit != params_.end()) {
      auto vt = ctx.values.find(nit->second);
      if (vt != ctx.values.end()) {
        nv = vt->second;
        have_n = true;
      }
    }
    if (mit != params_.end()) {
      auto vt = ctx.values.find(mit->second);
      if (vt != ctx.values.end()) {
        mv = vt->second;
        have_m = true;
      }
    }
    bool need_n = upoly_degree(ev.mfree_part()) >= 1 ||
                  !upoly_is_zero(ev.m_part()) ||
                  upoly_degree(ev.den_part()) >= 1;
    bool need_m = !upoly_is_zero(ev.m_part());
    if ((need_n && !have_n) || (need_m && !have_m)) return false;
    Rational v;
    try {
      v = ev.eval(nv, mv);
    } catch (const DomainError&) {
      return false;
    }
    if (!is_integer(v)) return false;
    *out = to_long(v);
    return true;
  };
  auto eval_mono_r = [&](const Monomial& m) -> std::optional<Rational> {
    Rational val = m.coeff;
    for (const auto& [a, ev] : m.powers) {
      long long k;
      if (!exponent_int(ev, &k)) return std::nullopt;
      const AtomData& d = atoms_[a];
      Rational base;
      switch (d.kind) {
        case AtomKind::Var:
        case AtomKind::Param:
        case AtomKind::Jet: {
          auto vt = ctx.values.find(a);
          if (vt == ctx.values.end()) return std::nullopt;
          base = vt->second;
          break;
        }
        case AtomKind::Func: {
          auto ft = ctx.funcs.find(d.name);
          if (ft == ctx.funcs.end()) return std::nullopt;
          std::vector<Rational> argv;
          for (ExprId arg : d.args) {
            auto av = reval_rec(arg, ctx, memo);
            if (!av) return std::nullopt;
            argv.push_back(*av);
          }
          auto fv = ft->second(argv, d.deriv);
          if (!fv) return std::nullopt;
          base = *fv;
          break;
        }
        case AtomKind::Integral:
          return std::nullopt;
        case AtomKind::PowWrap: {
          auto bv = reval_rec(d.args[0], ctx, memo);
          if (!bv) return std::nullopt;
          base = *bv;
          break;
        }
      }
      if (base == 0 && k < 0) return std::nullopt;
      val *= rational_pow(base, k);
    }
    if (m.exp_arg != kNoExpr) {
      auto av = reval_rec(m.exp_arg, ctx, memo);
      if (!av || *av != 0) return std::nullopt;  // exp(0) = 1 only
    }
    return val;
  };
  const NormalExpr& n = node(e);
  Rational val(0);
  for (const auto& m : n.num) {
    auto mv = eval_mono_r(m);
    if (!mv) return fail();
    val += *mv;
  }
  for (const auto& f : n.den) {
    Rational fv(0);
    for (const auto& m : f.base) {
      auto mv = eval_mono_r(m);
      if (!mv) return fail();
      fv += *mv;
    }
    if (fv == 0) return fail();
    for (int i = 0; i < f.mult; ++i) val /= fv;
  }
  memo.emplace(e, val);
  return val;
}

std::optional<Rational> Workspace::eval_rational(
    ExprId e, const RationalEvalContext& ctx) const {
  std::unordered_map<ExprId, std::optional<Rational>> memo;
  return reval_rec(e, ctx, memo);
}

}  // namespace redop
