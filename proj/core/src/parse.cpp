#include <cctype>
#include <string>
#include <vector>

#include "redop/expr.hpp"

namespace redop {

// --- rendering ---------------------------------------------------------------

namespace {

bool exponent_is_small_nonneg_int(const ExponentValue& e, long long* k) {
  return e.is_integer_constant(k) && *k >= 0;
}

}  // namespace

std::string Workspace::render_atom(AtomId a) const {
  const AtomData& d = atoms_[a];
  switch (d.kind) {
    case AtomKind::Var:
    case AtomKind::Param:
      return d.name;
    case AtomKind::Jet: {
      std::string out = "u_";
      out.append(static_cast<std::size_t>(d.jt), 't');
      out.append(static_cast<std::size_t>(d.jx), 'x');
      return out;
    }
    case AtomKind::Func: {
      std::string out = d.name;
      bool any_deriv = false;
      for (int k : d.deriv) any_deriv = any_deriv || k > 0;
      const FuncInfo& info = funcs_.at(d.name);
      if (any_deriv) {
        out += '_';
        for (std::size_t i = 0; i < d.deriv.size(); ++i)
          out.append(static_cast<std::size_t>(d.deriv[i]), info.sig[i][0]);
      }
      bool identity = true;
      for (std::size_t i = 0; i < d.args.size(); ++i) {
        const NormalExpr& an = node(d.args[i]);
        bool is_var = an.den.empty() && an.num.size() == 1 &&
                      an.num[0].coeff == 1 && an.num[0].exp_arg == kNoExpr &&
                      an.num[0].powers.size() == 1 &&
                      atoms_[an.num[0].powers[0].first].kind ==
                          AtomKind::Var &&
                      atoms_[an.num[0].powers[0].first].name == info.sig[i] &&
                      an.num[0].powers[0].second == ExponentValue(1);
        if (!is_var) identity = false;
      }
      if (!identity) {
        out += '(';
        for (std::size_t i = 0; i < d.args.size(); ++i) {
          if (i) out += ", ";
          out += render(d.args[i]);
        }
        out += ')';
      }
      return out;
    }
    case AtomKind::Integral:
      return "Int(" + render(d.args[0]) + ", " + d.ivar + ")";
    case AtomKind::PowWrap:
      return "(" + render(d.args[0]) + ")";
  }
  return "?";
}

std::string Workspace::render_mono(const Monomial& m, bool* negated) const {
  *negated = m.coeff < 0;
  Rational c = *negated ? Rational(-m.coeff) : m.coeff;
  std::vector<std::string> pieces;
  if (c != 1 || (m.powers.empty() && m.exp_arg == kNoExpr))
    pieces.push_back(c.str());
  for (const auto& [a, g] : m.powers) {
    std::string base = render_atom(a);
    long long k = 0;
    if (g == ExponentValue(1)) {
      pieces.push_back(base);
    } else if (exponent_is_small_nonneg_int(g, &k)) {
      pieces.push_back(base + "^" + std::to_string(k));
    } else {
      pieces.push_back(base + "^(" + g.to_string() + ")");
    }
  }
  if (m.exp_arg != kNoExpr) pieces.push_back("exp(" + render(m.exp_arg) + ")");
  std::string out;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    if (i) out += '*';
    out += pieces[i];
  }
  return out;
}

std::string Workspace::render_poly(const Poly& p) const {
  if (p.empty()) return "0";
  std::string out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    bool neg = false;
    std::string s = render_mono(p[i], &neg);
    if (i == 0) {
      out = neg ? "-" + s : s;
    } else {
      out += neg ? " - " : " + ";
      out += s;
    }
  }
  return out;
}

std::string Workspace::render(ExprId e) const {
  const NormalExpr& n = node(e);
  std::string num = render_poly(n.num);
  if (n.den.empty()) return num;
  // Emit denominator factors in forms that reparse to the same factor
  // structure: "/(F)" for multiplicity one, "*(F)^(-m)" otherwise (a
  // positive power after '/' would be expanded on reparse).
  std::string out = n.num.size() > 1 ? "(" + num + ")" : num;
  bool bare_one = (out == "1");
  bool bare_neg_one = (out == "-1");
  bool first = true;
  for (const auto& f : n.den) {
    std::string base = "(" + render_poly(f.base) + ")";
    if (f.mult == 1) {
      out += "/" + base;
      first = false;
    } else {
      std::string piece = base + "^(-" + std::to_string(f.mult) + ")";
      if (first && bare_one) {
        out = piece;
      } else if (first && bare_neg_one) {
        out = "-" + piece;
      } else {
        out += "*" + piece;
      }
      first = false;
    }
  }
  return out;
}

// --- parsing -------------------------------------------------------------------

namespace {

enum class Tok : std::uint8_t {
  End,
  Number,
  Ident,
  Plus,
  Minus,
  Star,
  Slash,
  Caret,
  LParen,
  RParen,
  Comma,
};

struct Token {
  Tok kind = Tok::End;
  std::string text;
  Rational value;
  std::size_t pos = 0;
};

class Lexer {
 public:
  explicit Lexer(const std::string& src) : src_(src) { advance(); }

  const Token& cur() const { return cur_; }

  void advance() {
    while (i_ < src_.size() &&
           std::isspace(static_cast<unsigned char>(src_[i_])))
      ++i_;
    cur_ = Token{};
    cur_.pos = i_;
    if (i_ >= src_.size()) {
      cur_.kind = Tok::End;
      return;
    }
    char c = src_[i_];
    switch (c) {
      case '+': cur_.kind = Tok::Plus; ++i_; return;
      case '-': cur_.kind = Tok::Minus; ++i_; return;
      case '*': cur_.kind = Tok::Star; ++i_; return;
      case '/': cur_.kind = Tok::Slash; ++i_; return;
      case '^': cur_.kind = Tok::Caret; ++i_; return;
      case '(': cur_.kind = Tok::LParen; ++i_; return;
      case ')': cur_.kind = Tok::RParen; ++i_; return;
      case ',': cur_.kind = Tok::Comma; ++i_; return;
      default: break;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      // Accumulate digits explicitly: string-constructed big integers treat a
      // leading zero as a base prefix, which a decimal literal must not.
      Integer num = 0;
      while (i_ < src_.size() &&
             std::isdigit(static_cast<unsigned char>(src_[i_]))) {
        num = num * 10 + (src_[i_] - '0');
        ++i_;
      }
      if (i_ < src_.size() && src_[i_] == '.') {
        ++i_;
        std::size_t fstart = i_;
        Integer den = 1;
        while (i_ < src_.size() &&
               std::isdigit(static_cast<unsigned char>(src_[i_]))) {
          num = num * 10 + (src_[i_] - '0');
          den *= 10;
          ++i_;
        }
        if (i_ == fstart)
          throw SyntaxError("expected digits after decimal point", fstart);
        cur_.value = Rational(num, den);
      } else {
        cur_.value = Rational(num);
      }
      cur_.kind = Tok::Number;
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t start = i_;
      while (i_ < src_.size() &&
             std::isalnum(static_cast<unsigned char>(src_[i_])))
        ++i_;
      if (i_ < src_.size() && src_[i_] == '_') {
        ++i_;
        std::size_t sstart = i_;
        while (i_ < src_.size() &&
               std::isalnum(static_cast<unsigned char>(src_[i_])))
          ++i_;
        if (i_ == sstart)
          throw SyntaxError("expected a derivative suffix after '_'", sstart);
      }
      cur_.kind = Tok::Ident;
      cur_.text = src_.substr(start, i_ - start);
      return;
    }
    throw SyntaxError(std::string("unexpected character '") + c + "'", i_);
  }

 private:
  const std::string& src_;
  std::size_t i_ = 0;
  Token cur_;
};

}  // namespace

class Parser {
 public:
  Parser(Workspace& w, const std::string& src) : w_(w), lex_(src) {}

  ExprId run() {
    ExprId e = parse_expr();
    if (lex_.cur().kind != Tok::End)
      throw SyntaxError("unexpected trailing input", lex_.cur().pos);
    return e;
  }

 private:
  Workspace& w_;
  Lexer lex_;

  bool accept(Tok k) {
    if (lex_.cur().kind != k) return false;
    lex_.advance();
    return true;
  }

  void expect(Tok k, const char* what) {
    if (lex_.cur().kind != k)
      throw SyntaxError(std::string("expected ") + what, lex_.cur().pos);
    lex_.advance();
  }

  ExprId parse_expr() {
    ExprId e = parse_term();
    for (;;) {
      if (accept(Tok::Plus)) {
        e = w_.add(e, parse_term());
      } else if (accept(Tok::Minus)) {
        e = w_.sub(e, parse_term());
      } else {
        return e;
      }
    }
  }

  ExprId parse_term() {
    ExprId e = parse_unary();
    for (;;) {
      if (accept(Tok::Star)) {
        e = w_.mul(e, parse_unary());
      } else if (accept(Tok::Slash)) {
        std::size_t pos = lex_.cur().pos;
        ExprId d = parse_unary();
        if (w_.is_zero(d))
          throw SyntaxError("division by a zero expression", pos);
        e = w_.div(e, d);
      } else {
        return e;
      }
    }
  }

  ExprId parse_unary() {
    if (accept(Tok::Minus)) return w_.neg(parse_unary());
    if (accept(Tok::Plus)) return parse_unary();
    return parse_power();
  }

  ExprId parse_power() {
    ExprId base = parse_primary();
    if (!accept(Tok::Caret)) return base;
    std::size_t pos = lex_.cur().pos;
    ExprId ee = parse_unary();  // right-associative
    auto ev = w_.expr_to_exponent(ee);
    if (!ev)
      throw SyntaxError(
          "exponent is outside the supported module (rational in n, linear "
          "in m)",
          pos);
    return w_.pow(base, *ev);
  }

  ExprId parse_primary() {
    const Token tok = lex_.cur();
    if (tok.kind == Tok::Number) {
      lex_.advance();
      return w_.constant(tok.value);
    }
    if (tok.kind == Tok::LParen) {
      lex_.advance();
      ExprId e = parse_expr();
      expect(Tok::RParen, "')'");
      return e;
    }
    if (tok.kind != Tok::Ident)
      throw SyntaxError("expected a number, identifier, or '('", tok.pos);
    lex_.advance();
    std::string base = tok.text;
    std::string suffix;
    std::size_t underscore = base.find('_');
    if (underscore != std::string::npos) {
      suffix = base.substr(underscore + 1);
      base = base.substr(0, underscore);
    }

    if (base == "exp" || base == "abs" || base == "Int") {
      if (!suffix.empty())
        throw SyntaxError("'" + base + "' takes no derivative suffix",
                          tok.pos);
      expect(Tok::LParen, "'('");
      ExprId arg = parse_expr();
      if (base == "Int") {
        expect(Tok::Comma, "','");
        const Token vt = lex_.cur();
        if (vt.kind != Tok::Ident)
          throw SyntaxError("expected an integration variable", vt.pos);
        lex_.advance();
        expect(Tok::RParen, "')'");
        return w_.integral(arg, vt.text);
      }
      expect(Tok::RParen, "')'");
      return base == "exp" ? w_.exp_of(arg) : w_.abs_of(arg);
    }

    if (base == "u" && !suffix.empty()) {
      int jt = 0, jx = 0;
      for (char c : suffix) {
        if (c == 't') {
          ++jt;
        } else if (c == 'x') {
          ++jx;
        } else {
          throw SyntaxError(
              std::string("jet suffix may contain only 't' and 'x', got '") +
                  c + "'",
              tok.pos);
        }
      }
      return w_.jet(jt, jx);
    }

    if (w_.has_function(base)) {
      const FuncInfo info = w_.function_info(base);
      std::vector<int> deriv(info.sig.size(), 0);
      for (char c : suffix) {
        bool found = false;
        for (std::size_t i = 0; i < info.sig.size(); ++i) {
          if (info.sig[i][0] == c) {
            ++deriv[i];
            found = true;
            break;
          }
        }
        if (!found)
          throw SyntaxError("derivative suffix '" + std::string(1, c) +
                                "' does not match the signature of " + base,
                            tok.pos);
      }
      std::vector<ExprId> args;
      if (accept(Tok::LParen)) {
        if (lex_.cur().kind != Tok::RParen) {
          args.push_back(parse_expr());
          while (accept(Tok::Comma)) args.push_back(parse_expr());
        }
        expect(Tok::RParen, "')'");
        if (args.size() != info.sig.size())
          throw SyntaxError("wrong number of arguments for " + base, tok.pos);
      } else {
        for (const auto& v : info.sig) args.push_back(w_.var(v));
      }
      return w_.func(base, std::move(args), std::move(deriv));
    }

    if (!suffix.empty())
      throw UnknownSymbolError("unknown function symbol: " + base);
    if (base == "t" || base == "x" || base == "u" || base == "w")
      return w_.var(base);
    return w_.param(base);
  }
};

ExprId Workspace::parse(const std::string& source) {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  Parser p(*this, source);
  return p.run();
}

}  // namespace redop
