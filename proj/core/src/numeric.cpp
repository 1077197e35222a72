#include "redop/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

namespace redop {

namespace {

// Gauss–Kronrod 7/15 nodes and weights on [-1, 1] (symmetric about 0).
constexpr double kXgk[8] = {
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000};
constexpr double kWgk[8] = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714};
// Gauss-7 weights, matching nodes kXgk[1], [3], [5], [7].
constexpr double kWg[4] = {
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327};

struct PanelResult {
  double integral;   // Kronrod-15 estimate
  double error;      // |K15 - G7|
};

PanelResult gk15(const std::function<double(double)>& g, double a, double b) {
  const double c = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double fc = g(c);
  double resk = kWgk[7] * fc;
  double resg = kWg[3] * fc;
  for (int j = 0; j < 7; ++j) {
    double dx = half * kXgk[j];
    double f1 = g(c - dx);
    double f2 = g(c + dx);
    resk += kWgk[j] * (f1 + f2);
    if (j % 2 == 1) resg += kWg[j / 2] * (f1 + f2);
  }
  PanelResult r;
  r.integral = resk * half;
  r.error = std::abs((resk - resg) * half);
  return r;
}

}  // namespace

double quadrature(const std::function<double(double)>& g, double a, double b,
                  double tol) {
  if (a == b) return 0.0;
  if (a > b) return -quadrature(g, b, a, tol);
  const double span = b - a;
  // Depth-first interval stack, left interval processed first: the
  // subdivision order (hence the rounding pattern) is deterministic.
  struct Interval {
    double a, b;
  };
  std::vector<Interval> stack{{a, b}};
  double total = 0.0;
  int budget = 4000;
  const double min_len =
      16.0 * std::numeric_limits<double>::epsilon() *
      std::max({1.0, std::abs(a), std::abs(b)});
  while (!stack.empty()) {
    Interval iv = stack.back();
    stack.pop_back();
    if (--budget < 0)
      throw NonConvergenceError("quadrature: subdivision budget exhausted");
    PanelResult r = gk15(g, iv.a, iv.b);
    if (!std::isfinite(r.integral))
      throw NonConvergenceError("quadrature: non-finite integrand value");
    double share = tol * (iv.b - iv.a) / span;
    if (r.error <= share + tol * std::abs(r.integral)) {
      total += r.integral;
      continue;
    }
    if (iv.b - iv.a < min_len)
      throw NonConvergenceError(
          "quadrature: interval underflow (suspected singularity)");
    double mid = 0.5 * (iv.a + iv.b);
    stack.push_back({mid, iv.b});
    stack.push_back({iv.a, mid});
  }
  return total;
}

double brent_root(const std::function<double(double)>& g, double lo, double hi,
                  double tol) {
  double a = lo, b = hi;
  double fa = g(a), fb = g(b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if ((fa > 0.0) == (fb > 0.0))
    throw DomainError("brent_root: bracket does not change sign");
  double c = a, fc = fa;
  double d = b - a, e = d;
  const int kMaxIter = 200;
  for (int iter = 0; iter < kMaxIter; ++iter) {
    if ((fb > 0.0) == (fc > 0.0)) {
      c = a;
      fc = fa;
      d = e = b - a;
    }
    if (std::abs(fc) < std::abs(fb)) {
      a = b; b = c; c = a;
      fa = fb; fb = fc; fc = fa;
    }
    double tol1 =
        2.0 * std::numeric_limits<double>::epsilon() * std::abs(b) + 0.5 * tol;
    double xm = 0.5 * (c - b);
    if (std::abs(xm) <= tol1 || fb == 0.0) return b;
    if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
      double s = fb / fa, p, q;
      if (a == c) {
        p = 2.0 * xm * s;
        q = 1.0 - s;
      } else {
        double qq = fa / fc, r = fb / fc;
        p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
        q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0.0) q = -q;
      p = std::abs(p);
      if (2.0 * p < std::min(3.0 * xm * q - std::abs(tol1 * q),
                             std::abs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = xm;
        e = d;
      }
    } else {
      d = xm;
      e = d;
    }
    a = b;
    fa = fb;
    b += (std::abs(d) > tol1) ? d : (xm > 0.0 ? tol1 : -tol1);
    fb = g(b);
  }
  throw NonConvergenceError("brent_root: iteration limit reached");
}

double solve_implicit(const std::function<double(double, double)>& F,
                      double omega, double phi_lo, double phi_hi, double tol) {
  return brent_root([&](double phi) { return F(phi, omega); }, phi_lo, phi_hi,
                    tol);
}

double fd_derivative(const std::function<double(double)>& g, double x,
                     int order, double h) {
  if (!(h > 0.0)) throw DomainError("fd_derivative: nonpositive step");
  if (x + h == x || x + 2 * h == x + h)
    throw DomainError("fd_derivative: step underflow");
  double fp1 = g(x + h), fm1 = g(x - h);
  double fp2 = g(x + 2 * h), fm2 = g(x - 2 * h);
  switch (order) {
    case 1:
      return (-fp2 + 8.0 * fp1 - 8.0 * fm1 + fm2) / (12.0 * h);
    case 2: {
      double f0 = g(x);
      return (-fp2 + 16.0 * fp1 - 30.0 * f0 + 16.0 * fm1 - fm2) /
             (12.0 * h * h);
    }
    default:
      throw DomainError("fd_derivative: order must be 1 or 2");
  }
}

double halton(std::uint64_t i, unsigned base) {
  double f = 1.0, r = 0.0;
  while (i > 0) {
    f /= base;
    r += f * static_cast<double>(i % base);
    i /= base;
  }
  return r;
}

std::vector<std::vector<double>> halton_box(
    std::size_t count, const std::vector<std::pair<double, double>>& box) {
  static const unsigned kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19,
                                     23, 29, 31, 37, 41, 43, 47, 53};
  if (box.size() > std::size(kPrimes))
    throw DomainError("halton_box: too many dimensions");
  std::vector<std::vector<double>> pts;
  pts.reserve(count);
  for (std::size_t i = 1; i <= count; ++i) {
    std::vector<double> p(box.size());
    for (std::size_t k = 0; k < box.size(); ++k) {
      double s = halton(i, kPrimes[k]);
      p[k] = box[k].first + s * (box[k].second - box[k].first);
    }
    pts.push_back(std::move(p));
  }
  return pts;
}

EvalContext AntiderivativeBackend::attach(EvalContext ctx) const {
  ctx.integral = [this](ExprId integrand, const std::string& var, double upper,
                        const EvalContext& outer) {
    return evaluate(integrand, var, upper, outer);
  };
  return ctx;
}

double AntiderivativeBackend::evaluate(ExprId integrand,
                                       const std::string& var, double upper,
                                       const EvalContext& outer) const {
  const std::pair<ExprId, double> key{integrand, upper};
  {
    std::lock_guard<std::mutex> lock(cache_mu_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }
  AtomId va = w_.var_atom(var);
  double value = quadrature(
      [&](double s) {
        EvalContext inner = outer;
        inner.values[va] = s;
        return w_.eval(integrand, inner);
      },
      anchor_, upper, tol_);
  std::lock_guard<std::mutex> lock(cache_mu_);
  cache_.emplace(key, value);
  return value;
}

std::vector<double> parallel_map(std::size_t count,
                                 const std::function<double(std::size_t)>& g) {
  std::vector<double> out(count);
  if (count == 0) return out;
  std::size_t workers = std::min<std::size_t>(
      {count, std::max(1u, std::thread::hardware_concurrency()), 8});
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) out[i] = g(i);
    return out;
  }
  std::size_t chunk = (count + workers - 1) / workers;
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t t = 0; t < workers; ++t) {
    std::size_t begin = t * chunk;
    std::size_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    threads.emplace_back([&, t, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) out[i] = g(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);
  return out;
}

}  // namespace redop
