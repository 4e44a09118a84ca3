#include "svcal/bs_iv.hpp"

#include <algorithm>
#include <cmath>

namespace svcal {

double norm_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

double bs_price(double sigma, const Quote& q) {
  q.validate();
  require(sigma > 0.0, "sigma must be positive");
  const double m = q.moneyness;
  const double df = std::exp(-q.rate * q.tau);
  const double st = sigma * std::sqrt(q.tau);
  const double d1 = (std::log(m) + (q.rate + 0.5 * sigma * sigma) * q.tau) / st;
  const double d2 = d1 - st;
  const double call = m * norm_cdf(d1) - df * norm_cdf(d2);
  if (q.kind == OptionKind::Call) return call;
  return call - m + df;  // parity, exact by construction of the put formula
}

namespace {

// No-arbitrage band (open): call in (max(m - e^{-r tau}, 0), m),
// put in (max(e^{-r tau} - m, 0), e^{-r tau}).
void check_band(double price, const Quote& q) {
  const double df = std::exp(-q.rate * q.tau);
  double lo, hi;
  if (q.kind == OptionKind::Call) {
    lo = std::max(q.moneyness - df, 0.0);
    hi = q.moneyness;
  } else {
    lo = std::max(df - q.moneyness, 0.0);
    hi = df;
  }
  if (!(price > lo && price < hi)) {
    throw PricingError("no implied vol: price outside the arbitrage band");
  }
}

// Brent's method: bisection / secant / inverse quadratic hybrid.
template <typename F>
double brent(const F& f, double a, double b, double fa, double fb, double tol,
             int max_iter) {
  double c = a, fc = fa;
  double d = b - a, e = d;
  for (int iter = 0; iter < max_iter; ++iter) {
    if (std::abs(fc) < std::abs(fb)) {
      a = b; b = c; c = a;
      fa = fb; fb = fc; fc = fa;
    }
    const double tol1 = 2.0 * 2.220446049250313e-16 * std::abs(b) + 0.5 * tol;
    const double xm = 0.5 * (c - b);
    if (std::abs(xm) <= tol1 || fb == 0.0) return b;
    if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
      const double s = fb / fa;
      double p, qd;
      if (a == c) {
        p = 2.0 * xm * s;
        qd = 1.0 - s;
      } else {
        const double qq = fa / fc;
        const double rr = fb / fc;
        p = s * (2.0 * xm * qq * (qq - rr) - (b - a) * (rr - 1.0));
        qd = (qq - 1.0) * (rr - 1.0) * (s - 1.0);
      }
      if (p > 0.0) qd = -qd;
      p = std::abs(p);
      if (2.0 * p < std::min(3.0 * xm * qd - std::abs(tol1 * qd),
                             std::abs(e * qd))) {
        e = d;
        d = p / qd;
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
    fb = f(b);
    if ((fb > 0.0) == (fc > 0.0)) {
      c = a;
      fc = fa;
      d = b - a;
      e = d;
    }
  }
  return b;
}

}  // namespace

double implied_vol(double price, const Quote& q, const IvConfig& cfg) {
  cfg.validate();
  q.validate();
  check_band(price, q);
  auto f = [&](double sigma) { return bs_price(sigma, q) - price; };
  double lo = cfg.lo, hi = cfg.hi;
  double flo = f(lo), fhi = f(hi);
  if (flo * fhi > 0.0) {
    hi *= 2.0;  // one automatic widening of the bracket
    fhi = f(hi);
    if (flo * fhi > 0.0) throw PricingError("bracket failure");
  }
  return brent(f, lo, hi, flo, fhi, cfg.tol, cfg.max_iter);
}

}  // namespace svcal
