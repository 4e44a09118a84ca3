#include "svcal/cos_pricer.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <string>

#include "svcal/parallel.hpp"

namespace svcal {

namespace {

using Complex = std::complex<double>;
constexpr double kPi = std::numbers::pi;

double heston_c2(const HestonParams& p, double tau) {
  const double k = p.kappa, g = p.gamma, nb = p.nu_bar, n0 = p.nu0, rho = p.rho;
  const double kt = k * tau;
  if (kt < 1e-3) {
    // small-kappa series; the closed form cancels catastrophically here
    const double t2 = tau * tau, t3 = t2 * tau, t4 = t3 * tau, t5 = t4 * tau;
    const double g2 = g * g;
    const double k0 = n0 * tau + g2 * n0 * t3 / 12.0 - g * n0 * rho * t2 / 2.0;
    const double k1 = -g2 * n0 * t4 / 12.0 + g2 * nb * t4 / 48.0 +
                      g * n0 * rho * t3 / 3.0 - g * nb * rho * t3 / 6.0 -
                      n0 * t2 / 2.0 + nb * t2 / 2.0;
    const double k2 = 11.0 * g2 * n0 * t5 / 240.0 - g2 * nb * t5 / 60.0 -
                      g * n0 * rho * t4 / 8.0 + g * nb * rho * t4 / 12.0 +
                      n0 * t3 / 6.0 - nb * t3 / 6.0;
    return k0 + k * (k1 + k * k2);
  }
  const double e1 = std::exp(-kt);
  const double e2 = std::exp(-2.0 * kt);
  const double g2 = g * g;
  return (1.0 / (8.0 * k * k * k)) *
         (4.0 * g2 * nb * e1 + g2 * (nb - 2.0 * n0) * e2 +
          g2 * (2.0 * n0 - 5.0 * nb) +
          2.0 * g * k * (g * nb * tau - 4.0 * n0 * rho + 8.0 * nb * rho) +
          4.0 * g * k *
              (-g * n0 * tau + g * nb * tau + 2.0 * n0 * rho - 4.0 * nb * rho) *
              e1 +
          8.0 * k * k * k * nb * tau +
          8.0 * k * k * (-g * nb * rho * tau + n0 - nb) +
          8.0 * k * k *
              (g * n0 * rho * tau - g * nb * rho * tau - n0 + nb) * e1);
}

TruncationInterval interval_from_cumulants(const Cumulants& c,
                                           const CosConfig& cfg) {
  const double half =
      cfg.l_scale * std::sqrt(std::abs(c.c2) + std::sqrt(std::abs(c.c4)));
  const TruncationInterval iv{c.c1 - half, c.c1 + half};
  if (!std::isfinite(iv.a) || !std::isfinite(iv.b)) {
    throw PricingError("cumulant overflow");
  }
  return iv;
}

// chi_k and psi_k primitives on [c, d] within [a, b] (Fourier-cosine
// integrals of e^y and 1).
void chi_psi(double a, double b, double c, double d, int k, double& chi,
             double& psi) {
  if (k == 0) {
    chi = std::exp(d) - std::exp(c);
    psi = d - c;
    return;
  }
  const double u = k * kPi / (b - a);
  const double ud = u * (d - a);
  const double uc = u * (c - a);
  const double ed = std::exp(d);
  const double ec = std::exp(c);
  chi = (std::cos(ud) * ed - std::cos(uc) * ec +
         u * (std::sin(ud) * ed - std::sin(uc) * ec)) /
        (1.0 + u * u);
  psi = (std::sin(ud) - std::sin(uc)) / u;
}

// Coefficient of the put payoff (1 - e^y)^+ restricted to [lo, hi] in [a, b].
double put_coefficient(double a, double b, double lo, double hi, int k) {
  if (lo >= hi) return 0.0;
  double chi, psi;
  chi_psi(a, b, lo, hi, k, chi, psi);
  return (2.0 / (b - a)) * (psi - chi);
}

double call_coefficient(double a, double b, double lo, double hi, int k) {
  if (lo >= hi) return 0.0;
  double chi, psi;
  chi_psi(a, b, lo, hi, k, chi, psi);
  return (2.0 / (b - a)) * (chi - psi);
}

// Primed cosine sum for a put-type payoff on [a, 0] within [a, b]:
// sum_k' Re(phi(u_k) e^{-i u_k a}) H_k^put.
template <typename CharFn>
double put_series(const CharFn& phi, double a, double b, int n_terms) {
  double sum = 0.0;
  for (int k = 0; k < n_terms; ++k) {
    const double u = k * kPi / (b - a);
    const double hk = put_coefficient(a, b, a, 0.0, k);
    const Complex f = phi(u) * std::exp(Complex(0.0, -u * a));
    double term = f.real() * hk;
    if (k == 0) term *= 0.5;
    sum += term;
  }
  return sum;
}

template <typename CharFn>
double price_impl(const CharFn& model_cf, const Quote& q, const Cumulants& cum,
                  const CosConfig& cfg) {
  TruncationInterval iv = interval_from_cumulants(cum, cfg);
  iv = widen_interval(iv, cfg);
  const double x = std::log(q.moneyness);
  const double discount = std::exp(-q.rate * q.tau);
  double value;
  if (q.kind == OptionKind::Put) {
    auto phi = [&](double u) {
      return model_cf(Complex(u, 0.0)) * std::exp(Complex(0.0, u * x));
    };
    value = discount * put_series(phi, iv.a, iv.b, cfg.n_terms);
  } else {
    // Share-measure route: C = e^{-r tau} E[e^y (1 - e^{-y})^+]. With
    // w = -y under dQ~/dQ = e^y / E[e^y], this is a put-type series on
    // [-b, -a] with CF phi~(u) = phi_y(-u - i) / phi_y(-i).
    const double mart = q.moneyness * std::exp(q.rate * q.tau);  // E[e^y]
    auto phi_w = [&](double u) {
      const Complex v(-u, -1.0);
      return model_cf(v) * std::exp(Complex(0.0, 1.0) * v * x) / mart;
    };
    value = discount * mart * put_series(phi_w, -iv.b, -iv.a, cfg.n_terms);
  }
  if (!std::isfinite(value)) throw PricingError("pricing diverged");
  if (value < 0.0) {
    cos_clamp_counter().fetch_add(1, std::memory_order_relaxed);
    value = 0.0;
  }
  return value;
}

template <typename Params>
std::vector<double> surface_impl(const Params& p, std::span<const Quote> quotes,
                                 const CosConfig& cfg, bool parallel) {
  require(!quotes.empty(), "price_surface needs at least one quote");
  std::vector<double> prices(quotes.size());
  std::vector<std::string> errors(quotes.size());
  auto body = [&](std::size_t i) {
    try {
      prices[i] = cos_price(p, quotes[i], cfg);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  };
  if (parallel) {
    par::parallel_for(quotes.size(), body);
  } else {
    par::serial_for(quotes.size(), body);
  }
  for (std::size_t i = 0; i < quotes.size(); ++i) {
    if (!errors[i].empty()) {
      throw PricingError("quote " + std::to_string(i) + ": " + errors[i]);
    }
  }
  return prices;
}

}  // namespace

Cumulants log_moneyness_cumulants(const HestonParams& p, const Quote& q) {
  const double kt = p.kappa * q.tau;
  const double c1 = std::log(q.moneyness) + q.rate * q.tau +
                    (p.nu_bar - p.nu0) * (-std::expm1(-kt)) / (2.0 * p.kappa) -
                    0.5 * p.nu_bar * q.tau;
  return {c1, heston_c2(p, q.tau), 0.0};
}

Cumulants log_moneyness_cumulants(const BatesParams& p, const Quote& q) {
  Cumulants c = log_moneyness_cumulants(p.heston, q);
  if (p.lambda_j == 0.0) return c;
  const double lt = p.lambda_j * q.tau;
  const double compensator = std::exp(p.mu_j + 0.5 * p.nu_j_sq) - 1.0;
  c.c1 += lt * p.mu_j - lt * compensator;
  c.c2 += lt * (p.mu_j * p.mu_j + p.nu_j_sq);
  const double m2 = p.mu_j * p.mu_j;
  c.c4 += lt * (m2 * m2 + 6.0 * m2 * p.nu_j_sq + 3.0 * p.nu_j_sq * p.nu_j_sq);
  return c;
}

TruncationInterval cumulant_interval(const HestonParams& p, const Quote& q,
                                     const CosConfig& cfg) {
  return interval_from_cumulants(log_moneyness_cumulants(p, q), cfg);
}

TruncationInterval cumulant_interval(const BatesParams& p, const Quote& q,
                                     const CosConfig& cfg) {
  return interval_from_cumulants(log_moneyness_cumulants(p, q), cfg);
}

TruncationInterval widen_interval(TruncationInterval iv, const CosConfig& cfg) {
  const double center = 0.5 * (iv.a + iv.b);
  double half = 0.5 * (iv.b - iv.a);
  int widenings = 0;
  while (!(iv.a < 0.0 && 0.0 < iv.b)) {
    if (widenings >= cfg.max_widenings) {
      throw PricingError("interval adaptation failed");
    }
    half *= 2.0;
    iv = {center - half, center + half};
    ++widenings;
  }
  return iv;
}

double payoff_coefficient(const Quote& q, const TruncationInterval& iv, int k) {
  require(k >= 0, "coefficient index must be non-negative");
  if (q.kind == OptionKind::Put) {
    return put_coefficient(iv.a, iv.b, iv.a, std::min(iv.b, 0.0), k);
  }
  return call_coefficient(iv.a, iv.b, std::max(iv.a, 0.0), iv.b, k);
}

double cos_price(const HestonParams& p, const Quote& q, const CosConfig& cfg) {
  p.validate();
  q.validate();
  cfg.validate();
  auto cf = [&](Complex u) { return heston_cf(p, q.rate, q.tau, u); };
  return price_impl(cf, q, log_moneyness_cumulants(p, q), cfg);
}

double cos_price(const BatesParams& p, const Quote& q, const CosConfig& cfg) {
  p.validate();
  q.validate();
  cfg.validate();
  auto cf = [&](Complex u) { return bates_cf(p, q.rate, q.tau, u); };
  return price_impl(cf, q, log_moneyness_cumulants(p, q), cfg);
}

std::vector<double> price_surface(const HestonParams& p,
                                  std::span<const Quote> quotes,
                                  const CosConfig& cfg) {
  return surface_impl(p, quotes, cfg, true);
}

std::vector<double> price_surface(const BatesParams& p,
                                  std::span<const Quote> quotes,
                                  const CosConfig& cfg) {
  return surface_impl(p, quotes, cfg, true);
}

std::vector<double> price_surface_serial(const HestonParams& p,
                                         std::span<const Quote> quotes,
                                         const CosConfig& cfg) {
  return surface_impl(p, quotes, cfg, false);
}

std::vector<double> price_surface_serial(const BatesParams& p,
                                         std::span<const Quote> quotes,
                                         const CosConfig& cfg) {
  return surface_impl(p, quotes, cfg, false);
}

std::atomic<std::uint64_t>& cos_clamp_counter() {
  static std::atomic<std::uint64_t> counter{0};
  return counter;
}

}  // namespace svcal
