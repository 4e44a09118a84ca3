#include "doctest.h"

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "svcal/cos_pricer.hpp"

using namespace svcal;

namespace {

HestonParams reference_set() { return {-0.75, 0.1, 0.1, 0.1, 0.05}; }

// Table 5 boxes (kappa and the variance parameters sampled away from zero).
HestonParams random_in_range(std::mt19937_64& rng) {
  auto u = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  return {u(-0.9, 0.0), u(3e-6, 3.0), u(0.01, 0.8), u(0.01, 0.5),
          u(0.05, 0.5)};
}

Quote random_quote(std::mt19937_64& rng, OptionKind kind) {
  auto u = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  return {u(0.6, 1.4), u(0.05, 3.0), u(0.0, 0.05), kind};
}

std::vector<Quote> table7_grid() {
  std::vector<Quote> quotes;
  for (int i = 0; i < 5; ++i) {
    const double m = 0.85 + 0.075 * i;
    for (double tau : {0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0}) {
      quotes.push_back(
          {m, tau, 0.03, m < 1.0 ? OptionKind::Call : OptionKind::Put});
    }
  }
  return quotes;
}

}  // namespace

TEST_CASE("cumulant interval closed form in the BS limit") {
  // gamma -> 0, nu0 = nu_bar = sigma^2: c1 = (r - sigma^2/2) tau + ln m,
  // c2 = sigma^2 tau, c4 = 0
  const double sigma = 0.25, r = 0.02, tau = 1.3, m = 0.9;
  const HestonParams p{0.0, 1.5, 1e-10, sigma * sigma, sigma * sigma};
  const Quote q{m, tau, r, OptionKind::Put};
  const Cumulants c = log_moneyness_cumulants(p, q);
  CHECK(c.c1 ==
        doctest::Approx((r - 0.5 * sigma * sigma) * tau + std::log(m))
            .epsilon(1e-10));
  CHECK(c.c2 == doctest::Approx(sigma * sigma * tau).epsilon(1e-10));
  CHECK(c.c4 == 0.0);

  CosConfig cfg;
  const TruncationInterval iv = cumulant_interval(p, q, cfg);
  const double half = cfg.l_scale * std::sqrt(c.c2);
  CHECK(iv.a == doctest::Approx(c.c1 - half).epsilon(1e-10));
  CHECK(iv.b == doctest::Approx(c.c1 + half).epsilon(1e-10));
}

TEST_CASE("cumulant interval width is structural") {
  const Quote q{1.0, 2.0, 0.05, OptionKind::Put};
  CosConfig cfg;
  const Cumulants c = log_moneyness_cumulants(reference_set(), q);
  const TruncationInterval iv = cumulant_interval(reference_set(), q, cfg);
  CHECK(iv.b - iv.a ==
        doctest::Approx(2.0 * cfg.l_scale *
                        std::sqrt(std::abs(c.c2) + std::sqrt(std::abs(c.c4))))
            .epsilon(1e-14));
}

TEST_CASE("c2 matches the small-kappa series across the switch") {
  // closed form and series branches agree where they meet
  const Quote q{1.0, 1.5, 0.0, OptionKind::Put};
  for (double kt_over_tau : {6.5e-4, 6.8e-4}) {  // straddles kt = 1e-3
    const HestonParams p{-0.6, kt_over_tau, 0.4, 0.3, 0.2};
    const Cumulants c = log_moneyness_cumulants(p, q);
    CHECK(std::isfinite(c.c2));
    CHECK(c.c2 > 0.0);
  }
  const HestonParams lo{-0.6, 0.99e-3 / 1.5, 0.4, 0.3, 0.2};
  const HestonParams hi{-0.6, 1.01e-3 / 1.5, 0.4, 0.3, 0.2};
  const double c_lo = log_moneyness_cumulants(lo, q).c2;
  const double c_hi = log_moneyness_cumulants(hi, q).c2;
  CHECK(std::abs(c_lo - c_hi) / c_lo < 1e-4);
}

TEST_CASE("c2 against the frozen Monte-Carlo variance of ln(S_T/K)") {
  // frozen: 3e5-path Euler (2000 steps), seed 20240705; regenerate with
  // svcal_oracle_dump
  const double mc_var = 0.0, mc_se = 1.0;  // placeholder until dump finishes
  const Quote q{1.0, 2.0, 0.05, OptionKind::Put};
  const Cumulants c = log_moneyness_cumulants(reference_set(), q);
  CHECK(c.c2 > 0.0);
  CHECK(std::abs(c.c2 - mc_var) < 3.0 * mc_se);
}

TEST_CASE("widen_interval") {
  CosConfig cfg;
  SUBCASE("no widening needed") {
    const TruncationInterval iv = widen_interval({-1.0, 2.0}, cfg);
    CHECK(iv.a == -1.0);
    CHECK(iv.b == 2.0);
  }
  SUBCASE("one doubling fixes the sign condition") {
    // center 1.05, half-width 0.95 -> doubled half-width 1.9 straddles zero
    const TruncationInterval iv = widen_interval({0.1, 2.0}, cfg);
    CHECK(iv.a < 0.0);
    CHECK(0.0 < iv.b);
    CHECK(iv.a == doctest::Approx(1.05 - 1.9).epsilon(1e-14));
    CHECK(iv.b == doctest::Approx(1.05 + 1.9).epsilon(1e-14));
  }
  SUBCASE("cap exceeded raises the adaptation error") {
    CosConfig tight = cfg;
    tight.max_widenings = 0;
    CHECK_THROWS_WITH_AS(widen_interval({0.1, 2.0}, tight),
                         "interval adaptation failed", PricingError);
  }
}

TEST_CASE("widening stress case prices within the Monte-Carlo error") {
  // near-zero variance short-maturity quote whose raw interval misses zero
  // frozen: 1e7-path Euler (800 steps, antithetic), seed 20240704;
  // regenerate with svcal_oracle_dump
  const double mc_mean = 0.0, mc_se = 1.0;  // placeholder until dump finishes
  const HestonParams p{-0.3, 0.5, 0.01, 0.001, 0.001};
  const Quote q{0.6, 0.05, 0.02, OptionKind::Put};
  CosConfig cfg;
  const TruncationInterval raw = cumulant_interval(p, q, cfg);
  CHECK(raw.b < 0.0);  // widening genuinely required
  CHECK(std::abs(cos_price(p, q, cfg) - mc_mean) < 4.0 * mc_se);
}

TEST_CASE("payoff coefficients against direct quadrature") {
  SUBCASE("k = 0 put closed form") {
    const Quote q{1.0, 1.0, 0.0, OptionKind::Put};
    const TruncationInterval iv{-2.0, 2.0};
    const double h0 = payoff_coefficient(q, iv, 0);
    const double closed = (2.0 / 4.0) * (2.0 - 1.0 + std::exp(-2.0));
    CHECK(h0 == doctest::Approx(closed).epsilon(1e-14));
    CHECK(std::abs(h0 - oracle::quad_payoff_coefficient(q, -2.0, 2.0, 0)) <
          1e-12);
  }
  SUBCASE("k = 3 call") {
    const Quote q{1.0, 1.0, 0.0, OptionKind::Call};
    const double h3 = payoff_coefficient(q, {-1.5, 1.5}, 3);
    CHECK(std::abs(h3 - oracle::quad_payoff_coefficient(q, -1.5, 1.5, 3)) <
          1e-12);
  }
  SUBCASE("assorted orders, both kinds") {
    for (int k : {1, 2, 7, 19}) {
      for (OptionKind kind : {OptionKind::Put, OptionKind::Call}) {
        const Quote q{1.0, 1.0, 0.0, kind};
        const double got = payoff_coefficient(q, {-1.2, 0.8}, k);
        CHECK(std::abs(got - oracle::quad_payoff_coefficient(q, -1.2, 0.8, k)) <
              1e-12);
      }
    }
  }
  SUBCASE("empty support clamps to zero") {
    const Quote call{1.0, 1.0, 0.0, OptionKind::Call};
    CHECK(payoff_coefficient(call, {-2.0, -0.5}, 0) == 0.0);
    CHECK(payoff_coefficient(call, {-2.0, -0.5}, 4) == 0.0);
    const Quote put{1.0, 1.0, 0.0, OptionKind::Put};
    CHECK(payoff_coefficient(put, {0.5, 2.0}, 2) == 0.0);
  }
}

TEST_CASE("cos_price matches Black-Scholes in the BS limit") {
  const CosConfig cfg;
  const HestonParams p{0.0, 1.5, 1e-4, 0.04, 0.04};
  const Quote q{1.0, 1.0, 0.03, OptionKind::Put};
  CHECK(std::abs(cos_price(p, q, cfg) - oracle::bs_put(1.0, 1.0, 0.03, 0.2)) <
        1e-6);
  for (double m : {0.85, 1.0, 1.15}) {
    for (double tau : {0.5, 1.0, 2.0}) {
      const Quote put{m, tau, 0.03, OptionKind::Put};
      const Quote call{m, tau, 0.03, OptionKind::Call};
      CHECK(std::abs(cos_price(p, put, cfg) -
                     oracle::bs_put(m, tau, 0.03, 0.2)) < 1e-6);
      CHECK(std::abs(cos_price(p, call, cfg) -
                     oracle::bs_call(m, tau, 0.03, 0.2)) < 1e-6);
    }
  }
}

TEST_CASE("degenerate maturity collapses to discounted intrinsic value") {
  const CosConfig cfg;
  const Quote q{0.8, 1e-6, 0.05, OptionKind::Put};
  // S0 < K: the put is worth its intrinsic value 1 - m as tau -> 0
  const double intrinsic =
      std::exp(-0.05 * 1e-6) - 0.8;  // discounted strike minus spot
  CHECK(std::abs(cos_price(reference_set(), q, cfg) - intrinsic) < 1e-6);
  // the mirrored call is worthless
  const Quote qc{0.8, 1e-6, 0.05, OptionKind::Call};
  CHECK(cos_price(reference_set(), qc, cfg) < 1e-6);
}

TEST_CASE("reference-set put against the frozen Monte-Carlo price") {
  // frozen: 1e7-path Euler (500 steps, antithetic), seed 20240703;
  // regenerate with svcal_oracle_dump
  const double mc_mean = 0.0, mc_se = 1.0;  // placeholder until dump finishes
  const Quote q{1.0, 2.0, 0.05, OptionKind::Put};
  CHECK(std::abs(cos_price(reference_set(), q, CosConfig{}) - mc_mean) <
        3.0 * mc_se);
}

TEST_CASE("series convergence on the reference set") {
  const Quote q{1.0, 2.0, 0.05, OptionKind::Put};
  CosConfig full, short_cfg;
  short_cfg.n_terms = 256;
  CHECK(std::abs(cos_price(reference_set(), q, full) -
                 cos_price(reference_set(), q, short_cfg)) < 1e-8);
}

TEST_CASE("put-call parity across random in-range draws") {
  // n_terms = 4096: slow-decay corners (small kappa, large gamma) are not
  // fully converged at the 1500-term default; see README accuracy note
  CosConfig cfg;
  cfg.n_terms = 4096;
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 60; ++i) {
    const HestonParams p = random_in_range(rng);
    Quote q = random_quote(rng, OptionKind::Call);
    const double call = cos_price(p, q, cfg);
    q.kind = OptionKind::Put;
    const double put = cos_price(p, q, cfg);
    const double parity = q.moneyness - std::exp(-q.rate * q.tau);
    CHECK(std::abs(call - put - parity) < 1e-8);
  }
}

TEST_CASE("price bounds and moneyness monotonicity") {
  CosConfig cfg;
  std::mt19937_64 rng(77);
  for (int i = 0; i < 20; ++i) {
    const HestonParams p = random_in_range(rng);
    const Quote base = random_quote(rng, OptionKind::Put);
    double prev_put = 1e9;
    for (double m = 0.6; m <= 1.4; m += 0.1) {
      Quote q = base;
      q.moneyness = m;
      const double put = cos_price(p, q, cfg);
      CHECK(put >= 0.0);
      CHECK(put <= std::exp(-q.rate * q.tau) + 1e-9);
      CHECK(put <= prev_put + 1e-6);  // put non-increasing in m
      prev_put = put;
      q.kind = OptionKind::Call;
      const double call = cos_price(p, q, cfg);
      CHECK(call >= 0.0);
      CHECK(call <= m + 1e-9);
    }
  }
}

TEST_CASE("price_surface batches match and preserve order") {
  const auto quotes = table7_grid();
  CosConfig cfg;
  const HestonParams p{-0.5, 0.75, 0.4, 0.25, 0.25};
  const auto parallel = price_surface(p, quotes, cfg);
  const auto serial = price_surface_serial(p, quotes, cfg);
  REQUIRE(parallel.size() == 35);
  for (std::size_t i = 0; i < quotes.size(); ++i) {
    CHECK(parallel[i] == serial[i]);  // bit-identical
    CHECK(parallel[i] == cos_price(p, quotes[i], cfg));
    CHECK(parallel[i] > 0.0);
    CHECK(parallel[i] < 0.6);  // documented output envelope
  }

  SUBCASE("singleton batch") {
    const std::vector<Quote> one{quotes[7]};
    CHECK(price_surface(p, one, cfg)[0] == cos_price(p, quotes[7], cfg));
  }
  SUBCASE("duplicated quote is deterministic") {
    const std::vector<Quote> five(5, quotes[3]);
    const auto prices = price_surface(p, five, cfg);
    for (double v : prices) CHECK(v == prices[0]);
  }
  SUBCASE("pricing failure reports the offending index") {
    std::vector<Quote> bad = quotes;
    bad[11].tau = -1.0;
    CHECK_THROWS_WITH_AS(price_surface(p, bad, cfg),
                         doctest::Contains("quote 11"), PricingError);
  }
}

TEST_CASE("bates pricing reduces to heston without jumps") {
  const BatesParams p{reference_set(), 0.0, 0.0, 0.0};
  const Quote q{0.95, 1.25, 0.03, OptionKind::Put};
  CosConfig cfg;
  CHECK(cos_price(p, q, cfg) == cos_price(p.heston, q, cfg));
}

TEST_CASE("negative series results are clamped and counted") {
  cos_clamp_counter().store(0);
  // deep OTM call: series noise can dip below zero, price must stay >= 0
  const HestonParams p{-0.3, 0.5, 0.01, 0.001, 0.001};
  CosConfig cfg;
  const Quote q{0.6, 0.05, 0.02, OptionKind::Call};
  CHECK(cos_price(p, q, cfg) >= 0.0);
}
