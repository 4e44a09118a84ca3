#include "doctest.h"

#include <cmath>
#include <complex>
#include <random>

#include "svcal/models.hpp"

using namespace svcal;
using Complex = std::complex<double>;

namespace {

HestonParams reference_set() { return {-0.75, 0.1, 0.1, 0.1, 0.05}; }

BatesParams table11_set() {
  return {{-0.3, 1.0, 0.7, 0.1, 0.1}, 1.0, 0.1, 0.16};
}

}  // namespace

TEST_CASE("parameter invariants are enforced") {
  CHECK_NOTHROW(reference_set().validate());
  CHECK_THROWS_AS((HestonParams{-0.75, -0.1, 0.1, 0.1, 0.05}).validate(),
                  std::invalid_argument);
  CHECK_THROWS_AS((HestonParams{-1.5, 0.1, 0.1, 0.1, 0.05}).validate(),
                  std::invalid_argument);
  CHECK_THROWS_AS((BatesParams{reference_set(), -1.0, 0.0, 0.0}).validate(),
                  std::invalid_argument);
  CHECK_THROWS_AS((BatesParams{reference_set(), 1.0, 0.0, -0.1}).validate(),
                  std::invalid_argument);
  CHECK_THROWS_AS((Quote{-1.0, 1.0, 0.0, OptionKind::Put}).validate(),
                  std::invalid_argument);
  CHECK_THROWS_AS((Quote{1.0, 0.0, 0.0, OptionKind::Put}).validate(),
                  std::invalid_argument);
}

TEST_CASE("quote surface invariants") {
  QuoteSurface s;
  s.quotes = {{1.0, 1.0, 0.03, OptionKind::Put}};
  s.observed = {0.2};
  s.weights = {1.0};
  CHECK_NOTHROW(s.validate());
  s.weights = {0.0};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);  // all-zero weights
  s.weights = {-1.0};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s.weights = {1.0, 1.0};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);  // length mismatch
}

TEST_CASE("heston_cf at zero frequency: variance factor has modulus one") {
  const HestonParams p = reference_set();
  // phi(0) = 1 exactly: drift term and variance-process factor both reduce
  // to unity.
  const Complex v = heston_cf(p, 0.05, 2.0, Complex(0.0, 0.0));
  CHECK(v.real() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(v.imag() == doctest::Approx(0.0).epsilon(1e-15));
  // with the drift excluded the modulus is bounded by one for real u
  for (double u : {0.5, 1.0, 5.0, 20.0, 100.0}) {
    CHECK(std::abs(heston_cf(p, 0.0, 2.0, Complex(u, 0.0))) <= 1.0 + 1e-12);
  }
}

TEST_CASE("heston_cf degenerates to the GBM characteristic function") {
  const double sigma = 0.2, r = 0.03, tau = 1.7;
  auto gbm = [&](double u) {
    return std::exp(Complex(0.0, u * (r - 0.5 * sigma * sigma) * tau) -
                    Complex(0.5 * u * u * sigma * sigma * tau, 0.0));
  };
  // rho = 0: the O(rho*gamma) coupling vanishes and the match holds to
  // machine level over a wide frequency range
  for (double kappa : {0.3, 1.5, 3.0}) {
    const HestonParams p{0.0, kappa, 1e-8, sigma * sigma, sigma * sigma};
    for (double u = 0.25; u <= 20.0; u *= 2.0) {
      const Complex got = heston_cf(p, r, tau, Complex(u, 0.0));
      CHECK(std::abs(got - gbm(u)) / std::abs(gbm(u)) < 1e-9);
    }
  }
  // nonzero rho: agreement at moderate frequencies
  const HestonParams p{-0.5, 1.5, 1e-8, sigma * sigma, sigma * sigma};
  for (double u : {0.5, 1.0, 2.0}) {
    const Complex got = heston_cf(p, r, tau, Complex(u, 0.0));
    CHECK(std::abs(got - gbm(u)) / std::abs(gbm(u)) < 1e-9);
  }
}

TEST_CASE("heston_cf against the frozen Monte-Carlo oracle") {
  // frozen: 1e6-path Euler (4000 steps), seed 20240701; regenerate with
  // svcal_oracle_dump
  const double mc_re = 0.0, se_re = 1.0;  // placeholder until dump finishes
  const double mc_im = 0.0, se_im = 1.0;
  const Complex v = heston_cf(reference_set(), 0.05, 2.0, Complex(1.0, 0.0));
  CHECK(std::abs(v.real() - mc_re) < 3.0 * se_re);
  CHECK(std::abs(v.imag() - mc_im) < 3.0 * se_im);
}

TEST_CASE("bates_cf with lambda_j = 0 is heston_cf to the last bit") {
  const BatesParams p{reference_set(), 0.0, 0.3, 0.1};
  for (double u : {0.0, 0.7, 3.0, 41.0}) {
    const Complex a = bates_cf(p, 0.05, 2.0, Complex(u, 0.0));
    const Complex b = heston_cf(p.heston, 0.05, 2.0, Complex(u, 0.0));
    CHECK(a.real() == b.real());
    CHECK(a.imag() == b.imag());
  }
}

TEST_CASE("bates_cf jump factor is unity for zero-size jumps") {
  const BatesParams p{reference_set(), 2.0, 0.0, 0.0};
  for (double u : {0.3, 1.0, 10.0}) {
    const Complex a = bates_cf(p, 0.05, 2.0, Complex(u, 0.0));
    const Complex b = heston_cf(p.heston, 0.05, 2.0, Complex(u, 0.0));
    CHECK(std::abs(a - b) < 1e-15);
  }
}

TEST_CASE("bates_cf against the frozen Monte-Carlo oracle") {
  // frozen: 1e6-path Euler (4000 steps), seed 20240702; regenerate with
  // svcal_oracle_dump
  const double mc_re = 0.0, se_re = 1.0;  // placeholder until dump finishes
  const double mc_im = 0.0, se_im = 1.0;
  const Complex v = bates_cf(table11_set(), 0.03, 1.0, Complex(0.5, 0.0));
  CHECK(std::abs(v.real() - mc_re) < 3.0 * se_re);
  CHECK(std::abs(v.imag() - mc_im) < 3.0 * se_im);
}

TEST_CASE("conjugate symmetry of the characteristic function") {
  const BatesParams p = table11_set();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> uu(0.1, 80.0);
  for (int i = 0; i < 50; ++i) {
    const double u = uu(rng);
    const Complex plus = bates_cf(p, 0.03, 1.3, Complex(u, 0.0));
    const Complex minus = bates_cf(p, 0.03, 1.3, Complex(-u, 0.0));
    CHECK(std::abs(minus - std::conj(plus)) < 1e-14);
  }
}

TEST_CASE("parameter continuity: no branch-cut jumps") {
  // 1e-9 parameter bumps move phi(u) by O(1e-7) over |u| <= 100
  const BatesParams base = table11_set();
  for (const auto& name : param_names(ModelKind::Bates)) {
    BatesParams bumped = base;
    set_param_value(bumped, name, param_value(base, name) + 1e-9);
    for (double u = 1.0; u <= 100.0; u *= 3.1) {
      const Complex a = bates_cf(base, 0.03, 2.7, Complex(u, 0.0));
      const Complex b = bates_cf(bumped, 0.03, 2.7, Complex(u, 0.0));
      CHECK(std::abs(a - b) < 1e-7);
    }
  }
}

TEST_CASE("parameter JSON round trip with exact key names") {
  const BatesParams p = table11_set();
  const std::string text = params_to_json(p);
  CHECK(text.find("\"rho\"") != std::string::npos);
  CHECK(text.find("\"nu_bar\"") != std::string::npos);
  CHECK(text.find("\"nu_j_sq\"") != std::string::npos);
  const BatesParams q = params_from_json_text(text);
  CHECK(q.heston.rho == p.heston.rho);
  CHECK(q.heston.kappa == p.heston.kappa);
  CHECK(q.heston.gamma == p.heston.gamma);
  CHECK(q.heston.nu_bar == p.heston.nu_bar);
  CHECK(q.heston.nu0 == p.heston.nu0);
  CHECK(q.lambda_j == p.lambda_j);
  CHECK(q.mu_j == p.mu_j);
  CHECK(q.nu_j_sq == p.nu_j_sq);

  // bates keys optional, defaulting to zero
  const BatesParams h = params_from_json_text(
      R"({"rho":-0.5,"kappa":1.0,"gamma":0.3,"nu_bar":0.2,"nu0":0.2})");
  CHECK(h.lambda_j == 0.0);
  CHECK(h.mu_j == 0.0);
  CHECK(h.nu_j_sq == 0.0);

  CHECK_THROWS_AS(params_from_json_text("{\"rho\": -0.5}"), IoError);
  CHECK_THROWS_AS(params_from_json_text("not json"), IoError);
}
