#pragma once

#include "svcal/models.hpp"

namespace svcal {

struct IvConfig {
  double lo = 1e-4;    // lower volatility bracket
  double hi = 5.0;     // upper volatility bracket
  double tol = 1e-10;  // absolute tolerance on sigma
  int max_iter = 200;

  void validate() const {
    require(lo > 0.0 && lo < hi, "need 0 < lo < hi");
    require(tol > 0.0, "tol must be positive");
    require(max_iter >= 1, "max_iter must be >= 1");
  }
};

/// Black-Scholes value with S0 = m, K = 1.
double bs_price(double sigma, const Quote& q);

/// Standard normal CDF.
double norm_cdf(double x);

/// Brent root-find for the volatility reproducing the observed price.
/// Throws PricingError("no implied vol") outside the no-arbitrage band and
/// PricingError("bracket failure") if the root is not bracketed after one
/// automatic doubling of hi.
double implied_vol(double price, const Quote& q, const IvConfig& cfg = {});

}  // namespace svcal
