#pragma once

#include <array>
#include <complex>
#include <string>
#include <vector>

#include "svcal/common.hpp"

namespace svcal {

enum class ModelKind { Heston, Bates };
enum class OptionKind { Call, Put };
enum class ValueKind { Price, ImpliedVol };

struct HestonParams {
  double rho;     // correlation between asset and variance drivers, in [-1, 1]
  double kappa;   // mean-reversion speed of the variance (1/year)
  double gamma;   // volatility of the variance process
  double nu_bar;  // long-term variance level
  double nu0;     // initial variance

  void validate() const {
    require(kappa > 0.0, "kappa must be positive");
    require(gamma > 0.0, "gamma must be positive");
    require(nu_bar > 0.0, "nu_bar must be positive");
    require(nu0 > 0.0, "nu0 must be positive");
    require(rho >= -1.0 && rho <= 1.0, "rho must lie in [-1, 1]");
  }
};

struct BatesParams {
  HestonParams heston;
  double lambda_j = 0.0;  // jump intensity (jumps/year)
  double mu_j = 0.0;      // mean of the log-jump size
  double nu_j_sq = 0.0;   // variance of the log-jump size

  void validate() const {
    heston.validate();
    require(lambda_j >= 0.0, "lambda_j must be non-negative");
    require(nu_j_sq >= 0.0, "nu_j_sq must be non-negative");
  }
};

/// One market instrument, strike-normalized: moneyness m = S0/K.
struct Quote {
  double moneyness;
  double tau;   // time to maturity (years)
  double rate;  // flat risk-free rate
  OptionKind kind = OptionKind::Put;

  void validate() const {
    require(moneyness > 0.0, "moneyness must be positive");
    require(tau > 0.0, "tau must be positive");
  }
};

/// Quotes paired with observed values (price/K or Black-Scholes implied
/// volatility) and calibration weights.
struct QuoteSurface {
  std::vector<Quote> quotes;
  std::vector<double> observed;
  std::vector<double> weights;
  ValueKind value_kind = ValueKind::ImpliedVol;

  void validate() const {
    require(!quotes.empty(), "surface must contain at least one quote");
    require(observed.size() == quotes.size() && weights.size() == quotes.size(),
            "quotes/observed/weights lengths must match");
    bool any_positive = false;
    for (double w : weights) {
      require(w >= 0.0, "weights must be non-negative");
      if (w > 0.0) any_positive = true;
    }
    require(any_positive, "at least one weight must be positive");
    for (const Quote& q : quotes) q.validate();
  }
};

/// Characteristic function of the log return ln(S_tau/S0) under Heston,
/// drift included. Branch-cut-stable formulation; safe down to gamma -> 0.
std::complex<double> heston_cf(const HestonParams& p, double rate, double tau,
                               std::complex<double> u);

/// Bates characteristic function: heston_cf times the compensated
/// compound-Poisson jump exponent. lambda_j = 0 reproduces heston_cf exactly.
std::complex<double> bates_cf(const BatesParams& p, double rate, double tau,
                              std::complex<double> u);

/// Parameter names in calibration order.
std::vector<std::string> param_names(ModelKind kind);

/// Reads a component by name ("rho", ..., "nu_j_sq").
double param_value(const BatesParams& p, const std::string& name);
void set_param_value(BatesParams& p, const std::string& name, double value);

/// Flat JSON with keys rho, kappa, gamma, nu_bar, nu0 and optional
/// lambda_j, mu_j, nu_j_sq (default 0).
std::string params_to_json(const BatesParams& p);
BatesParams params_from_json_text(const std::string& text);
BatesParams params_from_json_file(const std::string& path);
void params_to_json_file(const BatesParams& p, const std::string& path);

}  // namespace svcal
