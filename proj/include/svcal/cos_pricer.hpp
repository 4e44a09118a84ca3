#pragma once

#include <atomic>
#include <cstdint>
#include <span>
#include <vector>

#include "svcal/models.hpp"

namespace svcal {

struct CosConfig {
  int n_terms = 1500;      // series length N
  double l_scale = 50.0;   // interval width multiplier L
  int max_widenings = 10;  // cap on adaptive interval growth

  void validate() const {
    require(n_terms >= 16, "n_terms must be >= 16");
    require(l_scale > 0.0, "l_scale must be positive");
    require(max_widenings >= 0, "max_widenings must be >= 0");
  }
};

/// Truncation range [a, b] for the log-moneyness density.
struct TruncationInterval {
  double a;
  double b;
};

/// First/second/fourth cumulants of y = ln(S_tau/K).
struct Cumulants {
  double c1;
  double c2;
  double c4;
};

Cumulants log_moneyness_cumulants(const HestonParams& p, const Quote& q);
Cumulants log_moneyness_cumulants(const BatesParams& p, const Quote& q);

/// [c1 - L*sqrt(|c2| + sqrt(|c4|)), c1 + L*sqrt(|c2| + sqrt(|c4|))].
/// Throws PricingError("cumulant overflow") on non-finite cumulants.
TruncationInterval cumulant_interval(const HestonParams& p, const Quote& q,
                                     const CosConfig& cfg);
TruncationInterval cumulant_interval(const BatesParams& p, const Quote& q,
                                     const CosConfig& cfg);

/// Doubles the half-width about the midpoint until a < 0 < b, at most
/// cfg.max_widenings times. Throws PricingError("interval adaptation failed")
/// when the cap is exceeded.
TruncationInterval widen_interval(TruncationInterval iv, const CosConfig& cfg);

/// Closed-form cosine coefficient H_k of the strike-normalized payoff on the
/// interval: support [a, 0] for puts and [0, b] for calls.
double payoff_coefficient(const Quote& q, const TruncationInterval& iv, int k);

/// Discounted primed cosine series, clamped at zero. Puts are expanded
/// directly; calls go through the share-measure put-type series (the direct
/// call coefficients grow like e^b, which is hopeless at l_scale = 50).
double cos_price(const HestonParams& p, const Quote& q, const CosConfig& cfg);
double cos_price(const BatesParams& p, const Quote& q, const CosConfig& cfg);

/// Batched pricing, element i = cos_price(quotes[i]). The OpenMP version and
/// the serial reference return bit-identical vectors.
std::vector<double> price_surface(const HestonParams& p,
                                  std::span<const Quote> quotes,
                                  const CosConfig& cfg);
std::vector<double> price_surface(const BatesParams& p,
                                  std::span<const Quote> quotes,
                                  const CosConfig& cfg);
std::vector<double> price_surface_serial(const HestonParams& p,
                                         std::span<const Quote> quotes,
                                         const CosConfig& cfg);
std::vector<double> price_surface_serial(const BatesParams& p,
                                         std::span<const Quote> quotes,
                                         const CosConfig& cfg);

/// Count of series results clamped up to zero (truncation noise diagnostics).
std::atomic<std::uint64_t>& cos_clamp_counter();

}  // namespace svcal
