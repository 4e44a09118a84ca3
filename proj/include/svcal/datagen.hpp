#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "svcal/bs_iv.hpp"
#include "svcal/cos_pricer.hpp"
#include "svcal/models.hpp"

namespace svcal {

struct DimensionRange {
  std::string name;
  double low;
  double high;
  bool open_low = false;  // realized as sampling in [low + 1e-6*(high-low), high]

  std::array<double, 2> effective() const {
    if (!open_low) return {low, high};
    return {low + 1e-6 * (high - low), high};
  }
};

struct SamplingRanges {
  std::vector<DimensionRange> dims;  // Table order: m, tau, r, rho, kappa,
                                     // gamma, nu_bar, nu0[, lambda_j, mu_j,
                                     // nu_j_sq]

  static SamplingRanges heston_defaults();
  static SamplingRanges bates_defaults();

  void validate() const {
    require(!dims.empty(), "ranges must not be empty");
    for (const auto& d : dims) {
      require(d.low < d.high, "range low must be < high for " + d.name);
    }
  }
  std::size_t dim() const { return dims.size(); }
};

/// Supervised rows: inputs in sampling order, then put price, then implied
/// vol. Out-of-band rows are dropped at build time and counted.
struct Dataset {
  ModelKind model = ModelKind::Heston;
  SamplingRanges ranges;
  std::uint64_t seed = 0;
  CosConfig cos;
  IvConfig iv;
  std::size_t requested = 0;
  std::size_t dropped = 0;

  std::size_t n_inputs = 0;
  Matrix rows;  // cols = n_inputs + 2 (price, iv)

  std::size_t size() const { return rows.rows; }
  std::span<const double> inputs(std::size_t i) const {
    return rows.row(i).subspan(0, n_inputs);
  }
  double price(std::size_t i) const { return rows.at(i, n_inputs); }
  double target_iv(std::size_t i) const { return rows.at(i, n_inputs + 1); }

  /// Wraps feature/target pairs for training code and tests.
  static Dataset from_xy(const Matrix& x, std::span<const double> y);
};

/// n stratified samples over the ranges, deterministic in seed.
Matrix lhs_sample(const SamplingRanges& ranges, std::size_t n,
                  std::uint64_t seed);

/// LHS -> COS put price -> Brent implied vol, rows outside the output bands
/// price in (0, 0.6), iv in (0, 0.76) (or erroring) are dropped and counted.
/// Throws PricingError("degenerate ranges") past 50% drops.
Dataset build_dataset(ModelKind model, const SamplingRanges& ranges,
                      std::size_t n, std::uint64_t seed, const CosConfig& cos,
                      const IvConfig& iv);

/// Disjoint row partition by seeded shuffle; fractions must sum to 1.
std::array<Dataset, 3> split_dataset(const Dataset& ds,
                                     std::array<double, 3> fractions,
                                     std::uint64_t seed);

/// CSV (17 significant digits, header row) plus a <path>.meta.json sidecar.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

/// Output acceptance bands from the data-generation design.
inline constexpr double kPriceBandLow = 0.0, kPriceBandHigh = 0.6;
inline constexpr double kIvBandLow = 0.0, kIvBandHigh = 0.76;

}  // namespace svcal
