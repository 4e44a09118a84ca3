#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "svcal/bs_iv.hpp"
#include "svcal/cos_pricer.hpp"
#include "svcal/de_opt.hpp"
#include "svcal/models.hpp"
#include "svcal/nnet.hpp"

namespace svcal {

enum class BackendKind { CosBrent, Surrogate };

/// Weighted squared-IV-error objective over a quote surface with a subset of
/// model parameters free.
struct CalibrationProblem {
  QuoteSurface surface;
  ModelKind model = ModelKind::Heston;
  std::vector<std::string> free_names;               // canonical model order
  std::vector<std::array<double, 2>> free_boxes;     // aligned with free_names
  std::map<std::string, double> fixed;               // remaining parameters
  BackendKind backend = BackendKind::CosBrent;
  std::shared_ptr<const Network> surrogate;          // required for Surrogate
  std::optional<double> lambda_bar;  // default: 1e-6 when >3 free, else 0
  CosConfig cos;
  IvConfig iv;

  double resolved_lambda_bar() const {
    if (lambda_bar) return *lambda_bar;
    return free_names.size() > 3 ? 1e-6 : 0.0;
  }
  void validate() const;
  BatesParams assemble(std::span<const double> free_values) const;
};

/// Energies for a whole candidate matrix; the candidate x quote grid is one
/// batch (surrogate: a single forward call). Backend failures yield +inf for
/// the offending candidate only.
std::vector<double> objective(const CalibrationProblem& problem,
                              const Matrix& candidates);

/// Scalar path; optionally fills per-quote residuals (model - observed).
double objective_single(const CalibrationProblem& problem,
                        std::span<const double> candidate,
                        std::vector<double>* residuals = nullptr);

struct MarketGrid {
  std::vector<double> moneyness;
  std::vector<double> maturities;

  /// 5 equally spaced moneyness in [0.85, 1.15] x maturities 0.5..2.0.
  static MarketGrid table_default();
};

/// Synthetic observed surface from known parameters: OTM convention
/// (m < 1 call, m >= 1 put), observed values are Brent IVs of COS prices.
/// outside_envelope (optional) counts IVs outside (0.2, 0.5).
QuoteSurface synth_market(ModelKind model, const BatesParams& truth,
                          const MarketGrid& grid, double rate, double weight,
                          const CosConfig& cos, const IvConfig& iv,
                          std::size_t* outside_envelope = nullptr);

struct CalibrationResult {
  std::vector<double> recovered;  // free values, problem order
  BatesParams full_params;
  double objective_value;  // J
  double mean_objective;   // MJ = J / n_quotes
  long function_evaluations;
  int generations;
  bool converged;
  double wall_time_seconds;
  std::vector<double> residuals;  // per quote at the optimum
  std::vector<DEGenStat> trace;
  std::optional<double> ground_total_squared_error;  // exact re-pricing
};

/// DE over the free box. compute_ground_error re-prices the result with
/// COS+Brent and reports the unweighted squared IV error sum.
CalibrationResult calibrate(const CalibrationProblem& problem, DEConfig de,
                            bool compute_ground_error = false);

struct SensitivityReport {
  std::vector<std::string> names;
  Matrix hessian;           // symmetrized
  double center_value;      // objective at the expansion point
  double asymmetry;         // ||H - H^T||_inf / ||H||_inf before symmetrizing
  std::vector<double> diagonal() const;
  double max_min_diag_ratio() const;
};

/// Central second differences of the objective with lambda_bar forced to 0
/// and uniform 1/N weights (pure MSE), batched through objective().
/// The point must be interior to the boxes by at least the step per
/// dimension.
SensitivityReport hessian(const CalibrationProblem& problem,
                          std::span<const double> point,
                          std::span<const double> steps);

/// h_i = 1e-3 x box width.
std::vector<double> default_hessian_steps(const CalibrationProblem& problem);

/// Generic symmetric finite-difference Hessian of a scalar function.
Matrix finite_difference_hessian(
    const std::function<double(std::span<const double>)>& fn,
    std::span<const double> point, std::span<const double> steps);

/// Surface CSV: m,tau,r,kind,observed,weight (header row).
void surface_to_csv(const QuoteSurface& surface, const std::string& path);
QuoteSurface surface_from_csv(const std::string& path,
                              ValueKind value_kind = ValueKind::ImpliedVol);

/// Problem JSON: {model, backend, weights_file?, surface_file, free, fixed,
/// lambda_bar?, weights?, value_kind?}. Free parameters are ordered by the
/// model's canonical parameter order regardless of JSON key order.
CalibrationProblem problem_from_json_file(const std::string& path);

std::string result_to_json(const CalibrationResult& r,
                           const CalibrationProblem& p);

}  // namespace svcal
