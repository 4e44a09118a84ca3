#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "svcal/calibrate.hpp"

using namespace svcal;

namespace {

BatesParams midpoint_truth() {
  return {{-0.5, 0.75, 0.4, 0.25, 0.25}, 0.0, 0.0, 0.0};
}

CosConfig fast_cos() {
  CosConfig c;
  c.n_terms = 256;  // converged to ~1e-8 on these benign boxes
  return c;
}

CalibrationProblem three_param_problem(const QuoteSurface& surface,
                                       const BatesParams& truth,
                                       const CosConfig& cos) {
  CalibrationProblem pr;
  pr.surface = surface;
  pr.model = ModelKind::Heston;
  pr.free_names = {"rho", "gamma", "nu_bar"};
  pr.free_boxes = {{-0.85, -0.05}, {0.05, 0.75}, {0.05, 0.45}};
  pr.fixed = {{"kappa", truth.heston.kappa}, {"nu0", truth.heston.nu0}};
  pr.cos = cos;
  return pr;
}

}  // namespace

TEST_CASE("problem validation covers the parameter partition") {
  const QuoteSurface s = synth_market(ModelKind::Heston, midpoint_truth(),
                                      MarketGrid::table_default(), 0.03, 1.0,
                                      fast_cos(), IvConfig{});
  CalibrationProblem pr = three_param_problem(s, midpoint_truth(), fast_cos());
  CHECK_NOTHROW(pr.validate());
  SUBCASE("missing coverage") {
    pr.fixed.erase("kappa");
    CHECK_THROWS_AS(pr.validate(), std::invalid_argument);
  }
  SUBCASE("double coverage") {
    pr.fixed["rho"] = -0.5;
    CHECK_THROWS_AS(pr.validate(), std::invalid_argument);
  }
  SUBCASE("unknown name") {
    pr.free_names.push_back("zeta");
    pr.free_boxes.push_back({0.0, 1.0});
    pr.fixed.erase("kappa");
    CHECK_THROWS_AS(pr.validate(), std::invalid_argument);
  }
  SUBCASE("lambda_bar rule: 0 for three free, 1e-6 beyond") {
    CHECK(pr.resolved_lambda_bar() == 0.0);
    pr.free_names = {"rho", "gamma", "nu_bar", "nu0"};
    pr.free_boxes.push_back({0.05, 0.45});
    pr.fixed.erase("nu0");
    CHECK(pr.resolved_lambda_bar() == 1e-6);
    pr.lambda_bar = 0.5;
    CHECK(pr.resolved_lambda_bar() == 0.5);
  }
}

TEST_CASE("synth_market produces the documented grid") {
  std::size_t outside = 0;
  const QuoteSurface s = synth_market(ModelKind::Heston, midpoint_truth(),
                                      MarketGrid::table_default(), 0.03, 1.0,
                                      fast_cos(), IvConfig{}, &outside);
  REQUIRE(s.quotes.size() == 35);
  CHECK(s.value_kind == ValueKind::ImpliedVol);
  for (const Quote& q : s.quotes) {
    if (q.moneyness < 1.0) {
      CHECK(q.kind == OptionKind::Call);
    } else {
      CHECK(q.kind == OptionKind::Put);  // m = 1 rows are puts
    }
  }
  // envelope violations are reported, not rejected
  CHECK(outside == 0);  // midpoint truth sits inside (0.2, 0.5)
  for (double iv : s.observed) {
    CHECK(iv > 0.2);
    CHECK(iv < 0.5);
  }
  // moneyness grid spacing
  CHECK(s.quotes.front().moneyness == doctest::Approx(0.85));
  CHECK(s.quotes.back().moneyness == doctest::Approx(1.15));
}

TEST_CASE("objective: self-consistency at the truth") {
  const BatesParams truth = midpoint_truth();
  const QuoteSurface s =
      synth_market(ModelKind::Heston, truth, MarketGrid::table_default(), 0.03,
                   1.0, fast_cos(), IvConfig{});
  const CalibrationProblem pr = three_param_problem(s, truth, fast_cos());
  Matrix cand(1, 3);
  cand.at(0, 0) = truth.heston.rho;
  cand.at(0, 1) = truth.heston.gamma;
  cand.at(0, 2) = truth.heston.nu_bar;
  const auto e = objective(pr, cand);
  CHECK(e[0] < 1e-14);
}

TEST_CASE("objective: weight linearity and the ATM-style spike") {
  const BatesParams truth = midpoint_truth();
  QuoteSurface s =
      synth_market(ModelKind::Heston, truth, MarketGrid::table_default(), 0.03,
                   1.0, fast_cos(), IvConfig{});
  // perturb observations so residuals are nonzero
  for (double& v : s.observed) v += 0.01;
  CalibrationProblem pr = three_param_problem(s, truth, fast_cos());

  std::vector<double> cand{-0.4, 0.3, 0.2};
  std::vector<double> residuals;
  const double base = objective_single(pr, cand, &residuals);
  CHECK(base > 0.0);

  // zero every weight except one spiked quote
  const std::size_t spike = 17;
  pr.surface.weights.assign(35, 0.0);
  pr.surface.weights[spike] = 5000.0;
  const double spiked = objective_single(pr, cand);
  CHECK(spiked == doctest::Approx(5000.0 * residuals[spike] * residuals[spike])
                      .epsilon(1e-12));
}

TEST_CASE("objective: batched energies match the scalar recomputation") {
  const BatesParams truth = midpoint_truth();
  const QuoteSurface s =
      synth_market(ModelKind::Heston, truth, MarketGrid::table_default(), 0.03,
                   1.0, fast_cos(), IvConfig{});
  CalibrationProblem pr = three_param_problem(s, truth, fast_cos());
  pr.lambda_bar = 1e-6;

  std::mt19937_64 rng(8);
  Matrix cands(6, 3);
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t d = 0; d < 3; ++d) {
      std::uniform_real_distribution<double> u(pr.free_boxes[d][0],
                                               pr.free_boxes[d][1]);
      cands.at(i, d) = u(rng);
    }
  }
  const auto batched = objective(pr, cands);
  for (std::size_t i = 0; i < 6; ++i) {
    // independent quote-by-quote recomputation
    const auto row = cands.row(i);
    const HestonParams p{row[0], truth.heston.kappa, row[1], row[2],
                         truth.heston.nu0};
    double acc = 0.0;
    for (std::size_t q = 0; q < s.quotes.size(); ++q) {
      const double price = cos_price(p, s.quotes[q], pr.cos);
      const double iv = implied_vol(price, s.quotes[q], pr.iv);
      acc += s.weights[q] * (iv - s.observed[q]) * (iv - s.observed[q]);
    }
    acc += 1e-6 * std::sqrt(row[0] * row[0] + row[1] * row[1] + row[2] * row[2]);
    CHECK(std::abs(batched[i] - acc) < 1e-12);
    CHECK(batched[i] == objective_single(pr, row));
  }
}

TEST_CASE("objective: failing candidates get +inf, not an abort") {
  const BatesParams truth = midpoint_truth();
  const QuoteSurface s =
      synth_market(ModelKind::Heston, truth, MarketGrid::table_default(), 0.03,
                   1.0, fast_cos(), IvConfig{});
  CalibrationProblem pr = three_param_problem(s, truth, fast_cos());
  pr.free_boxes[1] = {-1.0, 0.75};  // lets gamma go negative
  Matrix cands(2, 3);
  cands.at(0, 0) = -0.4; cands.at(0, 1) = -0.5; cands.at(0, 2) = 0.2;
  cands.at(1, 0) = truth.heston.rho;
  cands.at(1, 1) = truth.heston.gamma;
  cands.at(1, 2) = truth.heston.nu_bar;
  const auto e = objective(pr, cands);
  CHECK(std::isinf(e[0]));
  CHECK(e[1] < 1e-14);
}

TEST_CASE("calibrate: three-parameter self-recovery") {
  const BatesParams truth = midpoint_truth();
  const QuoteSurface s =
      synth_market(ModelKind::Heston, truth, MarketGrid::table_default(), 0.03,
                   1.0, fast_cos(), IvConfig{});
  const CalibrationProblem pr = three_param_problem(s, truth, fast_cos());
  DEConfig de;
  de.pop_size = 45;  // 15 x 3
  de.seed = 17;
  de.max_generations = 400;
  const CalibrationResult res = calibrate(pr, de, true);

  CHECK(res.objective_value <= 1e-8);
  CHECK(res.mean_objective ==
        doctest::Approx(res.objective_value / 35.0).epsilon(1e-12));
  CHECK(std::abs(res.recovered[0] - truth.heston.rho) < 5e-2);
  CHECK(std::abs(res.recovered[1] - truth.heston.gamma) < 5e-2);
  CHECK(std::abs(res.recovered[2] - truth.heston.nu_bar) < 5e-3);
  CHECK(*res.ground_total_squared_error <= 1e-8);
  CHECK(res.function_evaluations == 45 * (1 + res.generations));

  // residual audit: J is recomputable from the stored residuals
  double audit = 0.0;
  for (std::size_t q = 0; q < res.residuals.size(); ++q) {
    audit += pr.surface.weights[q] * res.residuals[q] * res.residuals[q];
  }
  double norm = 0.0;
  for (double v : res.recovered) norm += v * v;
  audit += pr.resolved_lambda_bar() * std::sqrt(norm);
  CHECK(std::abs(audit - res.objective_value) < 1e-12);
}

TEST_CASE("calibrate: positive weight scaling leaves the argmin unchanged") {
  const BatesParams truth = midpoint_truth();
  QuoteSurface s =
      synth_market(ModelKind::Heston, truth, MarketGrid::table_default(), 0.03,
                   1.0, fast_cos(), IvConfig{});
  CalibrationProblem pr = three_param_problem(s, truth, fast_cos());
  pr.lambda_bar = 0.0;
  DEConfig de;
  de.pop_size = 20;
  de.seed = 23;
  de.max_generations = 80;
  const CalibrationResult base = calibrate(pr, de);

  CalibrationProblem scaled = pr;
  scaled.surface.weights.assign(35, 7.5);
  const CalibrationResult more = calibrate(scaled, de);
  CHECK(base.recovered == more.recovered);  // energies scale monotonically
  CHECK(more.objective_value ==
        doctest::Approx(7.5 * base.objective_value).epsilon(1e-9));
}

TEST_CASE("finite-difference hessian is exact on quadratics") {
  const std::vector<double> c{3.0, 0.5, 11.0};
  auto quad = [&](std::span<const double> x) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += c[i] * x[i] * x[i];
    return acc;
  };
  const std::vector<double> point{0.2, -0.4, 1.0};
  const std::vector<double> steps{1e-3, 1e-3, 1e-3};
  const Matrix h = finite_difference_hessian(quad, point, steps);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      const double expected = i == j ? 2.0 * c[i] : 0.0;
      CHECK(std::abs(h.at(i, j) - expected) < 1e-8);
    }
  }
}

TEST_CASE("hessian of the COS objective at the truth") {
  const BatesParams truth = midpoint_truth();
  const QuoteSurface s =
      synth_market(ModelKind::Heston, truth, MarketGrid::table_default(), 0.03,
                   1.0, fast_cos(), IvConfig{});
  CalibrationProblem pr;
  pr.surface = s;
  pr.model = ModelKind::Heston;
  pr.free_names = {"rho", "kappa", "gamma", "nu_bar", "nu0"};
  pr.free_boxes = {
      {-0.85, -0.05}, {0.1, 2.0}, {0.05, 0.75}, {0.05, 0.45}, {0.05, 0.45}};
  pr.cos = fast_cos();
  const std::vector<double> point{truth.heston.rho, truth.heston.kappa,
                                  truth.heston.gamma, truth.heston.nu_bar,
                                  truth.heston.nu0};
  const auto steps = default_hessian_steps(pr);
  const SensitivityReport rep = hessian(pr, point, steps);

  // positive curvature everywhere at a global minimum
  for (double d : rep.diagonal()) CHECK(d > 0.0);
  // nu0 dominates, kappa is flattest
  const auto diag = rep.diagonal();
  CHECK(diag[4] == *std::max_element(diag.begin(), diag.end()));
  CHECK(diag[1] == *std::min_element(diag.begin(), diag.end()));
  CHECK(rep.max_min_diag_ratio() > 50.0);
  CHECK(rep.asymmetry <= 1e-6);
  CHECK(rep.center_value < 1e-15);  // MSE at the truth

  SUBCASE("stencil must stay interior") {
    std::vector<double> edge = point;
    edge[0] = -0.8501;  // within h of the rho box edge
    CHECK_THROWS_AS(hessian(pr, edge, steps), std::invalid_argument);
  }
}

TEST_CASE("surface CSV round trip") {
  const QuoteSurface s = synth_market(ModelKind::Heston, midpoint_truth(),
                                      MarketGrid::table_default(), 0.03, 1.0,
                                      fast_cos(), IvConfig{});
  const auto tmp =
      std::filesystem::temp_directory_path() / "svcal_surface_test.csv";
  surface_to_csv(s, tmp.string());
  const QuoteSurface back = surface_from_csv(tmp.string());
  REQUIRE(back.quotes.size() == s.quotes.size());
  for (std::size_t i = 0; i < s.quotes.size(); ++i) {
    CHECK(back.quotes[i].moneyness == s.quotes[i].moneyness);
    CHECK(back.quotes[i].tau == s.quotes[i].tau);
    CHECK(back.quotes[i].rate == s.quotes[i].rate);
    CHECK(back.quotes[i].kind == s.quotes[i].kind);
    CHECK(back.observed[i] == s.observed[i]);
    CHECK(back.weights[i] == s.weights[i]);
  }
  std::filesystem::remove(tmp);
}

TEST_CASE("problem JSON: canonical free order and weight overrides") {
  const auto dir = std::filesystem::temp_directory_path();
  const auto surface_path = (dir / "svcal_problem_surface.csv").string();
  const auto problem_path = (dir / "svcal_problem.json").string();
  const QuoteSurface s = synth_market(ModelKind::Heston, midpoint_truth(),
                                      MarketGrid::table_default(), 0.03, 1.0,
                                      fast_cos(), IvConfig{});
  surface_to_csv(s, surface_path);
  {
    std::ofstream out(problem_path);
    out << R"({
      "model": "heston",
      "backend": "cos",
      "surface_file": ")" << surface_path << R"(",
      "free": {"nu_bar": [0.05, 0.45], "rho": [-0.85, -0.05], "gamma": [0.05, 0.75]},
      "fixed": {"kappa": 0.75, "nu0": 0.25},
      "weights": {"atm": 5000}
    })";
  }
  const CalibrationProblem pr = problem_from_json_file(problem_path);
  CHECK(pr.free_names ==
        std::vector<std::string>{"rho", "gamma", "nu_bar"});
  CHECK(pr.fixed.at("kappa") == 0.75);
  CHECK(pr.resolved_lambda_bar() == 0.0);
  for (std::size_t i = 0; i < pr.surface.quotes.size(); ++i) {
    if (pr.surface.quotes[i].moneyness == 1.0) {
      CHECK(pr.surface.weights[i] == 5000.0);
    } else {
      CHECK(pr.surface.weights[i] == 1.0);
    }
  }
  std::filesystem::remove(problem_path);
  std::filesystem::remove(surface_path);
}
