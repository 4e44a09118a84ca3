#include "svcal/calibrate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"
#include "svcal/parallel.hpp"

namespace svcal {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double l2_norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

// Model IV (or price, per value_kind) for one quote under full parameters.
double model_value_cos(const CalibrationProblem& pr, const BatesParams& p,
                       const Quote& q) {
  const double price = pr.model == ModelKind::Heston
                           ? cos_price(p.heston, q, pr.cos)
                           : cos_price(p, q, pr.cos);
  if (pr.surface.value_kind == ValueKind::Price) return price;
  return implied_vol(price, q, pr.iv);
}

// Energy of one candidate through the COS+Brent backend; residuals optional.
double candidate_energy_cos(const CalibrationProblem& pr,
                            std::span<const double> cand,
                            std::vector<double>* residuals) {
  BatesParams p;
  try {
    p = pr.assemble(cand);
    if (pr.model == ModelKind::Heston) {
      p.heston.validate();
    } else {
      p.validate();
    }
  } catch (const std::invalid_argument&) {
    return kInf;
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < pr.surface.quotes.size(); ++i) {
    double value;
    try {
      value = model_value_cos(pr, p, pr.surface.quotes[i]);
    } catch (const PricingError&) {
      return kInf;
    }
    const double res = value - pr.surface.observed[i];
    if (residuals) (*residuals)[i] = res;
    acc += pr.surface.weights[i] * res * res;
  }
  return acc + pr.resolved_lambda_bar() * l2_norm(cand);
}

// Surrogate path: the candidate x quote grid is packed into one forward
// batch. Residual accumulation stays in quote order per candidate.
std::vector<double> energies_surrogate(const CalibrationProblem& pr,
                                       const Matrix& candidates,
                                       std::vector<double>* residuals_best,
                                       std::size_t residual_row) {
  const Network& net = *pr.surrogate;
  const std::size_t nq = pr.surface.quotes.size();
  const std::size_t nc = candidates.rows;
  const auto names = param_names(pr.model);
  const std::size_t dim = 3 + names.size();
  require(static_cast<std::size_t>(net.spec.input_dim) == dim,
          "surrogate input dimension does not match the model");

  Matrix batch(nc * nq, dim);
  std::vector<char> invalid(nc, 0);
  for (std::size_t c = 0; c < nc; ++c) {
    BatesParams p;
    try {
      p = pr.assemble(candidates.row(c));
    } catch (const std::invalid_argument&) {
      invalid[c] = 1;
      continue;
    }
    for (std::size_t q = 0; q < nq; ++q) {
      auto row = batch.row(c * nq + q);
      const Quote& quote = pr.surface.quotes[q];
      row[0] = quote.moneyness;
      row[1] = quote.tau;
      row[2] = quote.rate;
      for (std::size_t k = 0; k < names.size(); ++k) {
        row[3 + k] = param_value(p, names[k]);
      }
    }
  }
  const std::vector<double> pred = forward(net, batch);

  std::vector<double> energies(nc, kInf);
  for (std::size_t c = 0; c < nc; ++c) {
    if (invalid[c]) continue;
    double acc = 0.0;
    bool ok = true;
    for (std::size_t q = 0; q < nq; ++q) {
      double value = pred[c * nq + q];
      if (pr.surface.value_kind == ValueKind::Price) {
        const Quote& quote = pr.surface.quotes[q];
        if (value <= 0.0) {
          ok = false;
          break;
        }
        value = bs_price(value, quote);
      }
      const double res = value - pr.surface.observed[q];
      if (residuals_best && c == residual_row) (*residuals_best)[q] = res;
      acc += pr.surface.weights[q] * res * res;
    }
    if (!ok || !std::isfinite(acc)) continue;
    energies[c] =
        acc + pr.resolved_lambda_bar() * l2_norm(candidates.row(c));
  }
  return energies;
}

}  // namespace

void CalibrationProblem::validate() const {
  surface.validate();
  cos.validate();
  iv.validate();
  require(free_names.size() == free_boxes.size(),
          "free_names and free_boxes must align");
  require(!free_names.empty(), "at least one free parameter");
  const auto names = param_names(model);
  std::set<std::string> seen;
  for (const auto& n : free_names) {
    require(std::find(names.begin(), names.end(), n) != names.end(),
            "unknown free parameter: " + n);
    require(seen.insert(n).second, "duplicate free parameter: " + n);
  }
  for (const auto& [n, v] : fixed) {
    (void)v;
    require(std::find(names.begin(), names.end(), n) != names.end(),
            "unknown fixed parameter: " + n);
    require(!seen.count(n), "parameter both free and fixed: " + n);
    seen.insert(n);
  }
  require(seen.size() == names.size(),
          "free + fixed must cover the model parameters exactly once");
  for (const auto& b : free_boxes) {
    require(b[0] < b[1], "degenerate search box");
  }
  if (backend == BackendKind::Surrogate) {
    require(surrogate != nullptr, "surrogate backend needs a network");
    // search boxes must sit inside the training ranges
    const auto names_all = param_names(model);
    for (std::size_t i = 0; i < free_names.size(); ++i) {
      const auto it =
          std::find(names_all.begin(), names_all.end(), free_names[i]);
      const std::size_t dim = 3 + (it - names_all.begin());
      const auto& r = surrogate->input_ranges.at(dim);
      require(free_boxes[i][0] >= r[0] && free_boxes[i][1] <= r[1],
              "search box outside surrogate training range: " + free_names[i]);
    }
  }
}

BatesParams CalibrationProblem::assemble(
    std::span<const double> free_values) const {
  require(free_values.size() == free_names.size(),
          "free value count mismatch");
  BatesParams p{};
  for (const auto& [n, v] : fixed) set_param_value(p, n, v);
  for (std::size_t i = 0; i < free_names.size(); ++i) {
    set_param_value(p, free_names[i], free_values[i]);
  }
  return p;
}

std::vector<double> objective(const CalibrationProblem& problem,
                              const Matrix& candidates) {
  if (problem.backend == BackendKind::Surrogate) {
    return energies_surrogate(problem, candidates, nullptr, 0);
  }
  std::vector<double> energies(candidates.rows);
  par::parallel_for(candidates.rows, [&](std::size_t c) {
    energies[c] = candidate_energy_cos(problem, candidates.row(c), nullptr);
  });
  return energies;
}

double objective_single(const CalibrationProblem& problem,
                        std::span<const double> candidate,
                        std::vector<double>* residuals) {
  if (residuals) residuals->assign(problem.surface.quotes.size(), 0.0);
  if (problem.backend == BackendKind::Surrogate) {
    Matrix m(1, candidate.size());
    std::copy(candidate.begin(), candidate.end(), m.row(0).begin());
    return energies_surrogate(problem, m, residuals, 0)[0];
  }
  return candidate_energy_cos(problem, candidate, residuals);
}

MarketGrid MarketGrid::table_default() {
  MarketGrid g;
  for (int i = 0; i < 5; ++i) g.moneyness.push_back(0.85 + 0.075 * i);
  g.maturities = {0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0};
  return g;
}

QuoteSurface synth_market(ModelKind model, const BatesParams& truth,
                          const MarketGrid& grid, double rate, double weight,
                          const CosConfig& cos, const IvConfig& iv,
                          std::size_t* outside_envelope) {
  if (model == ModelKind::Heston) {
    truth.heston.validate();
  } else {
    truth.validate();
  }
  QuoteSurface s;
  s.value_kind = ValueKind::ImpliedVol;
  for (double m : grid.moneyness) {
    for (double tau : grid.maturities) {
      s.quotes.push_back(
          {m, tau, rate, m < 1.0 ? OptionKind::Call : OptionKind::Put});
    }
  }
  s.observed.assign(s.quotes.size(), 0.0);
  s.weights.assign(s.quotes.size(), weight);
  std::vector<std::string> errors(s.quotes.size());
  par::parallel_for(s.quotes.size(), [&](std::size_t i) {
    try {
      const Quote& q = s.quotes[i];
      const double price = model == ModelKind::Heston
                               ? cos_price(truth.heston, q, cos)
                               : cos_price(truth, q, cos);
      s.observed[i] = implied_vol(price, q, iv);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i].empty()) {
      throw PricingError("synthetic grid point " + std::to_string(i) + ": " +
                         errors[i]);
    }
  }
  if (outside_envelope) {
    *outside_envelope = static_cast<std::size_t>(
        std::count_if(s.observed.begin(), s.observed.end(),
                      [](double v) { return !(v > 0.2 && v < 0.5); }));
  }
  return s;
}

CalibrationResult calibrate(const CalibrationProblem& problem, DEConfig de,
                            bool compute_ground_error) {
  problem.validate();
  de.bounds = problem.free_boxes;
  const auto t0 = std::chrono::steady_clock::now();
  const DEResult opt = de_minimize(
      [&](const Matrix& cands) { return objective(problem, cands); }, de);
  const auto t1 = std::chrono::steady_clock::now();

  CalibrationResult r;
  r.recovered = opt.best;
  r.full_params = problem.assemble(opt.best);
  r.objective_value = opt.best_energy;
  r.mean_objective =
      opt.best_energy / static_cast<double>(problem.surface.quotes.size());
  r.function_evaluations = opt.function_evaluations;
  r.generations = opt.generations;
  r.converged = opt.converged;
  r.wall_time_seconds = std::chrono::duration<double>(t1 - t0).count();
  r.trace = opt.trace;
  objective_single(problem, opt.best, &r.residuals);

  if (compute_ground_error) {
    double acc = 0.0;
    for (std::size_t i = 0; i < problem.surface.quotes.size(); ++i) {
      const Quote& q = problem.surface.quotes[i];
      const double price = problem.model == ModelKind::Heston
                               ? cos_price(r.full_params.heston, q, problem.cos)
                               : cos_price(r.full_params, q, problem.cos);
      const double iv_model = implied_vol(price, q, problem.iv);
      const double target =
          problem.surface.value_kind == ValueKind::ImpliedVol
              ? problem.surface.observed[i]
              : implied_vol(problem.surface.observed[i], q, problem.iv);
      acc += (iv_model - target) * (iv_model - target);
    }
    r.ground_total_squared_error = acc;
  }
  return r;
}

std::vector<double> SensitivityReport::diagonal() const {
  std::vector<double> d(hessian.rows);
  for (std::size_t i = 0; i < hessian.rows; ++i) d[i] = hessian.at(i, i);
  return d;
}

double SensitivityReport::max_min_diag_ratio() const {
  const auto d = diagonal();
  const auto [lo, hi] = std::minmax_element(d.begin(), d.end());
  return *hi / *lo;
}

Matrix finite_difference_hessian(
    const std::function<double(std::span<const double>)>& fn,
    std::span<const double> point, std::span<const double> steps) {
  const std::size_t n = point.size();
  require(steps.size() == n, "steps size mismatch");
  Matrix h(n, n);
  std::vector<double> x(point.begin(), point.end());
  const double f0 = fn(x);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = point[i] + steps[i];
    const double fp = fn(x);
    x[i] = point[i] - steps[i];
    const double fm = fn(x);
    x[i] = point[i];
    h.at(i, i) = (fp - 2.0 * f0 + fm) / (steps[i] * steps[i]);
    for (std::size_t j = 0; j < i; ++j) {
      x[i] = point[i] + steps[i];
      x[j] = point[j] + steps[j];
      const double fpp = fn(x);
      x[j] = point[j] - steps[j];
      const double fpm = fn(x);
      x[i] = point[i] - steps[i];
      x[j] = point[j] + steps[j];
      const double fmp = fn(x);
      x[j] = point[j] - steps[j];
      const double fmm = fn(x);
      x[i] = point[i];
      x[j] = point[j];
      const double v = (fpp - fpm - fmp + fmm) / (4.0 * steps[i] * steps[j]);
      h.at(i, j) = v;
      h.at(j, i) = v;
    }
  }
  return h;
}

std::vector<double> default_hessian_steps(const CalibrationProblem& problem) {
  std::vector<double> steps;
  steps.reserve(problem.free_boxes.size());
  for (const auto& b : problem.free_boxes) {
    steps.push_back(1e-3 * (b[1] - b[0]));
  }
  return steps;
}

SensitivityReport hessian(const CalibrationProblem& problem,
                          std::span<const double> point,
                          std::span<const double> steps) {
  problem.validate();
  const std::size_t n = point.size();
  require(n == problem.free_names.size(), "point dimension mismatch");
  require(steps.size() == n, "steps size mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    require(point[i] - steps[i] >= problem.free_boxes[i][0] &&
                point[i] + steps[i] <= problem.free_boxes[i][1],
            "stencil point infeasible for " + problem.free_names[i]);
  }

  // lambda_bar off, uniform 1/N weights: pure MSE surface
  CalibrationProblem mse = problem;
  mse.lambda_bar = 0.0;
  mse.surface.weights.assign(
      mse.surface.quotes.size(),
      1.0 / static_cast<double>(mse.surface.quotes.size()));

  // all stencil points evaluated as one batch
  std::vector<std::vector<double>> pts;
  pts.emplace_back(point.begin(), point.end());
  auto push_shift = [&](std::initializer_list<std::pair<std::size_t, double>>
                            shifts) {
    std::vector<double> x(point.begin(), point.end());
    for (const auto& [d, s] : shifts) x[d] += s;
    pts.push_back(std::move(x));
  };
  for (std::size_t i = 0; i < n; ++i) {
    push_shift({{i, steps[i]}});
    push_shift({{i, -steps[i]}});
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      push_shift({{i, steps[i]}, {j, steps[j]}});
      push_shift({{i, steps[i]}, {j, -steps[j]}});
      push_shift({{i, -steps[i]}, {j, steps[j]}});
      push_shift({{i, -steps[i]}, {j, -steps[j]}});
    }
  }
  Matrix batch(pts.size(), n);
  for (std::size_t k = 0; k < pts.size(); ++k) {
    std::copy(pts[k].begin(), pts[k].end(), batch.row(k).begin());
  }
  const std::vector<double> f = objective(mse, batch);
  for (double v : f) {
    if (!std::isfinite(v)) throw PricingError("hessian stencil point failed");
  }

  SensitivityReport rep;
  rep.names = problem.free_names;
  rep.hessian = Matrix(n, n);
  rep.center_value = f[0];
  std::size_t k = 1;
  for (std::size_t i = 0; i < n; ++i) {
    const double fp = f[k++];
    const double fm = f[k++];
    rep.hessian.at(i, i) = (fp - 2.0 * f[0] + fm) / (steps[i] * steps[i]);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const double fpp = f[k++];
      const double fpm = f[k++];
      const double fmp = f[k++];
      const double fmm = f[k++];
      const double v = (fpp - fpm - fmp + fmm) / (4.0 * steps[i] * steps[j]);
      rep.hessian.at(i, j) = v;
      rep.hessian.at(j, i) = v;
    }
  }

  double max_abs = 0.0, max_asym = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      max_abs = std::max(max_abs, std::abs(rep.hessian.at(i, j)));
      max_asym = std::max(
          max_asym, std::abs(rep.hessian.at(i, j) - rep.hessian.at(j, i)));
    }
  }
  rep.asymmetry = max_abs > 0.0 ? max_asym / max_abs : 0.0;
  // (H + H^T)/2; the shared four-point stencil already makes this a no-op
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const double v = 0.5 * (rep.hessian.at(i, j) + rep.hessian.at(j, i));
      rep.hessian.at(i, j) = v;
      rep.hessian.at(j, i) = v;
    }
  }
  return rep;
}

void surface_to_csv(const QuoteSurface& surface, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write surface: " + path);
  out << std::setprecision(17);
  out << "m,tau,r,kind,observed,weight\n";
  for (std::size_t i = 0; i < surface.quotes.size(); ++i) {
    const Quote& q = surface.quotes[i];
    out << q.moneyness << "," << q.tau << "," << q.rate << ","
        << (q.kind == OptionKind::Call ? "call" : "put") << ","
        << surface.observed[i] << "," << surface.weights[i] << "\n";
  }
}

QuoteSurface surface_from_csv(const std::string& path, ValueKind value_kind) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open surface: " + path);
  QuoteSurface s;
  s.value_kind = value_kind;
  std::string line;
  if (!std::getline(in, line)) throw IoError("surface missing header: " + path);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6) throw IoError("surface row needs 6 columns");
    Quote q;
    q.moneyness = std::stod(cells[0]);
    q.tau = std::stod(cells[1]);
    q.rate = std::stod(cells[2]);
    if (cells[3] == "call") {
      q.kind = OptionKind::Call;
    } else if (cells[3] == "put") {
      q.kind = OptionKind::Put;
    } else {
      throw IoError("surface kind must be 'call' or 'put'");
    }
    s.quotes.push_back(q);
    s.observed.push_back(std::stod(cells[4]));
    s.weights.push_back(std::stod(cells[5]));
  }
  s.validate();
  return s;
}

CalibrationProblem problem_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open problem file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed problem JSON: ") + e.what());
  }

  CalibrationProblem p;
  const std::string model = j.value("model", "heston");
  p.model = model == "bates" ? ModelKind::Bates : ModelKind::Heston;
  const std::string backend = j.value("backend", "cos");
  if (backend == "cos" || backend == "cos_brent") {
    p.backend = BackendKind::CosBrent;
  } else if (backend == "surrogate" || backend == "ann") {
    p.backend = BackendKind::Surrogate;
  } else {
    throw IoError("unknown backend: " + backend);
  }
  if (p.backend == BackendKind::Surrogate) {
    if (!j.contains("weights_file")) {
      throw IoError("surrogate backend needs weights_file");
    }
    p.surrogate = std::make_shared<Network>(
        load_weights(j.at("weights_file").get<std::string>()));
  }
  const ValueKind vk = j.value("value_kind", std::string("iv")) == "price"
                           ? ValueKind::Price
                           : ValueKind::ImpliedVol;
  p.surface = surface_from_csv(j.at("surface_file").get<std::string>(), vk);

  // canonical parameter order, independent of JSON key order
  const auto& free = j.at("free");
  for (const auto& name : param_names(p.model)) {
    if (free.contains(name)) {
      const auto& box = free.at(name);
      p.free_names.push_back(name);
      p.free_boxes.push_back({box.at(0).get<double>(), box.at(1).get<double>()});
    }
  }
  if (p.free_names.size() != free.size()) {
    throw IoError("free contains parameters unknown to the model");
  }
  if (j.contains("fixed")) {
    for (const auto& [k, v] : j.at("fixed").items()) {
      p.fixed[k] = v.get<double>();
    }
  }
  if (j.contains("lambda_bar")) p.lambda_bar = j.at("lambda_bar").get<double>();

  if (j.contains("weights")) {
    const auto& w = j.at("weights");
    if (w.is_number()) {
      p.surface.weights.assign(p.surface.quotes.size(), w.get<double>());
    } else if (w.is_array()) {
      if (w.size() != p.surface.quotes.size()) {
        throw IoError("per-quote weights length mismatch");
      }
      p.surface.weights = w.get<std::vector<double>>();
    } else if (w.is_object() && w.contains("atm")) {
      const double atm = w.at("atm").get<double>();
      for (std::size_t i = 0; i < p.surface.quotes.size(); ++i) {
        p.surface.weights[i] =
            p.surface.quotes[i].moneyness == 1.0 ? atm : 1.0;
      }
    } else {
      throw IoError("weights must be a scalar, array, or {atm: w}");
    }
  }
  if (j.contains("cos")) {
    const auto& c = j.at("cos");
    p.cos.n_terms = c.value("n_terms", p.cos.n_terms);
    p.cos.l_scale = c.value("l_scale", p.cos.l_scale);
    p.cos.max_widenings = c.value("max_widenings", p.cos.max_widenings);
  }
  return p;
}

std::string result_to_json(const CalibrationResult& r,
                           const CalibrationProblem& p) {
  nlohmann::json j;
  nlohmann::json rec;
  for (std::size_t i = 0; i < p.free_names.size(); ++i) {
    rec[p.free_names[i]] = r.recovered[i];
  }
  j["recovered"] = rec;
  j["full_params"] = nlohmann::json::parse(params_to_json(r.full_params));
  j["objective"] = r.objective_value;
  j["mean_objective"] = r.mean_objective;
  j["function_evaluations"] = r.function_evaluations;
  j["generations"] = r.generations;
  j["converged"] = r.converged;
  j["wall_time_seconds"] = r.wall_time_seconds;
  j["residuals"] = r.residuals;
  if (r.ground_total_squared_error) {
    j["ground_total_squared_error"] = *r.ground_total_squared_error;
  }
  return j.dump(2);
}

}  // namespace svcal
