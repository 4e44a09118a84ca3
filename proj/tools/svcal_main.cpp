// svcal: stochastic-volatility calibration toolkit.
//
// Subcommands cover the full pipeline: price/iv (COS pricing and implied
// vol), synth (synthetic market surfaces), gen/split (training data),
// train/eval (the IV surrogate), calibrate/hessian (the backward pass), and
// landscape (objective grid scans). Every run writes a manifest JSON next to
// its primary output with the fully resolved configuration.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "svcal/calibrate.hpp"
#include "svcal/datagen.hpp"
#include "svcal/parallel.hpp"

using namespace svcal;
using nlohmann::json;

namespace {

struct GlobalOpts {
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::string config_path;
  CosConfig cos;
  IvConfig iv;
  DEConfig de_defaults;
  TrainConfig train_defaults;
};

void apply_config_file(GlobalOpts& g) {
  if (g.config_path.empty()) return;
  std::ifstream in(g.config_path);
  if (!in) throw IoError("cannot open config file: " + g.config_path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed config JSON: ") + e.what());
  }
  if (j.contains("cos")) {
    const auto& c = j["cos"];
    g.cos.n_terms = c.value("n_terms", g.cos.n_terms);
    g.cos.l_scale = c.value("l_scale", g.cos.l_scale);
    g.cos.max_widenings = c.value("max_widenings", g.cos.max_widenings);
  }
  if (j.contains("iv")) {
    const auto& c = j["iv"];
    g.iv.lo = c.value("lo", g.iv.lo);
    g.iv.hi = c.value("hi", g.iv.hi);
    g.iv.tol = c.value("tol", g.iv.tol);
    g.iv.max_iter = c.value("max_iter", g.iv.max_iter);
  }
  if (j.contains("de")) {
    const auto& c = j["de"];
    g.de_defaults.pop_size = c.value("pop_size", g.de_defaults.pop_size);
    g.de_defaults.f_low = c.value("f_low", g.de_defaults.f_low);
    g.de_defaults.f_high = c.value("f_high", g.de_defaults.f_high);
    g.de_defaults.crossover = c.value("crossover", g.de_defaults.crossover);
    g.de_defaults.tol = c.value("tol", g.de_defaults.tol);
    g.de_defaults.max_generations =
        c.value("max_generations", g.de_defaults.max_generations);
    if (c.value("strategy", std::string("best1bin")) == "rand1bin") {
      g.de_defaults.strategy = DEStrategy::Rand1Bin;
    }
  }
  if (j.contains("train")) {
    const auto& c = j["train"];
    g.train_defaults.initial_lr = c.value("initial_lr", g.train_defaults.initial_lr);
    g.train_defaults.epochs = c.value("epochs", g.train_defaults.epochs);
    g.train_defaults.batch_size = c.value("batch_size", g.train_defaults.batch_size);
    g.train_defaults.lr_halving_period =
        c.value("lr_halving_period", g.train_defaults.lr_halving_period);
    g.train_defaults.dropout_rate =
        c.value("dropout_rate", g.train_defaults.dropout_rate);
  }
}

json cos_json(const CosConfig& c) {
  return {{"n_terms", c.n_terms},
          {"l_scale", c.l_scale},
          {"max_widenings", c.max_widenings}};
}

json iv_json(const IvConfig& c) {
  return {{"lo", c.lo}, {"hi", c.hi}, {"tol", c.tol}, {"max_iter", c.max_iter}};
}

// Reproducibility record written next to the primary output.
class Manifest {
 public:
  Manifest(std::string subcommand, std::string primary_output)
      : start_(std::chrono::steady_clock::now()),
        primary_output_(std::move(primary_output)) {
    doc_["subcommand"] = std::move(subcommand);
    doc_["tool_version"] = kVersion;
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof buf, "%FT%TZ", std::gmtime(&t));
    doc_["timestamp"] = buf;
  }
  json& config() { return doc_["config"]; }
  void input(const std::string& key, const std::string& path) {
    doc_["inputs"][key] = path;
  }
  void output(const std::string& key, const std::string& path) {
    doc_["outputs"][key] = path;
  }
  void note(const std::string& key, const json& value) { doc_[key] = value; }
  void write() {
    doc_["wall_time_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
            .count();
    std::ofstream out(primary_output_ + ".manifest.json");
    if (!out) throw IoError("cannot write manifest for: " + primary_output_);
    out << doc_.dump(2) << "\n";
  }

 private:
  std::chrono::steady_clock::time_point start_;
  std::string primary_output_;
  json doc_;
};

ModelKind resolve_model(const std::string& flag, const BatesParams& p) {
  if (flag == "heston") return ModelKind::Heston;
  if (flag == "bates") return ModelKind::Bates;
  // auto: jump parameters present means Bates
  return (p.lambda_j != 0.0 || p.mu_j != 0.0 || p.nu_j_sq != 0.0)
             ? ModelKind::Bates
             : ModelKind::Heston;
}

std::vector<Quote> quotes_from_csv(const std::string& path,
                                   bool expect_price,
                                   std::vector<double>* prices) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open quotes file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("quotes file missing header: " + path);
  std::vector<Quote> quotes;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    const std::size_t expected = expect_price ? 5 : 4;
    if (cells.size() != expected) {
      throw IoError("quote row needs " + std::to_string(expected) +
                    " columns: " + path);
    }
    Quote q;
    q.moneyness = std::stod(cells[0]);
    q.tau = std::stod(cells[1]);
    q.rate = std::stod(cells[2]);
    if (cells[3] == "call") {
      q.kind = OptionKind::Call;
    } else if (cells[3] == "put") {
      q.kind = OptionKind::Put;
    } else {
      throw IoError("quote kind must be 'call' or 'put'");
    }
    quotes.push_back(q);
    if (expect_price) prices->push_back(std::stod(cells[4]));
  }
  if (quotes.empty()) throw IoError("quotes file has no rows: " + path);
  return quotes;
}

SamplingRanges ranges_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open ranges file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed ranges JSON: ") + e.what());
  }
  SamplingRanges r;
  for (const auto& d : j) {
    r.dims.push_back({d.at("name").get<std::string>(),
                      d.at("low").get<double>(), d.at("high").get<double>(),
                      d.value("open_low", false)});
  }
  return r;
}

std::vector<double> parse_csv_doubles(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(std::stod(cell));
  return out;
}

struct VarySpec {
  std::string name;
  double lo, hi;
  int n;
};

VarySpec parse_vary(const std::string& text) {
  std::stringstream ss(text);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, ':')) parts.push_back(part);
  if (parts.size() != 4) {
    throw std::invalid_argument("--vary expects name:lo:hi:n");
  }
  return {parts[0], std::stod(parts[1]), std::stod(parts[2]),
          std::stoi(parts[3])};
}

int run_price(const GlobalOpts& g, const std::string& params_path,
              const std::string& quotes_path, const std::string& out_path,
              const std::string& model_flag) {
  Manifest man("price", out_path);
  const BatesParams p = params_from_json_file(params_path);
  const ModelKind model = resolve_model(model_flag, p);
  const auto quotes = quotes_from_csv(quotes_path, false, nullptr);
  const auto prices = model == ModelKind::Heston
                          ? price_surface(p.heston, quotes, g.cos)
                          : price_surface(p, quotes, g.cos);
  std::ofstream out(out_path);
  if (!out) throw IoError("cannot write prices: " + out_path);
  out << std::setprecision(17) << "m,tau,r,kind,price\n";
  for (std::size_t i = 0; i < quotes.size(); ++i) {
    const Quote& q = quotes[i];
    out << q.moneyness << "," << q.tau << "," << q.rate << ","
        << (q.kind == OptionKind::Call ? "call" : "put") << "," << prices[i]
        << "\n";
  }
  man.input("params", params_path);
  man.input("quotes", quotes_path);
  man.output("prices", out_path);
  man.config() = {{"model", model == ModelKind::Heston ? "heston" : "bates"},
                  {"cos", cos_json(g.cos)}};
  man.write();
  std::printf("priced %zu quotes -> %s\n", quotes.size(), out_path.c_str());
  return 0;
}

int run_iv(const GlobalOpts& g, const std::string& quotes_path,
           const std::string& out_path) {
  Manifest man("iv", out_path);
  std::vector<double> prices;
  const auto quotes = quotes_from_csv(quotes_path, true, &prices);
  std::ofstream out(out_path);
  if (!out) throw IoError("cannot write IVs: " + out_path);
  out << std::setprecision(17) << "m,tau,r,kind,price,iv\n";
  for (std::size_t i = 0; i < quotes.size(); ++i) {
    const Quote& q = quotes[i];
    double sigma;
    try {
      sigma = implied_vol(prices[i], q, g.iv);
    } catch (const PricingError& e) {
      throw PricingError("row " + std::to_string(i) + ": " + e.what());
    }
    out << q.moneyness << "," << q.tau << "," << q.rate << ","
        << (q.kind == OptionKind::Call ? "call" : "put") << "," << prices[i]
        << "," << sigma << "\n";
  }
  man.input("quotes", quotes_path);
  man.output("ivs", out_path);
  man.config() = {{"iv", iv_json(g.iv)}};
  man.write();
  std::printf("inverted %zu prices -> %s\n", quotes.size(), out_path.c_str());
  return 0;
}

int run_synth(const GlobalOpts& g, const std::string& params_path,
              const std::string& out_path, const std::string& model_flag,
              double rate, double weight, double atm_weight,
              const std::string& moneyness_csv,
              const std::string& maturities_csv) {
  Manifest man("synth", out_path);
  const BatesParams truth = params_from_json_file(params_path);
  const ModelKind model = resolve_model(model_flag, truth);
  MarketGrid grid = MarketGrid::table_default();
  if (!moneyness_csv.empty()) grid.moneyness = parse_csv_doubles(moneyness_csv);
  if (!maturities_csv.empty()) grid.maturities = parse_csv_doubles(maturities_csv);
  std::size_t outside = 0;
  QuoteSurface s =
      synth_market(model, truth, grid, rate, weight, g.cos, g.iv, &outside);
  if (atm_weight > 0.0) {
    for (std::size_t i = 0; i < s.quotes.size(); ++i) {
      s.weights[i] = s.quotes[i].moneyness == 1.0 ? atm_weight : 1.0;
    }
  }
  surface_to_csv(s, out_path);
  if (outside > 0) {
    std::printf("note: %zu IVs fall outside the (0.2, 0.5) envelope\n", outside);
  }
  man.input("params", params_path);
  man.output("surface", out_path);
  man.config() = {{"model", model == ModelKind::Heston ? "heston" : "bates"},
                  {"rate", rate},
                  {"weight", weight},
                  {"atm_weight", atm_weight},
                  {"moneyness", grid.moneyness},
                  {"maturities", grid.maturities},
                  {"cos", cos_json(g.cos)},
                  {"iv", iv_json(g.iv)}};
  man.note("outside_envelope", outside);
  man.write();
  std::printf("synthesized %zu quotes -> %s\n", s.quotes.size(),
              out_path.c_str());
  return 0;
}

int run_gen(const GlobalOpts& g, const std::string& model_flag, long n,
            std::uint64_t seed, const std::string& ranges_path,
            const std::string& out_path) {
  Manifest man("gen", out_path);
  const ModelKind model =
      model_flag == "bates" ? ModelKind::Bates : ModelKind::Heston;
  SamplingRanges ranges = model == ModelKind::Bates
                              ? SamplingRanges::bates_defaults()
                              : SamplingRanges::heston_defaults();
  if (!ranges_path.empty()) {
    ranges = ranges_from_file(ranges_path);
    man.input("ranges", ranges_path);
  }
  const Dataset ds = build_dataset(model, ranges,
                                   static_cast<std::size_t>(n), seed, g.cos,
                                   g.iv);
  save_dataset(ds, out_path);
  man.output("dataset", out_path);
  man.output("metadata", out_path + ".meta.json");
  man.config() = {{"model", model_flag},
                  {"n", n},
                  {"seed", seed},
                  {"cos", cos_json(g.cos)},
                  {"iv", iv_json(g.iv)}};
  man.note("rows", ds.size());
  man.note("dropped", ds.dropped);
  man.write();
  std::printf("generated %zu rows (%zu dropped) -> %s\n", ds.size(),
              ds.dropped, out_path.c_str());
  return 0;
}

int run_split(const std::string& data_path, const std::string& fractions_csv,
              std::uint64_t seed, const std::string& prefix) {
  Manifest man("split", prefix + "_train.csv");
  const auto f = parse_csv_doubles(fractions_csv);
  if (f.size() != 3) throw std::invalid_argument("--fractions expects three values");
  const Dataset ds = load_dataset(data_path);
  const auto parts = split_dataset(ds, {f[0], f[1], f[2]}, seed);
  const std::array<std::string, 3> names{prefix + "_train.csv",
                                         prefix + "_val.csv",
                                         prefix + "_test.csv"};
  for (int i = 0; i < 3; ++i) {
    save_dataset(parts[i], names[i]);
    man.output(i == 0 ? "train" : i == 1 ? "val" : "test", names[i]);
  }
  man.input("dataset", data_path);
  man.config() = {{"fractions", f}, {"seed", seed}};
  man.write();
  std::printf("split %zu rows into %zu/%zu/%zu\n", ds.size(), parts[0].size(),
              parts[1].size(), parts[2].size());
  return 0;
}

int run_train(const GlobalOpts& g, const std::string& train_path,
              const std::string& val_path, const std::string& out_path,
              int layers, int width, std::uint64_t seed,
              const std::string& trace_path) {
  Manifest man("train", out_path);
  const Dataset train_ds = load_dataset(train_path);
  const Dataset val_ds = load_dataset(val_path);

  NetworkSpec spec;
  spec.input_dim = static_cast<int>(train_ds.n_inputs);
  spec.hidden_layers = layers;
  spec.hidden_width = width;
  spec.seed = seed;
  std::vector<std::array<double, 2>> ranges;
  for (const auto& d : train_ds.ranges.dims) ranges.push_back(d.effective());
  Network net = make_network(spec, ranges);

  TrainConfig cfg = g.train_defaults;
  cfg.seed = seed;
  const TrainTrace trace = train(net, train_ds, val_ds, cfg);
  save_weights(net, out_path);

  if (!trace_path.empty()) {
    std::ofstream out(trace_path);
    if (!out) throw IoError("cannot write loss trace: " + trace_path);
    out << std::setprecision(17) << "epoch,train_loss,val_loss,lr\n";
    for (std::size_t e = 0; e < trace.train_loss.size(); ++e) {
      out << e << "," << trace.train_loss[e] << "," << trace.val_loss[e] << ","
          << trace.lr[e] << "\n";
    }
    man.output("trace", trace_path);
  }

  const NetMetrics train_m = evaluate(net, train_ds);
  const NetMetrics val_m = evaluate(net, val_ds);
  std::printf("%-10s %-12s %-12s %-12s %-10s\n", "", "MSE", "MAE", "MAPE",
              "R2");
  std::printf("%-10s %-12.3e %-12.3e %-12.3e %-10.7f\n", "Training",
              train_m.mse, train_m.mae, train_m.mape, train_m.r2);
  std::printf("%-10s %-12.3e %-12.3e %-12.3e %-10.7f\n", "Validation",
              val_m.mse, val_m.mae, val_m.mape, val_m.r2);

  man.input("train", train_path);
  man.input("val", val_path);
  man.output("weights", out_path);
  man.config() = {{"hidden_layers", layers},
                  {"hidden_width", width},
                  {"seed", seed},
                  {"epochs", cfg.epochs},
                  {"batch_size", cfg.batch_size},
                  {"initial_lr", cfg.initial_lr},
                  {"lr_halving_period", cfg.lr_halving_period},
                  {"dropout_rate", cfg.dropout_rate},
                  {"parameters", spec.parameter_count()}};
  man.note("final_train_mse", train_m.mse);
  man.note("final_val_mse", val_m.mse);
  man.write();
  return 0;
}

int run_eval(const std::string& weights_path, const std::string& data_path,
             const std::string& out_path) {
  const Network net = load_weights(weights_path);
  const Dataset ds = load_dataset(data_path);
  const NetMetrics m = evaluate(net, ds);
  std::printf("%-10s %-12s %-12s %-12s %-10s\n", "", "MSE", "MAE", "MAPE",
              "R2");
  std::printf("%-10s %-12.3e %-12.3e %-12.3e %-10.7f\n", "Testing", m.mse,
              m.mae, m.mape, m.r2);
  if (!out_path.empty()) {
    Manifest man("eval", out_path);
    std::ofstream out(out_path);
    if (!out) throw IoError("cannot write metrics: " + out_path);
    const json j = {
        {"mse", m.mse}, {"mae", m.mae}, {"mape", m.mape}, {"r2", m.r2}};
    out << j.dump(2) << "\n";
    man.input("weights", weights_path);
    man.input("data", data_path);
    man.output("metrics", out_path);
    man.config() = json::object();
    man.write();
  }
  return 0;
}

int run_calibrate(const GlobalOpts& g, const std::string& problem_path,
                  const std::string& out_path, const std::string& trace_path,
                  bool ground_error, int pop_size, int pop_mult,
                  std::uint64_t seed) {
  Manifest man("calibrate", out_path);
  CalibrationProblem pr = problem_from_json_file(problem_path);
  DEConfig de = g.de_defaults;
  de.seed = seed;
  if (pop_mult > 0) {
    de.pop_size = pop_mult * static_cast<int>(pr.free_names.size());
  }
  if (pop_size > 0) de.pop_size = pop_size;
  const CalibrationResult res = calibrate(pr, de, ground_error);

  std::ofstream out(out_path);
  if (!out) throw IoError("cannot write result: " + out_path);
  out << result_to_json(res, pr) << "\n";
  if (!trace_path.empty()) {
    write_trace_csv(res.trace, trace_path);
    man.output("trace", trace_path);
  }

  man.input("problem", problem_path);
  man.output("result", out_path);
  man.config() = {{"pop_size", de.pop_size},
                  {"strategy", de.strategy == DEStrategy::Best1Bin
                                   ? "best1bin"
                                   : "rand1bin"},
                  {"mutation", {de.f_low, de.f_high}},
                  {"crossover", de.crossover},
                  {"tol", de.tol},
                  {"max_generations", de.max_generations},
                  {"seed", seed},
                  {"lambda_bar", pr.resolved_lambda_bar()}};
  man.write();

  std::printf("J = %.6e  MJ = %.6e  evals = %ld  generations = %d%s\n",
              res.objective_value, res.mean_objective,
              res.function_evaluations, res.generations,
              res.converged ? "" : "  (hit max generations)");
  for (std::size_t i = 0; i < pr.free_names.size(); ++i) {
    std::printf("  %-10s %.6f\n", pr.free_names[i].c_str(), res.recovered[i]);
  }
  if (res.ground_total_squared_error) {
    std::printf("  ground total squared error: %.6e\n",
                *res.ground_total_squared_error);
  }
  return 0;
}

int run_hessian(const std::string& problem_path, const std::string& point_path,
                double rel_step, const std::string& out_path) {
  Manifest man("hessian", out_path);
  const CalibrationProblem pr = problem_from_json_file(problem_path);

  std::ifstream in(point_path);
  if (!in) throw IoError("cannot open point file: " + point_path);
  json jp;
  try {
    in >> jp;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed point JSON: ") + e.what());
  }
  std::vector<double> point;
  for (const auto& name : pr.free_names) {
    if (!jp.contains(name)) throw IoError("point file missing: " + name);
    point.push_back(jp.at(name).get<double>());
  }
  std::vector<double> steps;
  for (const auto& b : pr.free_boxes) steps.push_back(rel_step * (b[1] - b[0]));
  const SensitivityReport rep = hessian(pr, point, steps);

  std::printf("%-8s", "");
  for (const auto& n : rep.names) std::printf(" %-11s", n.c_str());
  std::printf("\n");
  for (std::size_t i = 0; i < rep.names.size(); ++i) {
    std::printf("%-8s", rep.names[i].c_str());
    for (std::size_t j = 0; j <= i; ++j) {
      std::printf(" %+.4e", rep.hessian.at(i, j));
    }
    std::printf("\n");
  }

  json j;
  j["names"] = rep.names;
  json rows = json::array();
  for (std::size_t i = 0; i < rep.names.size(); ++i) {
    const auto row = rep.hessian.row(i);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  j["hessian"] = rows;
  j["diagonal"] = rep.diagonal();
  j["max_min_diag_ratio"] = rep.max_min_diag_ratio();
  j["asymmetry"] = rep.asymmetry;
  j["center_value"] = rep.center_value;
  std::ofstream out(out_path);
  if (!out) throw IoError("cannot write report: " + out_path);
  out << j.dump(2) << "\n";

  man.input("problem", problem_path);
  man.input("point", point_path);
  man.output("report", out_path);
  man.config() = {{"rel_step", rel_step}};
  man.write();
  return 0;
}

int run_landscape(const GlobalOpts& g, const std::string& params_path,
                  const std::string& surface_path, const std::string& vary1,
                  const std::string& vary2, const std::string& out_path) {
  Manifest man("landscape", out_path);
  const BatesParams truth = params_from_json_file(params_path);
  const VarySpec a = parse_vary(vary1);
  const VarySpec b = parse_vary(vary2);
  if (a.name == b.name) {
    throw std::invalid_argument("--vary needs two distinct parameters");
  }

  CalibrationProblem pr;
  pr.model = resolve_model("auto", truth);
  pr.surface = surface_from_csv(surface_path);
  pr.free_names = {a.name, b.name};
  pr.free_boxes = {{a.lo, a.hi + 1e-12}, {b.lo, b.hi + 1e-12}};
  for (const auto& name : param_names(pr.model)) {
    if (name != a.name && name != b.name) {
      pr.fixed[name] = param_value(truth, name);
    }
  }
  pr.lambda_bar = 0.0;
  pr.cos = g.cos;
  pr.iv = g.iv;
  pr.validate();

  Matrix grid(static_cast<std::size_t>(a.n) * b.n, 2);
  for (int i = 0; i < a.n; ++i) {
    const double va = a.lo + (a.hi - a.lo) * i / (a.n - 1);
    for (int j = 0; j < b.n; ++j) {
      const double vb = b.lo + (b.hi - b.lo) * j / (b.n - 1);
      grid.at(static_cast<std::size_t>(i) * b.n + j, 0) = va;
      grid.at(static_cast<std::size_t>(i) * b.n + j, 1) = vb;
    }
  }
  const auto energies = objective(pr, grid);

  double weight_sum = 0.0;
  for (double w : pr.surface.weights) weight_sum += w;
  std::ofstream out(out_path);
  if (!out) throw IoError("cannot write landscape: " + out_path);
  out << std::setprecision(17);
  out << a.name << "," << b.name << ",J,mse,log10_mse\n";
  for (std::size_t k = 0; k < grid.rows; ++k) {
    const double mse = energies[k] / weight_sum;
    out << grid.at(k, 0) << "," << grid.at(k, 1) << "," << energies[k] << ","
        << mse << "," << (mse > 0.0 ? std::log10(mse) : -18.0) << "\n";
  }

  man.input("params", params_path);
  man.input("surface", surface_path);
  man.output("grid", out_path);
  man.config() = {{"vary", {vary1, vary2}}, {"cos", cos_json(g.cos)}};
  man.write();
  std::printf("scanned %zu grid points -> %s\n", grid.rows, out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"svcal: Heston/Bates calibration toolkit"};
  app.require_subcommand(1);

  GlobalOpts g;
  std::uint64_t seed_flag = 0;
  bool seed_given = false;
  app.add_option("--threads", g.threads, "worker threads (0 = all cores)");
  app.add_option("--config", g.config_path,
                 "JSON with cos/iv/de/train overrides");
  app.add_option("--seed", seed_flag, "seed for the chosen subcommand")
      ->each([&](const std::string&) { seed_given = true; });

  // price
  auto* price = app.add_subcommand("price", "COS-price a quote list");
  std::string params_path, quotes_path, out_path, model_flag = "auto";
  price->add_option("--params", params_path)->required();
  price->add_option("--quotes", quotes_path)->required();
  price->add_option("--out", out_path)->required();
  price->add_option("--model", model_flag)
      ->check(CLI::IsMember({"auto", "heston", "bates"}));

  // iv
  auto* iv = app.add_subcommand("iv", "invert Black-Scholes implied vols");
  std::string iv_quotes, iv_out;
  iv->add_option("--quotes", iv_quotes)->required();
  iv->add_option("--out", iv_out)->required();

  // synth
  auto* synth = app.add_subcommand("synth", "synthesize a market surface");
  std::string synth_params, synth_out, synth_model = "auto";
  std::string synth_moneyness, synth_maturities;
  double synth_rate = 0.03, synth_weight = 1.0, synth_atm = 0.0;
  synth->add_option("--params", synth_params)->required();
  synth->add_option("--out", synth_out)->required();
  synth->add_option("--model", synth_model)
      ->check(CLI::IsMember({"auto", "heston", "bates"}));
  synth->add_option("--r", synth_rate, "risk-free rate");
  synth->add_option("--weight", synth_weight, "uniform quote weight");
  synth->add_option("--atm-weight", synth_atm,
                    "weight ATM quotes this much, others 1");
  synth->add_option("--moneyness", synth_moneyness, "comma list override");
  synth->add_option("--maturities", synth_maturities, "comma list override");

  // gen
  auto* gen = app.add_subcommand("gen", "generate a training dataset");
  std::string gen_model = "heston", gen_ranges, gen_out;
  long gen_n = 100000;
  gen->add_option("--model", gen_model)
      ->check(CLI::IsMember({"heston", "bates"}));
  gen->add_option("--n", gen_n, "sample count before filtering");
  gen->add_option("--ranges", gen_ranges, "ranges JSON override");
  gen->add_option("--out", gen_out)->required();

  // split
  auto* split = app.add_subcommand("split", "split a dataset");
  std::string split_data, split_fractions = "0.8,0.1,0.1", split_prefix;
  split->add_option("--data", split_data)->required();
  split->add_option("--fractions", split_fractions);
  split->add_option("--out-prefix", split_prefix)->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "train the IV surrogate");
  std::string train_data, train_val, train_out, train_trace;
  int train_layers = 4, train_width = 200;
  train_cmd->add_option("--data", train_data)->required();
  train_cmd->add_option("--val", train_val)->required();
  train_cmd->add_option("--out", train_out)->required();
  train_cmd->add_option("--trace", train_trace, "per-epoch loss CSV");
  train_cmd->add_option("--layers", train_layers);
  train_cmd->add_option("--width", train_width);
  train_cmd->add_option("--epochs", g.train_defaults.epochs);
  train_cmd->add_option("--batch-size", g.train_defaults.batch_size);
  train_cmd->add_option("--lr", g.train_defaults.initial_lr);
  train_cmd->add_option("--lr-halving", g.train_defaults.lr_halving_period);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a weights file");
  std::string eval_weights, eval_data, eval_out;
  eval_cmd->add_option("--weights", eval_weights)->required();
  eval_cmd->add_option("--data", eval_data)->required();
  eval_cmd->add_option("--out", eval_out, "metrics JSON");

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "run the backward pass");
  std::string cal_problem, cal_out, cal_trace;
  bool cal_ground = false;
  int cal_pop = 0, cal_pop_mult = 0;
  cal->add_option("--problem", cal_problem)->required();
  cal->add_option("--out", cal_out)->required();
  cal->add_option("--trace", cal_trace, "DE trace CSV");
  cal->add_flag("--ground-error", cal_ground,
                "re-price the result with COS+Brent");
  cal->add_option("--pop-size", cal_pop, "population size override");
  cal->add_option("--pop-mult", cal_pop_mult,
                  "population = mult x free parameters");
  cal->add_option("--max-generations", g.de_defaults.max_generations);
  cal->add_option("--tol", g.de_defaults.tol);

  // hessian
  auto* hes = app.add_subcommand("hessian", "finite-difference sensitivities");
  std::string hes_problem, hes_point, hes_out;
  double hes_rel_step = 1e-3;
  hes->add_option("--problem", hes_problem)->required();
  hes->add_option("--point", hes_point)->required();
  hes->add_option("--out", hes_out)->required();
  hes->add_option("--rel-step", hes_rel_step, "step as a box-width fraction");

  // landscape
  auto* land = app.add_subcommand("landscape", "objective grid scan");
  std::string land_params, land_surface, land_out, land_vary1, land_vary2;
  land->add_option("--params", land_params)->required();
  land->add_option("--surface", land_surface)->required();
  land->add_option("--vary", land_vary1, "first axis, name:lo:hi:n")->required();
  land->add_option("--vary2", land_vary2, "second axis, name:lo:hi:n")
      ->required();
  land->add_option("--out", land_out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    apply_config_file(g);
    if (g.threads > 0) par::set_max_threads(g.threads);
    const std::uint64_t seed = seed_given ? seed_flag : 0;

    if (*price) return run_price(g, params_path, quotes_path, out_path, model_flag);
    if (*iv) return run_iv(g, iv_quotes, iv_out);
    if (*synth) {
      return run_synth(g, synth_params, synth_out, synth_model, synth_rate,
                       synth_weight, synth_atm, synth_moneyness,
                       synth_maturities);
    }
    if (*gen) return run_gen(g, gen_model, gen_n, seed, gen_ranges, gen_out);
    if (*split) return run_split(split_data, split_fractions, seed, split_prefix);
    if (*train_cmd) {
      return run_train(g, train_data, train_val, train_out, train_layers,
                       train_width, seed, train_trace);
    }
    if (*eval_cmd) return run_eval(eval_weights, eval_data, eval_out);
    if (*cal) {
      return run_calibrate(g, cal_problem, cal_out, cal_trace, cal_ground,
                           cal_pop, cal_pop_mult, seed);
    }
    if (*hes) return run_hessian(hes_problem, hes_point, hes_rel_step, hes_out);
    if (*land) {
      return run_landscape(g, land_params, land_surface, land_vary1,
                           land_vary2, land_out);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
