#include "svcal/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"
#include "svcal/parallel.hpp"
#include "svcal/sampling.hpp"

namespace svcal {

SamplingRanges SamplingRanges::heston_defaults() {
  return {{
      {"m", 0.6, 1.4, false},
      {"tau", 0.05, 3.0, false},
      {"r", 0.0, 0.05, false},
      {"rho", -0.90, 0.0, false},
      {"kappa", 0.0, 3.0, true},
      {"gamma", 0.01, 0.8, true},
      {"nu_bar", 0.01, 0.5, true},
      {"nu0", 0.05, 0.5, true},
  }};
}

SamplingRanges SamplingRanges::bates_defaults() {
  SamplingRanges r = heston_defaults();
  r.dims.push_back({"lambda_j", 0.0, 3.0, false});
  r.dims.push_back({"mu_j", 0.0, 0.4, false});
  r.dims.push_back({"nu_j_sq", 0.0, 0.3, false});
  return r;
}

Dataset Dataset::from_xy(const Matrix& x, std::span<const double> y) {
  require(x.rows == y.size(), "feature/target row counts must match");
  Dataset ds;
  ds.n_inputs = x.cols;
  ds.rows = Matrix(x.rows, x.cols + 2);
  for (std::size_t i = 0; i < x.rows; ++i) {
    for (std::size_t c = 0; c < x.cols; ++c) ds.rows.at(i, c) = x.at(i, c);
    ds.rows.at(i, x.cols) = 0.0;
    ds.rows.at(i, x.cols + 1) = y[i];
  }
  return ds;
}

Matrix lhs_sample(const SamplingRanges& ranges, std::size_t n,
                  std::uint64_t seed) {
  ranges.validate();
  std::vector<std::array<double, 2>> bounds;
  bounds.reserve(ranges.dims.size());
  for (const auto& d : ranges.dims) bounds.push_back(d.effective());
  std::mt19937_64 rng(seed);
  return latin_hypercube(bounds, n, rng);
}

namespace {

BatesParams params_from_row(ModelKind model, std::span<const double> row) {
  BatesParams p;
  p.heston.rho = row[3];
  p.heston.kappa = row[4];
  p.heston.gamma = row[5];
  p.heston.nu_bar = row[6];
  p.heston.nu0 = row[7];
  if (model == ModelKind::Bates) {
    p.lambda_j = row[8];
    p.mu_j = row[9];
    p.nu_j_sq = row[10];
  }
  return p;
}

nlohmann::json ranges_to_json(const SamplingRanges& r) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& d : r.dims) {
    arr.push_back({{"name", d.name},
                   {"low", d.low},
                   {"high", d.high},
                   {"open_low", d.open_low}});
  }
  return arr;
}

SamplingRanges ranges_from_json(const nlohmann::json& arr) {
  SamplingRanges r;
  for (const auto& d : arr) {
    r.dims.push_back({d.at("name").get<std::string>(),
                      d.at("low").get<double>(), d.at("high").get<double>(),
                      d.value("open_low", false)});
  }
  return r;
}

}  // namespace

Dataset build_dataset(ModelKind model, const SamplingRanges& ranges,
                      std::size_t n, std::uint64_t seed, const CosConfig& cos,
                      const IvConfig& iv) {
  ranges.validate();
  cos.validate();
  iv.validate();
  const std::size_t expected_dims =
      model == ModelKind::Heston ? 8 : 11;
  require(ranges.dim() == expected_dims,
          "ranges dimension does not match the model");

  const Matrix inputs = lhs_sample(ranges, n, seed);
  const std::size_t width = expected_dims + 2;
  Matrix rows(n, width);
  std::vector<char> keep(n, 0);

  par::parallel_for(n, [&](std::size_t i) {
    const auto row = inputs.row(i);
    Quote q{row[0], row[1], row[2], OptionKind::Put};
    const BatesParams p = params_from_row(model, row);
    try {
      const double price = model == ModelKind::Heston
                               ? cos_price(p.heston, q, cos)
                               : cos_price(p, q, cos);
      if (!(price > kPriceBandLow && price < kPriceBandHigh)) return;
      const double sigma = implied_vol(price, q, iv);
      if (!(sigma > kIvBandLow && sigma < kIvBandHigh)) return;
      for (std::size_t c = 0; c < expected_dims; ++c) rows.at(i, c) = row[c];
      rows.at(i, expected_dims) = price;
      rows.at(i, expected_dims + 1) = sigma;
      keep[i] = 1;
    } catch (const PricingError&) {
      // dropped and counted below
    }
  });

  Dataset ds;
  ds.model = model;
  ds.ranges = ranges;
  ds.seed = seed;
  ds.cos = cos;
  ds.iv = iv;
  ds.requested = n;
  ds.n_inputs = expected_dims;
  const std::size_t kept =
      static_cast<std::size_t>(std::count(keep.begin(), keep.end(), 1));
  ds.dropped = n - kept;
  if (2 * ds.dropped > n) throw PricingError("degenerate ranges");
  ds.rows = Matrix(kept, width);
  std::size_t out = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!keep[i]) continue;
    for (std::size_t c = 0; c < width; ++c) ds.rows.at(out, c) = rows.at(i, c);
    ++out;
  }
  return ds;
}

std::array<Dataset, 3> split_dataset(const Dataset& ds,
                                     std::array<double, 3> fractions,
                                     std::uint64_t seed) {
  double total = fractions[0] + fractions[1] + fractions[2];
  require(fractions[0] > 0 && fractions[1] > 0 && fractions[2] > 0,
          "fractions must be positive");
  require(std::abs(total - 1.0) < 1e-12, "fractions must sum to 1");
  const std::size_t n = ds.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto n0 = static_cast<std::size_t>(
      std::floor(fractions[0] * static_cast<double>(n)));
  const auto n1 = static_cast<std::size_t>(
      std::floor(fractions[1] * static_cast<double>(n)));
  std::array<std::size_t, 3> counts{n0, n1, n - n0 - n1};

  std::array<Dataset, 3> out;
  std::size_t cursor = 0;
  for (int part = 0; part < 3; ++part) {
    Dataset& d = out[part];
    d = ds;
    d.rows = Matrix(counts[part], ds.rows.cols);
    for (std::size_t i = 0; i < counts[part]; ++i) {
      const auto src = ds.rows.row(order[cursor + i]);
      std::copy(src.begin(), src.end(), d.rows.row(i).begin());
    }
    cursor += counts[part];
  }
  return out;
}

void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write dataset: " + path);
  out << std::setprecision(17);
  for (std::size_t c = 0; c < ds.n_inputs; ++c) {
    out << ds.ranges.dims[c].name << ",";
  }
  out << "price,iv\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto row = ds.rows.row(i);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << ",";
      out << row[c];
    }
    out << "\n";
  }
  nlohmann::json meta;
  meta["model"] = ds.model == ModelKind::Heston ? "heston" : "bates";
  meta["ranges"] = ranges_to_json(ds.ranges);
  meta["seed"] = ds.seed;
  meta["cos"] = {{"n_terms", ds.cos.n_terms},
                 {"l_scale", ds.cos.l_scale},
                 {"max_widenings", ds.cos.max_widenings}};
  meta["iv"] = {{"lo", ds.iv.lo},
                {"hi", ds.iv.hi},
                {"tol", ds.iv.tol},
                {"max_iter", ds.iv.max_iter}};
  meta["requested"] = ds.requested;
  meta["dropped"] = ds.dropped;
  meta["rows"] = ds.size();
  std::ofstream mout(path + ".meta.json");
  if (!mout) throw IoError("cannot write dataset metadata: " + path);
  mout << meta.dump(2) << "\n";
}

Dataset load_dataset(const std::string& path) {
  std::ifstream min(path + ".meta.json");
  if (!min) throw IoError("cannot open dataset metadata: " + path + ".meta.json");
  nlohmann::json meta;
  try {
    min >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed dataset metadata: ") + e.what());
  }

  Dataset ds;
  ds.model = meta.at("model").get<std::string>() == "bates" ? ModelKind::Bates
                                                            : ModelKind::Heston;
  ds.ranges = ranges_from_json(meta.at("ranges"));
  ds.seed = meta.at("seed").get<std::uint64_t>();
  ds.cos.n_terms = meta.at("cos").at("n_terms").get<int>();
  ds.cos.l_scale = meta.at("cos").at("l_scale").get<double>();
  ds.cos.max_widenings = meta.at("cos").at("max_widenings").get<int>();
  ds.iv.lo = meta.at("iv").at("lo").get<double>();
  ds.iv.hi = meta.at("iv").at("hi").get<double>();
  ds.iv.tol = meta.at("iv").at("tol").get<double>();
  ds.iv.max_iter = meta.at("iv").at("max_iter").get<int>();
  ds.requested = meta.at("requested").get<std::size_t>();
  ds.dropped = meta.at("dropped").get<std::size_t>();
  ds.n_inputs = ds.ranges.dim();

  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset: " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("dataset missing header: " + path);
  std::vector<double> flat;
  const std::size_t width = ds.n_inputs + 2;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t c = 0;
    while (std::getline(ss, cell, ',')) {
      flat.push_back(std::stod(cell));
      ++c;
    }
    if (c != width) throw IoError("dataset row has wrong column count");
    ++rows;
  }
  const std::size_t expected = meta.at("rows").get<std::size_t>();
  if (rows != expected) throw IoError("dataset row count does not match metadata");
  ds.rows.rows = rows;
  ds.rows.cols = width;
  ds.rows.data = std::move(flat);
  return ds;
}

}  // namespace svcal
