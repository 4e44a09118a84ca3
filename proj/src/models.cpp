#include "svcal/models.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"

namespace svcal {

namespace {

using Complex = std::complex<double>;

// Accurate complex log(1 + z); series for small |z| where 1 + z rounds badly.
Complex clog1p(Complex z) {
  if (std::abs(z) < 1e-4) {
    // log(1+z) = z - z^2/2 + z^3/3 - z^4/4, truncation < 1e-20 here
    return z * (1.0 - z * (0.5 - z * (1.0 / 3.0 - z * 0.25)));
  }
  return std::log(1.0 + z);
}

}  // namespace

std::complex<double> heston_cf(const HestonParams& p, double rate, double tau,
                               std::complex<double> u) {
  const Complex i(0.0, 1.0);
  const double g2 = p.gamma * p.gamma;
  const Complex beta = p.kappa - p.rho * p.gamma * i * u;
  const Complex q = i * u + u * u;
  const Complex d = std::sqrt(beta * beta + g2 * q);
  // (beta - d) = -gamma^2 q / (beta + d): avoids the cancellation that kills
  // the naive form for small gamma.
  const Complex bpd = beta + d;
  const Complex a_over_g2 = -q / bpd;          // (beta - d)/gamma^2
  const Complex g = g2 * a_over_g2 / bpd;      // (beta - d)/(beta + d)
  const Complex emdt = std::exp(-d * tau);
  const Complex log_term = clog1p(-g * emdt) - clog1p(-g);
  const Complex big_c =
      p.kappa * p.nu_bar * (a_over_g2 * tau - 2.0 * log_term / g2);
  const Complex big_d = a_over_g2 * (1.0 - emdt) / (1.0 - g * emdt);
  return std::exp(i * u * rate * tau + big_c + big_d * p.nu0);
}

std::complex<double> bates_cf(const BatesParams& p, double rate, double tau,
                              std::complex<double> u) {
  const Complex base = heston_cf(p.heston, rate, tau, u);
  if (p.lambda_j == 0.0) return base;
  const Complex i(0.0, 1.0);
  const double compensator = std::exp(p.mu_j + 0.5 * p.nu_j_sq) - 1.0;
  const Complex jump =
      std::exp(p.lambda_j * tau *
                   (std::exp(i * u * p.mu_j - 0.5 * u * u * p.nu_j_sq) - 1.0) -
               i * u * p.lambda_j * tau * compensator);
  return base * jump;
}

std::vector<std::string> param_names(ModelKind kind) {
  std::vector<std::string> names = {"rho", "kappa", "gamma", "nu_bar", "nu0"};
  if (kind == ModelKind::Bates) {
    names.insert(names.end(), {"lambda_j", "mu_j", "nu_j_sq"});
  }
  return names;
}

double param_value(const BatesParams& p, const std::string& name) {
  if (name == "rho") return p.heston.rho;
  if (name == "kappa") return p.heston.kappa;
  if (name == "gamma") return p.heston.gamma;
  if (name == "nu_bar") return p.heston.nu_bar;
  if (name == "nu0") return p.heston.nu0;
  if (name == "lambda_j") return p.lambda_j;
  if (name == "mu_j") return p.mu_j;
  if (name == "nu_j_sq") return p.nu_j_sq;
  throw std::invalid_argument("unknown parameter name: " + name);
}

void set_param_value(BatesParams& p, const std::string& name, double value) {
  if (name == "rho") p.heston.rho = value;
  else if (name == "kappa") p.heston.kappa = value;
  else if (name == "gamma") p.heston.gamma = value;
  else if (name == "nu_bar") p.heston.nu_bar = value;
  else if (name == "nu0") p.heston.nu0 = value;
  else if (name == "lambda_j") p.lambda_j = value;
  else if (name == "mu_j") p.mu_j = value;
  else if (name == "nu_j_sq") p.nu_j_sq = value;
  else throw std::invalid_argument("unknown parameter name: " + name);
}

std::string params_to_json(const BatesParams& p) {
  nlohmann::json j;
  j["rho"] = p.heston.rho;
  j["kappa"] = p.heston.kappa;
  j["gamma"] = p.heston.gamma;
  j["nu_bar"] = p.heston.nu_bar;
  j["nu0"] = p.heston.nu0;
  if (p.lambda_j != 0.0 || p.mu_j != 0.0 || p.nu_j_sq != 0.0) {
    j["lambda_j"] = p.lambda_j;
    j["mu_j"] = p.mu_j;
    j["nu_j_sq"] = p.nu_j_sq;
  }
  return j.dump(2);
}

BatesParams params_from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed parameter JSON: ") + e.what());
  }
  BatesParams p;
  try {
    p.heston.rho = j.at("rho").get<double>();
    p.heston.kappa = j.at("kappa").get<double>();
    p.heston.gamma = j.at("gamma").get<double>();
    p.heston.nu_bar = j.at("nu_bar").get<double>();
    p.heston.nu0 = j.at("nu0").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("parameter JSON missing required key: ") + e.what());
  }
  p.lambda_j = j.value("lambda_j", 0.0);
  p.mu_j = j.value("mu_j", 0.0);
  p.nu_j_sq = j.value("nu_j_sq", 0.0);
  return p;
}

BatesParams params_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open parameter file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return params_from_json_text(text);
}

void params_to_json_file(const BatesParams& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write parameter file: " + path);
  out << params_to_json(p) << "\n";
}

}  // namespace svcal
