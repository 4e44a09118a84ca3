#include "svcal/de_opt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

#include "svcal/sampling.hpp"

namespace svcal {

namespace {

double reflect_into(double x, double lo, double hi) {
  // fold until inside; the fold is a contraction, so this terminates fast
  while (x < lo || x > hi) {
    if (x < lo) x = 2.0 * lo - x;
    if (x > hi) x = 2.0 * hi - x;
  }
  return x;
}

std::size_t best_index(std::span<const double> energies) {
  return static_cast<std::size_t>(
      std::min_element(energies.begin(), energies.end()) - energies.begin());
}

std::size_t draw_distinct(std::mt19937_64& rng, std::size_t n,
                          std::span<const std::size_t> taken) {
  std::uniform_int_distribution<std::size_t> dist(0, n - 1);
  for (;;) {
    const std::size_t v = dist(rng);
    if (std::find(taken.begin(), taken.end(), v) == taken.end()) return v;
  }
}

}  // namespace

Population de_init(const DEConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  Population pop;
  pop.candidates =
      latin_hypercube(cfg.bounds, static_cast<std::size_t>(cfg.pop_size), rng);
  pop.energies.assign(cfg.pop_size,
                      std::numeric_limits<double>::quiet_NaN());
  return pop;
}

std::vector<double> mutant_vector(std::span<const double> base,
                                  std::span<const double> b,
                                  std::span<const double> c, double f,
                                  std::span<const std::array<double, 2>> bounds) {
  std::vector<double> out(base.size());
  for (std::size_t d = 0; d < base.size(); ++d) {
    out[d] = reflect_into(base[d] + f * (b[d] - c[d]), bounds[d][0],
                          bounds[d][1]);
  }
  return out;
}

std::vector<double> de_mutate(const Population& pop, std::size_t i, double f,
                              DEStrategy strategy, const DEConfig& cfg,
                              std::mt19937_64& rng) {
  const std::size_t n = pop.candidates.rows;
  std::vector<std::size_t> taken{i};
  std::size_t a;
  if (strategy == DEStrategy::Best1Bin) {
    a = pop.best;
  } else {
    a = draw_distinct(rng, n, taken);
  }
  taken.push_back(a);
  const std::size_t b = draw_distinct(rng, n, taken);
  taken.push_back(b);
  const std::size_t c = draw_distinct(rng, n, taken);
  return mutant_vector(pop.candidates.row(a), pop.candidates.row(b),
                       pop.candidates.row(c), f, cfg.bounds);
}

std::vector<double> de_crossover(std::span<const double> target,
                                 std::span<const double> mutant, double cr,
                                 std::mt19937_64& rng) {
  require(target.size() == mutant.size(), "dimension mismatch");
  const std::size_t dim = target.size();
  std::uniform_int_distribution<std::size_t> pick(0, dim - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t forced = pick(rng);
  std::vector<double> trial(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    trial[d] = (d == forced || unit(rng) <= cr) ? mutant[d] : target[d];
  }
  return trial;
}

void de_select(Population& pop, const Matrix& trials,
               std::span<const double> trial_energies) {
  for (std::size_t i = 0; i < pop.candidates.rows; ++i) {
    if (trial_energies[i] <= pop.energies[i]) {
      const auto src = trials.row(i);
      std::copy(src.begin(), src.end(), pop.candidates.row(i).begin());
      pop.energies[i] = trial_energies[i];
    }
  }
  pop.best = best_index(pop.energies);
}

namespace {

std::vector<double> sanitize(std::vector<double> energies, bool* any_finite) {
  *any_finite = false;
  for (double& e : energies) {
    if (std::isfinite(e)) {
      *any_finite = true;
    } else {
      e = std::numeric_limits<double>::infinity();
    }
  }
  return energies;
}

DEGenStat stats_of(int generation, const Population& pop, double f_used) {
  double mean = 0.0;
  for (double e : pop.energies) mean += e;
  mean /= static_cast<double>(pop.energies.size());
  double var = 0.0;
  for (double e : pop.energies) var += (e - mean) * (e - mean);
  var /= static_cast<double>(pop.energies.size());
  return {generation, pop.energies[pop.best], mean, std::sqrt(var), f_used};
}

}  // namespace

DEResult de_minimize(const BatchObjective& objective, const DEConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  Population pop = de_init(cfg);
  bool any_finite = false;
  pop.energies = sanitize(objective(pop.candidates), &any_finite);
  if (!any_finite) throw std::runtime_error("objective invalid on search space");
  pop.best = best_index(pop.energies);
  long evals = cfg.pop_size;

  DEResult result;
  result.converged = false;
  result.trace.push_back(stats_of(0, pop, 0.0));

  std::uniform_real_distribution<double> dither(cfg.f_low, cfg.f_high);
  const std::size_t dim = cfg.bounds.size();
  Matrix trials(static_cast<std::size_t>(cfg.pop_size), dim);

  int generation = 0;
  while (generation < cfg.max_generations) {
    ++generation;
    const double f = (cfg.f_low == cfg.f_high) ? cfg.f_low : dither(rng);
    for (std::size_t i = 0; i < trials.rows; ++i) {
      const auto mutant = de_mutate(pop, i, f, cfg.strategy, cfg, rng);
      const auto trial =
          de_crossover(pop.candidates.row(i), mutant, cfg.crossover, rng);
      std::copy(trial.begin(), trial.end(), trials.row(i).begin());
    }
    bool finite = false;
    const auto energies = sanitize(objective(trials), &finite);
    evals += cfg.pop_size;
    de_select(pop, trials, energies);
    pop.generation = generation;
    const DEGenStat st = stats_of(generation, pop, f);
    result.trace.push_back(st);
    if (std::isfinite(st.mean_energy) &&
        st.std_energy <= cfg.tol * std::abs(st.mean_energy)) {
      result.converged = true;
      break;
    }
  }

  const auto best_row = pop.candidates.row(pop.best);
  result.best.assign(best_row.begin(), best_row.end());
  result.best_energy = pop.energies[pop.best];
  result.generations = generation;
  result.function_evaluations = evals;
  return result;
}

void write_trace_csv(const std::vector<DEGenStat>& trace,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write trace: " + path);
  out << std::setprecision(17);
  out << "generation,best_energy,mean_energy,std_energy,F_used\n";
  for (const auto& s : trace) {
    out << s.generation << "," << s.best_energy << "," << s.mean_energy << ","
        << s.std_energy << "," << s.f_used << "\n";
  }
}

}  // namespace svcal
