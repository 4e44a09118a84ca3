#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "svcal/common.hpp"

namespace svcal {

enum class DEStrategy { Best1Bin, Rand1Bin };

struct DEConfig {
  int pop_size = 50;
  DEStrategy strategy = DEStrategy::Best1Bin;
  double f_low = 0.5;   // mutation dither range [f_low, f_high)
  double f_high = 1.0;
  double crossover = 0.7;  // Cr
  double tol = 0.01;       // stop when std(energies) <= tol * |mean(energies)|
  int max_generations = 1000;
  std::uint64_t seed = 0;
  std::vector<std::array<double, 2>> bounds;

  void validate() const {
    require(pop_size >= 4, "pop_size must be >= 4");
    require(f_low >= 0.0 && f_low <= f_high, "need 0 <= f_low <= f_high");
    require(crossover >= 0.0 && crossover <= 1.0, "crossover must lie in [0,1]");
    require(tol > 0.0, "tol must be positive");
    require(max_generations >= 1, "max_generations must be >= 1");
    require(!bounds.empty(), "bounds must not be empty");
    for (const auto& b : bounds) {
      require(b[0] < b[1], "degenerate bounds (low >= high)");
    }
  }
};

struct Population {
  Matrix candidates;             // pop_size x dim
  std::vector<double> energies;  // aligned with candidates
  int generation = 0;
  std::size_t best = 0;
};

/// Objective over a whole candidate matrix (one energy per row). Rows may be
/// evaluated concurrently by the callee.
using BatchObjective = std::function<std::vector<double>(const Matrix&)>;

/// Latin-hypercube population over the bounds box (energies unset).
Population de_init(const DEConfig& cfg);

/// theta_a + F (theta_b - theta_c) with a = best (Best1Bin) or random
/// (Rand1Bin); b, c distinct from each other, i and a. Out-of-bounds
/// components are reflected back into the box.
std::vector<double> de_mutate(const Population& pop, std::size_t i, double f,
                              DEStrategy strategy, const DEConfig& cfg,
                              std::mt19937_64& rng);

/// Raw mutant arithmetic (exposed for hand-case tests): reflect(base + f*(b - c)).
std::vector<double> mutant_vector(std::span<const double> base,
                                  std::span<const double> b,
                                  std::span<const double> c, double f,
                                  std::span<const std::array<double, 2>> bounds);

/// Binomial crossover: mutant component when the draw is <= Cr, with one
/// uniformly chosen dimension always taken from the mutant.
std::vector<double> de_crossover(std::span<const double> target,
                                 std::span<const double> mutant, double cr,
                                 std::mt19937_64& rng);

/// Greedy (<=) replacement; recomputes the best index.
void de_select(Population& pop, const Matrix& trials,
               std::span<const double> trial_energies);

struct DEGenStat {
  int generation;
  double best_energy;
  double mean_energy;
  double std_energy;
  double f_used;
};

struct DEResult {
  std::vector<double> best;
  double best_energy;
  int generations;
  long function_evaluations;  // counts the initial population too
  std::vector<DEGenStat> trace;
  bool converged;
};

/// Mutate/crossover/batched-evaluate/select loop with per-generation dithered
/// F in [f_low, f_high). Candidates with non-finite energies are assigned
/// +infinity; throws std::runtime_error("objective invalid on search space")
/// when the whole population is infinite.
DEResult de_minimize(const BatchObjective& objective, const DEConfig& cfg);

void write_trace_csv(const std::vector<DEGenStat>& trace,
                     const std::string& path);

}  // namespace svcal
