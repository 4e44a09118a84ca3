// Serial-vs-OpenMP benchmark for the batched kernels: surface pricing,
// surrogate forward evaluation, and the calibration objective.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>

#include "svcal/calibrate.hpp"
#include "svcal/parallel.hpp"

using namespace svcal;

namespace {

double time_of(const std::function<void()>& fn, int reps) {
  fn();  // warmup
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count() / reps;
}

void row(const char* name, double serial, double parallel) {
  std::printf("%-28s %10.3f ms %10.3f ms %8.2fx\n", name, serial * 1e3,
              parallel * 1e3, serial / parallel);
}

}  // namespace

int main(int argc, char** argv) {
  const bool quick = argc > 1 && std::strcmp(argv[1], "--quick") == 0;
  const int reps = quick ? 1 : 5;
  const int candidate_count = quick ? 8 : 50;

  const HestonParams truth{-0.5, 0.75, 0.4, 0.25, 0.25};
  std::vector<Quote> quotes;
  for (int i = 0; i < 5; ++i) {
    const double m = 0.85 + 0.075 * i;
    for (double tau : {0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0}) {
      quotes.push_back(
          {m, tau, 0.03, m < 1.0 ? OptionKind::Call : OptionKind::Put});
    }
  }
  CosConfig cos;

  std::printf("threads: %d\n", par::max_threads());
  std::printf("%-28s %13s %13s %9s\n", "kernel", "serial", "openmp",
              "speedup");

  // batched COS pricing over the 35-quote market grid
  {
    const double s = time_of(
        [&] { price_surface_serial(truth, quotes, cos); }, reps);
    const double p =
        time_of([&] { price_surface(truth, quotes, cos); }, reps);
    row("price_surface (35 quotes)", s, p);
  }

  // surrogate forward pass on a training-sized batch
  {
    NetworkSpec spec{8, 4, 200, 7};
    const Network net = make_network(
        spec, std::vector<std::array<double, 2>>(8, {0.0, 1.0}));
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix batch(1024, 8);
    for (double& v : batch.data) v = u(rng);
    const double s = time_of([&] { forward_serial(net, batch); }, reps);
    const double p = time_of([&] { forward(net, batch); }, reps);
    row("forward (1024 x 4x200)", s, p);
  }

  // calibration objective over a DE-generation-sized candidate block
  {
    QuoteSurface surface =
        synth_market(ModelKind::Heston, {truth, 0, 0, 0},
                     MarketGrid::table_default(), 0.03, 1.0, cos, IvConfig{});
    CalibrationProblem pr;
    pr.surface = surface;
    pr.model = ModelKind::Heston;
    pr.free_names = {"rho", "gamma", "nu_bar"};
    pr.free_boxes = {{-0.85, -0.05}, {0.05, 0.75}, {0.05, 0.45}};
    pr.fixed = {{"kappa", truth.kappa}, {"nu0", truth.nu0}};
    pr.cos = cos;

    std::mt19937_64 rng(5);
    Matrix cands(candidate_count, 3);
    for (std::size_t i = 0; i < cands.rows; ++i) {
      for (std::size_t d = 0; d < 3; ++d) {
        std::uniform_real_distribution<double> u(pr.free_boxes[d][0],
                                                 pr.free_boxes[d][1]);
        cands.at(i, d) = u(rng);
      }
    }
    const int saved = par::max_threads();
    const double s = time_of(
        [&] {
          par::set_max_threads(1);
          objective(pr, cands);
          par::set_max_threads(saved);
        },
        reps);
    const double p = time_of([&] { objective(pr, cands); }, reps);
    char label[64];
    std::snprintf(label, sizeof label, "objective (%d x 35)", candidate_count);
    row(label, s, p);
  }
  return 0;
}
