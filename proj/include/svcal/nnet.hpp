#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "svcal/common.hpp"
#include "svcal/datagen.hpp"

namespace svcal {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// ReLU hidden stack with a linear scalar output. Glorot-uniform weights,
/// zero biases.
struct NetworkSpec {
  int input_dim = 8;
  int hidden_layers = 4;
  int hidden_width = 200;
  std::uint64_t seed = 0;

  void validate() const {
    require(input_dim >= 1, "input_dim must be >= 1");
    require(hidden_layers >= 1, "hidden_layers must be >= 1");
    require(hidden_width >= 1, "hidden_width must be >= 1");
  }
  std::size_t parameter_count() const;
};

struct Network {
  NetworkSpec spec;
  std::vector<Matrix> weights;               // layer l: [out x in]
  std::vector<std::vector<double>> biases;   // layer l: [out]
  std::vector<std::array<double, 2>> input_ranges;  // min-max scaling to [0,1]

  std::size_t n_layers() const { return weights.size(); }
};

/// Fresh network; input_ranges must have spec.input_dim entries with
/// high > low (use {0,1} per dimension for identity scaling).
Network make_network(const NetworkSpec& spec,
                     const std::vector<std::array<double, 2>>& input_ranges);

/// Batched prediction; rows evaluate independently (bit-identical between
/// the parallel kernel and the serial reference).
std::vector<double> forward(const Network& net, const Matrix& batch);
std::vector<double> forward_serial(const Network& net, const Matrix& batch);

struct Gradients {
  std::vector<Matrix> w;
  std::vector<std::vector<double>> b;
};

/// Exact reverse-mode gradients of mean((pred - y)^2) over the batch.
/// ReLU subgradient at 0 is taken as 0.
Gradients backward(const Network& net, const Matrix& batch,
                   std::span<const double> targets);

struct TrainConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double initial_lr = 1e-3;
  int lr_halving_period = 500;  // epochs
  int epochs = 8000;
  int batch_size = 1024;
  double dropout_rate = 0.0;  // inverted dropout on hidden activations
  std::uint64_t seed = 0;

  void validate() const {
    require(batch_size >= 1, "batch_size must be >= 1");
    require(dropout_rate >= 0.0 && dropout_rate < 1.0,
            "dropout_rate must lie in [0, 1)");
    require(initial_lr > 0.0, "initial_lr must be positive");
    require(epochs >= 1 && lr_halving_period >= 1, "epochs/halving must be >= 1");
  }
};

struct TrainTrace {
  std::vector<double> train_loss;  // per-epoch mean of batch MSEs
  std::vector<double> val_loss;    // per-epoch validation MSE
  std::vector<double> lr;          // per-epoch learning rate
};

/// Adam over seeded mini-batch shuffles, learning rate halved every
/// lr_halving_period epochs. Deterministic given seed and thread count.
/// Throws TrainingError("training diverged at epoch N") on non-finite loss.
TrainTrace train(Network& net, const Matrix& x_train,
                 std::span<const double> y_train, const Matrix& x_val,
                 std::span<const double> y_val, const TrainConfig& cfg);
TrainTrace train(Network& net, const Dataset& train_ds, const Dataset& val_ds,
                 const TrainConfig& cfg);

struct NetMetrics {
  double mse;
  double mae;
  double mape;
  double r2;
};

/// Throws std::invalid_argument on zero-variance targets (R^2 undefined).
NetMetrics evaluate(const Network& net, const Matrix& x,
                    std::span<const double> y);
NetMetrics evaluate(const Network& net, const Dataset& ds);

/// JSON round trip carrying spec, scaling ranges, seed and layer arrays;
/// value-exact after parse.
void save_weights(const Network& net, const std::string& path);
Network load_weights(const std::string& path);

/// d(output)/d(raw input), chain-ruled through the min-max scaling.
std::vector<double> input_gradient(const Network& net,
                                   std::span<const double> x);

}  // namespace svcal
