#include "svcal/nnet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "json.hpp"
#include "svcal/parallel.hpp"

namespace svcal {

namespace {

std::vector<int> layer_widths(const NetworkSpec& spec) {
  std::vector<int> w;
  w.push_back(spec.input_dim);
  for (int i = 0; i < spec.hidden_layers; ++i) w.push_back(spec.hidden_width);
  w.push_back(1);
  return w;
}

void scale_row(const Network& net, std::span<const double> in,
               std::span<double> out) {
  for (std::size_t i = 0; i < in.size(); ++i) {
    const auto& r = net.input_ranges[i];
    out[i] = (in[i] - r[0]) / (r[1] - r[0]);
  }
}

// One row through the stack; acts (when given) receives the post-activation
// of every layer, acts[0] being the scaled input.
double forward_row(const Network& net, std::span<const double> raw,
                   std::vector<std::vector<double>>* acts) {
  const std::size_t depth = net.n_layers();
  std::vector<double> cur(net.spec.input_dim);
  scale_row(net, raw, cur);
  if (acts) (*acts)[0] = cur;
  std::vector<double> next;
  for (std::size_t l = 0; l < depth; ++l) {
    const Matrix& w = net.weights[l];
    const auto& b = net.biases[l];
    next.assign(w.rows, 0.0);
    for (std::size_t o = 0; o < w.rows; ++o) {
      const double* wr = w.data.data() + o * w.cols;
      double acc = b[o];
      for (std::size_t i = 0; i < w.cols; ++i) acc += wr[i] * cur[i];
      next[o] = (l + 1 < depth) ? std::max(acc, 0.0) : acc;
    }
    cur.swap(next);
    if (acts) (*acts)[l + 1] = cur;
  }
  return cur[0];
}

std::vector<double> forward_impl(const Network& net, const Matrix& batch,
                                 bool parallel) {
  require(batch.cols == static_cast<std::size_t>(net.spec.input_dim),
          "input dimension mismatch");
  for (double v : batch.data) {
    require(std::isfinite(v), "non-finite network input");
  }
  std::vector<double> out(batch.rows);
  auto body = [&](std::size_t r) { out[r] = forward_row(net, batch.row(r), nullptr); };
  if (parallel) {
    par::parallel_for(batch.rows, body);
  } else {
    par::serial_for(batch.rows, body);
  }
  return out;
}

// Batched forward keeping every post-activation, with an optional inverted
// dropout mask applied to hidden activations.
struct BatchWorkspace {
  std::vector<Matrix> acts;  // acts[0] = scaled inputs, acts.back() = output
};

void forward_batch(const Network& net, const Matrix& batch,
                   const std::vector<Matrix>* dropout_masks,
                   BatchWorkspace& ws) {
  const std::size_t depth = net.n_layers();
  const std::size_t n = batch.rows;
  ws.acts.resize(depth + 1);
  const auto widths = layer_widths(net.spec);
  for (std::size_t l = 0; l <= depth; ++l) {
    ws.acts[l] = Matrix(n, static_cast<std::size_t>(widths[l]));
  }
  par::parallel_for(n, [&](std::size_t r) {
    scale_row(net, batch.row(r), ws.acts[0].row(r));
    for (std::size_t l = 0; l < depth; ++l) {
      const Matrix& w = net.weights[l];
      const auto& b = net.biases[l];
      const auto prev = ws.acts[l].row(r);
      auto cur = ws.acts[l + 1].row(r);
      for (std::size_t o = 0; o < w.rows; ++o) {
        const double* wr = w.data.data() + o * w.cols;
        double acc = b[o];
        for (std::size_t i = 0; i < w.cols; ++i) acc += wr[i] * prev[i];
        if (l + 1 < depth) {
          acc = std::max(acc, 0.0);
          if (dropout_masks) acc *= (*dropout_masks)[l].at(r, o);
        }
        cur[o] = acc;
      }
    }
  });
}

// Gradients of mean squared error given the stored activations. delta starts
// from the residual layer; reductions over the batch run in a fixed order
// (parallelism is across output neurons), so results are thread-count
// independent.
Gradients backward_from_ws(const Network& net, const BatchWorkspace& ws,
                           std::span<const double> targets,
                           const std::vector<Matrix>* dropout_masks) {
  const std::size_t depth = net.n_layers();
  const std::size_t n = targets.size();
  Gradients g;
  g.w.resize(depth);
  g.b.resize(depth);
  for (std::size_t l = 0; l < depth; ++l) {
    g.w[l] = Matrix(net.weights[l].rows, net.weights[l].cols);
    g.b[l].assign(net.biases[l].size(), 0.0);
  }

  Matrix delta(n, 1);
  for (std::size_t r = 0; r < n; ++r) {
    delta.at(r, 0) = 2.0 * (ws.acts[depth].at(r, 0) - targets[r]) /
                     static_cast<double>(n);
  }

  for (std::size_t l = depth; l-- > 0;) {
    const Matrix& act_in = ws.acts[l];
    Matrix& gw = g.w[l];
    auto& gb = g.b[l];
    par::parallel_for(gw.rows, [&](std::size_t o) {
      double* grow = gw.data.data() + o * gw.cols;
      double bacc = 0.0;
      for (std::size_t r = 0; r < n; ++r) {
        const double d = delta.at(r, o);
        if (d == 0.0) continue;
        bacc += d;
        const double* arow = act_in.data.data() + r * act_in.cols;
        for (std::size_t i = 0; i < gw.cols; ++i) grow[i] += d * arow[i];
      }
      gb[o] = bacc;
    });
    if (l == 0) break;
    const Matrix& w = net.weights[l];
    Matrix prev_delta(n, w.cols);
    par::parallel_for(n, [&](std::size_t r) {
      double* out = prev_delta.data.data() + r * w.cols;
      std::fill(out, out + w.cols, 0.0);
      for (std::size_t o = 0; o < w.rows; ++o) {
        const double d = delta.at(r, o);
        if (d == 0.0) continue;
        const double* wr = w.data.data() + o * w.cols;
        for (std::size_t i = 0; i < w.cols; ++i) out[i] += d * wr[i];
      }
      const double* act = ws.acts[l].data.data() + r * w.cols;
      for (std::size_t i = 0; i < w.cols; ++i) {
        if (act[i] <= 0.0) {
          out[i] = 0.0;  // ReLU subgradient at 0 is 0
        } else if (dropout_masks) {
          out[i] *= (*dropout_masks)[l - 1].at(r, i);
        }
      }
    });
    delta = std::move(prev_delta);
  }
  return g;
}

double mse_of(std::span<const double> pred, std::span<const double> y) {
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - y[i];
    acc += e * e;
  }
  return acc / static_cast<double>(pred.size());
}

}  // namespace

std::size_t NetworkSpec::parameter_count() const {
  const auto widths = layer_widths(*this);
  std::size_t count = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    count += static_cast<std::size_t>(widths[l]) * widths[l + 1] + widths[l + 1];
  }
  return count;
}

Network make_network(const NetworkSpec& spec,
                     const std::vector<std::array<double, 2>>& input_ranges) {
  spec.validate();
  require(input_ranges.size() == static_cast<std::size_t>(spec.input_dim),
          "input_ranges size must equal input_dim");
  for (const auto& r : input_ranges) {
    require(r[1] > r[0], "input range high must exceed low");
  }
  Network net;
  net.spec = spec;
  net.input_ranges = input_ranges;
  const auto widths = layer_widths(spec);
  std::mt19937_64 rng(spec.seed);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const auto fan_in = static_cast<std::size_t>(widths[l]);
    const auto fan_out = static_cast<std::size_t>(widths[l + 1]);
    const double limit =
        std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Matrix w(fan_out, fan_in);
    for (double& v : w.data) v = dist(rng);
    net.weights.push_back(std::move(w));
    net.biases.emplace_back(fan_out, 0.0);
  }
  return net;
}

std::vector<double> forward(const Network& net, const Matrix& batch) {
  return forward_impl(net, batch, true);
}

std::vector<double> forward_serial(const Network& net, const Matrix& batch) {
  return forward_impl(net, batch, false);
}

Gradients backward(const Network& net, const Matrix& batch,
                   std::span<const double> targets) {
  require(batch.rows == targets.size(), "batch/target size mismatch");
  require(batch.cols == static_cast<std::size_t>(net.spec.input_dim),
          "input dimension mismatch");
  BatchWorkspace ws;
  forward_batch(net, batch, nullptr, ws);
  return backward_from_ws(net, ws, targets, nullptr);
}

TrainTrace train(Network& net, const Matrix& x_train,
                 std::span<const double> y_train, const Matrix& x_val,
                 std::span<const double> y_val, const TrainConfig& cfg) {
  cfg.validate();
  require(x_train.rows >= 1 && x_val.rows >= 1, "datasets must be non-empty");
  const std::size_t depth = net.n_layers();
  const std::size_t n = x_train.rows;

  Gradients m, v;
  m.w.resize(depth);
  m.b.resize(depth);
  v.w.resize(depth);
  v.b.resize(depth);
  for (std::size_t l = 0; l < depth; ++l) {
    m.w[l] = Matrix(net.weights[l].rows, net.weights[l].cols);
    v.w[l] = Matrix(net.weights[l].rows, net.weights[l].cols);
    m.b[l].assign(net.biases[l].size(), 0.0);
    v.b[l].assign(net.biases[l].size(), 0.0);
  }

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainTrace trace;
  long step = 0;
  BatchWorkspace ws;
  std::vector<Matrix> masks;
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr =
        cfg.initial_lr * std::pow(0.5, epoch / cfg.lr_halving_period);
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t len =
          std::min<std::size_t>(cfg.batch_size, n - start);
      Matrix batch(len, x_train.cols);
      std::vector<double> yb(len);
      for (std::size_t i = 0; i < len; ++i) {
        const auto src = x_train.row(order[start + i]);
        std::copy(src.begin(), src.end(), batch.row(i).begin());
        yb[i] = y_train[order[start + i]];
      }

      const std::vector<Matrix>* mask_ptr = nullptr;
      if (cfg.dropout_rate > 0.0) {
        masks.assign(static_cast<std::size_t>(net.spec.hidden_layers),
                     Matrix(len, static_cast<std::size_t>(net.spec.hidden_width)));
        const double keep = 1.0 - cfg.dropout_rate;
        for (auto& mk : masks) {
          for (double& x : mk.data) x = (unit(rng) < keep) ? 1.0 / keep : 0.0;
        }
        mask_ptr = &masks;
      }

      forward_batch(net, batch, mask_ptr, ws);
      const auto& out = ws.acts.back();
      double loss = 0.0;
      for (std::size_t i = 0; i < len; ++i) {
        const double e = out.at(i, 0) - yb[i];
        loss += e * e;
      }
      loss /= static_cast<double>(len);
      if (!std::isfinite(loss)) {
        throw TrainingError("training diverged at epoch " +
                            std::to_string(epoch));
      }
      epoch_loss += loss;
      ++batches;

      Gradients g = backward_from_ws(net, ws, yb, mask_ptr);
      ++step;
      const double bc1 = 1.0 - std::pow(cfg.beta1, step);
      const double bc2 = 1.0 - std::pow(cfg.beta2, step);
      for (std::size_t l = 0; l < depth; ++l) {
        auto& wm = m.w[l].data;
        auto& wv = v.w[l].data;
        auto& wd = net.weights[l].data;
        const auto& gd = g.w[l].data;
        par::parallel_for(wd.size(), [&](std::size_t i) {
          wm[i] = cfg.beta1 * wm[i] + (1.0 - cfg.beta1) * gd[i];
          wv[i] = cfg.beta2 * wv[i] + (1.0 - cfg.beta2) * gd[i] * gd[i];
          wd[i] -= lr * (wm[i] / bc1) / (std::sqrt(wv[i] / bc2) + cfg.eps);
        });
        auto& bm = m.b[l];
        auto& bv = v.b[l];
        auto& bd = net.biases[l];
        const auto& gb = g.b[l];
        for (std::size_t i = 0; i < bd.size(); ++i) {
          bm[i] = cfg.beta1 * bm[i] + (1.0 - cfg.beta1) * gb[i];
          bv[i] = cfg.beta2 * bv[i] + (1.0 - cfg.beta2) * gb[i] * gb[i];
          bd[i] -= lr * (bm[i] / bc1) / (std::sqrt(bv[i] / bc2) + cfg.eps);
        }
      }
    }
    trace.train_loss.push_back(epoch_loss / static_cast<double>(batches));
    trace.lr.push_back(lr);
    trace.val_loss.push_back(mse_of(forward(net, x_val), y_val));
  }
  return trace;
}

namespace {

Matrix dataset_inputs(const Dataset& ds) {
  Matrix x(ds.size(), ds.n_inputs);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto row = ds.inputs(i);
    std::copy(row.begin(), row.end(), x.row(i).begin());
  }
  return x;
}

std::vector<double> dataset_targets(const Dataset& ds) {
  std::vector<double> y(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) y[i] = ds.target_iv(i);
  return y;
}

}  // namespace

TrainTrace train(Network& net, const Dataset& train_ds, const Dataset& val_ds,
                 const TrainConfig& cfg) {
  const Matrix xt = dataset_inputs(train_ds);
  const Matrix xv = dataset_inputs(val_ds);
  return train(net, xt, dataset_targets(train_ds), xv, dataset_targets(val_ds),
               cfg);
}

NetMetrics evaluate(const Network& net, const Matrix& x,
                    std::span<const double> y) {
  require(x.rows >= 1, "dataset must be non-empty");
  const auto pred = forward(net, x);
  const auto n = static_cast<double>(y.size());
  double mse = 0.0, mae = 0.0, mape = 0.0, mean_y = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double e = pred[i] - y[i];
    mse += e * e;
    mae += std::abs(e);
    mape += std::abs(e) / std::abs(y[i]);
    mean_y += y[i];
  }
  mse /= n;
  mae /= n;
  mape /= n;
  mean_y /= n;
  double sst = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sst += (y[i] - mean_y) * (y[i] - mean_y);
  }
  if (sst == 0.0) {
    throw std::invalid_argument("zero-variance targets: R^2 undefined");
  }
  return {mse, mae, mape, 1.0 - mse * n / sst};
}

NetMetrics evaluate(const Network& net, const Dataset& ds) {
  const Matrix x = dataset_inputs(ds);
  return evaluate(net, x, dataset_targets(ds));
}

void save_weights(const Network& net, const std::string& path) {
  nlohmann::json j;
  j["spec"] = {{"input_dim", net.spec.input_dim},
               {"hidden_layers", net.spec.hidden_layers},
               {"hidden_width", net.spec.hidden_width}};
  j["seed"] = net.spec.seed;
  nlohmann::json ranges = nlohmann::json::array();
  for (const auto& r : net.input_ranges) ranges.push_back({r[0], r[1]});
  j["input_ranges"] = ranges;
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    const Matrix& w = net.weights[l];
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t o = 0; o < w.rows; ++o) {
      const auto row = w.row(o);
      rows.push_back(std::vector<double>(row.begin(), row.end()));
    }
    layers.push_back({{"w", rows}, {"b", net.biases[l]}});
  }
  j["layers"] = layers;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write weights file: " + path);
  out << j.dump() << "\n";
}

Network load_weights(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open weights file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed weights file: ") + e.what());
  }
  Network net;
  try {
    net.spec.input_dim = j.at("spec").at("input_dim").get<int>();
    net.spec.hidden_layers = j.at("spec").at("hidden_layers").get<int>();
    net.spec.hidden_width = j.at("spec").at("hidden_width").get<int>();
    net.spec.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& r : j.at("input_ranges")) {
      net.input_ranges.push_back({r.at(0).get<double>(), r.at(1).get<double>()});
    }
    for (const auto& layer : j.at("layers")) {
      const auto& rows = layer.at("w");
      Matrix w(rows.size(), rows.at(0).size());
      for (std::size_t o = 0; o < w.rows; ++o) {
        const auto& row = rows.at(o);
        if (row.size() != w.cols) throw IoError("ragged weight matrix");
        for (std::size_t i = 0; i < w.cols; ++i) {
          w.at(o, i) = row.at(i).get<double>();
        }
      }
      net.weights.push_back(std::move(w));
      net.biases.push_back(layer.at("b").get<std::vector<double>>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed weights file: ") + e.what());
  }
  // shape audit
  const auto widths = layer_widths(net.spec);
  if (net.input_ranges.size() != static_cast<std::size_t>(net.spec.input_dim) ||
      net.weights.size() + 1 != widths.size()) {
    throw IoError("weights file shape mismatch");
  }
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    if (net.weights[l].rows != static_cast<std::size_t>(widths[l + 1]) ||
        net.weights[l].cols != static_cast<std::size_t>(widths[l]) ||
        net.biases[l].size() != static_cast<std::size_t>(widths[l + 1])) {
      throw IoError("weights file shape mismatch");
    }
  }
  return net;
}

std::vector<double> input_gradient(const Network& net,
                                   std::span<const double> x) {
  require(x.size() == static_cast<std::size_t>(net.spec.input_dim),
          "input dimension mismatch");
  const std::size_t depth = net.n_layers();
  std::vector<std::vector<double>> acts(depth + 1);
  forward_row(net, x, &acts);
  std::vector<double> delta{1.0};
  for (std::size_t l = depth; l-- > 0;) {
    const Matrix& w = net.weights[l];
    std::vector<double> prev(w.cols, 0.0);
    for (std::size_t o = 0; o < w.rows; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      const double* wr = w.data.data() + o * w.cols;
      for (std::size_t i = 0; i < w.cols; ++i) prev[i] += d * wr[i];
    }
    if (l > 0) {
      for (std::size_t i = 0; i < prev.size(); ++i) {
        if (acts[l][i] <= 0.0) prev[i] = 0.0;
      }
    }
    delta = std::move(prev);
  }
  for (std::size_t i = 0; i < delta.size(); ++i) {
    delta[i] /= (net.input_ranges[i][1] - net.input_ranges[i][0]);
  }
  return delta;
}

}  // namespace svcal
