#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "design.hpp"
#include "error.hpp"
#include "log.hpp"
#include "parallel.hpp"

namespace pubgml {

struct MlpParams {
  std::size_t hidden_units = 18;
  double learning_rate = 0.1;
  double momentum = 0.1;
  std::size_t epochs = 0;  // must be set explicitly for training
  std::uint64_t seed = 1;
  double init_scale = 0.5;
  bool clip_output = true;  // predictions clipped to [0, 1]; targets must lie there

  void validate() const {
    if (hidden_units < 1) throw DomainError("hidden_units must be at least 1");
    if (!(learning_rate >= 0.0)) throw DomainError("learning_rate must be non-negative");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw DomainError("momentum must be in [0, 1)");
    if (!(init_scale >= 0.0)) throw DomainError("init_scale must be non-negative");
  }

  nlohmann::json to_json() const {
    return {{"hidden_units", hidden_units}, {"learning_rate", learning_rate}, {"momentum", momentum},
            {"epochs", epochs},             {"seed", seed},                   {"init_scale", init_scale},
            {"clip_output", clip_output}};
  }
  static MlpParams from_json(const nlohmann::json& j) {
    MlpParams p;
    p.hidden_units = j.value("hidden_units", p.hidden_units);
    p.learning_rate = j.value("learning_rate", p.learning_rate);
    p.momentum = j.value("momentum", p.momentum);
    p.epochs = j.value("epochs", p.epochs);
    p.seed = j.value("seed", p.seed);
    p.init_scale = j.value("init_scale", p.init_scale);
    p.clip_output = j.value("clip_output", p.clip_output);
    return p;
  }
};

/// One hidden layer of logistic units feeding a single linear output.
/// `w1` is hidden x inputs, row-major.
struct MlpNetwork {
  std::size_t inputs = 0;
  std::size_t hidden = 0;
  std::vector<double> w1;
  std::vector<double> b1;
  std::vector<double> w2;
  double b2 = 0.0;

  MlpNetwork() = default;
  MlpNetwork(std::size_t in, std::size_t hid)
      : inputs(in), hidden(hid), w1(in * hid, 0.0), b1(hid, 0.0), w2(hid, 0.0) {}

  /// Uniform in [-scale, scale] / sqrt(fan-in), drawn in a fixed order.
  static MlpNetwork random(std::size_t in, std::size_t hid, double scale, std::uint64_t seed) {
    MlpNetwork net(in, hid);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const double s1 = scale / std::sqrt(static_cast<double>(std::max<std::size_t>(in, 1)));
    const double s2 = scale / std::sqrt(static_cast<double>(hid));
    for (auto& w : net.w1) w = s1 * unit(rng);
    for (auto& b : net.b1) b = s1 * unit(rng);
    for (auto& w : net.w2) w = s2 * unit(rng);
    net.b2 = s2 * unit(rng);
    return net;
  }

  std::size_t parameter_count() const { return w1.size() + b1.size() + w2.size() + 1; }

  /// Flat parameter access in the order w1, b1, w2, b2.
  double& parameter(std::size_t i) {
    if (i < w1.size()) return w1[i];
    i -= w1.size();
    if (i < b1.size()) return b1[i];
    i -= b1.size();
    if (i < w2.size()) return w2[i];
    return b2;
  }

  static double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

  /// Fills `act` with hidden activations and returns the raw output.
  double forward(std::span<const double> x, std::span<double> act) const {
    double out = b2;
    for (std::size_t h = 0; h < hidden; ++h) {
      double z = b1[h];
      const double* w = w1.data() + h * inputs;
      for (std::size_t i = 0; i < inputs; ++i) z += w[i] * x[i];
      act[h] = sigmoid(z);
      out += w2[h] * act[h];
    }
    return out;
  }

  double forward(std::span<const double> x) const {
    std::vector<double> act(hidden);
    return forward(x, act);
  }

  bool finite() const {
    auto ok = [](const std::vector<double>& v) {
      return std::all_of(v.begin(), v.end(), [](double d) { return std::isfinite(d); });
    };
    return ok(w1) && ok(b1) && ok(w2) && std::isfinite(b2);
  }
};

/// Summed half squared error over the rows of X (row-major, `inputs` wide).
inline double mlp_loss(const MlpNetwork& net, std::span<const double> X, std::span<const double> y) {
  std::vector<double> act(net.hidden);
  double loss = 0.0;
  for (std::size_t r = 0; r < y.size(); ++r) {
    const double e = net.forward(X.subspan(r * net.inputs, net.inputs), act) - y[r];
    loss += 0.5 * e * e;
  }
  return loss;
}

/// Backpropagated gradient of mlp_loss, flattened like MlpNetwork::parameter.
inline std::vector<double> mlp_gradient(const MlpNetwork& net, std::span<const double> X,
                                        std::span<const double> y) {
  std::vector<double> grad(net.parameter_count(), 0.0);
  std::vector<double> act(net.hidden);
  const std::size_t o_b1 = net.w1.size(), o_w2 = o_b1 + net.b1.size(), o_b2 = o_w2 + net.w2.size();
  for (std::size_t r = 0; r < y.size(); ++r) {
    auto x = X.subspan(r * net.inputs, net.inputs);
    const double e = net.forward(x, act) - y[r];
    grad[o_b2] += e;
    for (std::size_t h = 0; h < net.hidden; ++h) {
      grad[o_w2 + h] += e * act[h];
      const double delta = e * net.w2[h] * act[h] * (1.0 - act[h]);
      grad[o_b1 + h] += delta;
      for (std::size_t i = 0; i < net.inputs; ++i) grad[h * net.inputs + i] += delta * x[i];
    }
  }
  return grad;
}

/// Central finite-difference gradient of mlp_loss.
inline std::vector<double> mlp_numeric_gradient(MlpNetwork net, std::span<const double> X,
                                                std::span<const double> y, double step = 1e-5) {
  std::vector<double> grad(net.parameter_count());
  for (std::size_t i = 0; i < grad.size(); ++i) {
    double& p = net.parameter(i);
    const double saved = p;
    p = saved + step;
    const double up = mlp_loss(net, X, y);
    p = saved - step;
    const double down = mlp_loss(net, X, y);
    p = saved;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

/// Largest |analytic - numeric| / max(|analytic|, |numeric|) over all
/// parameters; pairs where both magnitudes are below 1e-10 count as agreeing.
inline double mlp_gradient_check(const MlpNetwork& net, std::span<const double> X, std::span<const double> y) {
  const auto a = mlp_gradient(net, X, y);
  const auto n = mlp_numeric_gradient(net, X, y);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max(std::abs(a[i]), std::abs(n[i]));
    if (scale < 1e-10) continue;
    worst = std::max(worst, std::abs(a[i] - n[i]) / scale);
  }
  return worst;
}

/// Gradient check on a network initialised from `params` (seed, width,
/// init_scale). `X` is row-major with X.size() / y.size() inputs per row.
inline double gradient_check(const MlpParams& params, std::span<const double> X, std::span<const double> y) {
  if (y.empty() || X.size() % y.size() != 0) throw DomainError("X must hold a whole number of rows");
  const auto net = MlpNetwork::random(X.size() / y.size(), params.hidden_units, params.init_scale, params.seed);
  return mlp_gradient_check(net, X, y);
}

struct MlpModel {
  std::vector<std::string> features;
  std::vector<double> feature_mean;
  std::vector<double> feature_sd;  // zero-variance features stored as 1
  MlpNetwork net;
  MlpParams params;

  double predict_raw(std::span<const double> row) const {
    std::vector<double> z(row.size());
    for (std::size_t i = 0; i < row.size(); ++i) z[i] = (row[i] - feature_mean[i]) / feature_sd[i];
    return net.forward(z);
  }

  /// `row` is indexed like `features`.
  double predict(std::span<const double> row) const {
    const double out = predict_raw(row);
    return params.clip_output ? std::clamp(out, 0.0, 1.0) : out;
  }

  std::vector<double> predict(const DesignMatrix& X) const {
    auto idx = X.bind(features);
    std::vector<double> out(X.rows);
    parallel_for(X.rows, [&](std::size_t r) {
      std::vector<double> row(idx.size());
      for (std::size_t j = 0; j < idx.size(); ++j) row[j] = X.columns[idx[j]][r];
      out[r] = predict(row);
    });
    return out;
  }

  nlohmann::json to_json() const {
    return {{"format", "pubgml.mlp"},
            {"version", 1},
            {"features", features},
            {"params", params.to_json()},
            {"standardization", {{"mean", feature_mean}, {"sd", feature_sd}}},
            {"inputs", net.inputs},
            {"hidden", net.hidden},
            {"w1", net.w1},
            {"b1", net.b1},
            {"w2", net.w2},
            {"b2", net.b2}};
  }

  static MlpModel from_json(const nlohmann::json& j) {
    if (j.at("format") != "pubgml.mlp" || j.at("version") != 1)
      throw ParseError("not a version-1 mlp document");
    MlpModel m;
    m.features = j.at("features").get<std::vector<std::string>>();
    m.params = MlpParams::from_json(j.at("params"));
    m.feature_mean = j.at("standardization").at("mean").get<std::vector<double>>();
    m.feature_sd = j.at("standardization").at("sd").get<std::vector<double>>();
    m.net.inputs = j.at("inputs").get<std::size_t>();
    m.net.hidden = j.at("hidden").get<std::size_t>();
    m.net.w1 = j.at("w1").get<std::vector<double>>();
    m.net.b1 = j.at("b1").get<std::vector<double>>();
    m.net.w2 = j.at("w2").get<std::vector<double>>();
    m.net.b2 = j.at("b2").get<double>();
    return m;
  }
};

/// Per-row stochastic backpropagation with momentum on standardized inputs.
/// Rows are reshuffled every epoch from a generator seeded with params.seed.
inline MlpModel fit_mlp(const DesignMatrix& X, std::span<const double> y, const MlpParams& params) {
  params.validate();
  if (X.rows == 0) throw DomainError("cannot train an MLP on zero rows");
  if (y.size() != X.rows) throw DomainError("X and y row counts differ");
  X.require_finite();
  for (double v : y) {
    if (!std::isfinite(v)) throw DomainError("non-finite target value");
    if (params.clip_output && (v < 0.0 || v > 1.0))
      throw DomainError("targets must lie in [0, 1] unless clip_output is disabled");
  }
  const std::size_t n = X.rows, m = X.cols();

  MlpModel model;
  model.features = X.names;
  model.params = params;
  model.feature_mean.resize(m);
  model.feature_sd.resize(m);
  std::vector<double> Z(n * m);  // standardized, row-major
  for (std::size_t c = 0; c < m; ++c) {
    const auto& col = X.columns[c];
    double mean = 0.0;
    for (double v : col) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : col) ss += (v - mean) * (v - mean);
    double sd = std::sqrt(ss / static_cast<double>(n));
    if (!(sd > 0.0)) sd = 1.0;
    model.feature_mean[c] = mean;
    model.feature_sd[c] = sd;
    for (std::size_t r = 0; r < n; ++r) Z[r * m + c] = (col[r] - mean) / sd;
  }

  MlpNetwork net = MlpNetwork::random(m, params.hidden_units, params.init_scale, params.seed);
  std::vector<double> dw1(net.w1.size(), 0.0), db1(net.b1.size(), 0.0), dw2(net.w2.size(), 0.0);
  double db2 = 0.0;
  std::vector<double> act(net.hidden), delta(net.hidden);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(params.seed ^ 0xA5A5A5A5A5A5A5A5ULL);
  const double lr = params.learning_rate, mom = params.momentum;

  for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(order[i - 1], order[pick(rng)]);
    }
    double loss = 0.0;
    for (auto r : order) {
      std::span<const double> x(Z.data() + r * m, m);
      const double e = net.forward(x, act) - y[r];
      loss += 0.5 * e * e;
      for (std::size_t h = 0; h < net.hidden; ++h) delta[h] = e * net.w2[h] * act[h] * (1.0 - act[h]);
      for (std::size_t h = 0; h < net.hidden; ++h) {
        dw2[h] = -lr * e * act[h] + mom * dw2[h];
        net.w2[h] += dw2[h];
        db1[h] = -lr * delta[h] + mom * db1[h];
        net.b1[h] += db1[h];
        double* w = net.w1.data() + h * m;
        double* dw = dw1.data() + h * m;
        for (std::size_t i = 0; i < m; ++i) {
          dw[i] = -lr * delta[h] * x[i] + mom * dw[i];
          w[i] += dw[i];
        }
      }
      db2 = -lr * e + mom * db2;
      net.b2 += db2;
    }
    if (!std::isfinite(loss) || !net.finite())
      throw TrainingError("MLP training diverged in epoch " + std::to_string(epoch + 1));
    log::info("epoch " + std::to_string(epoch + 1) + ": mse=" +
              Table::format_real(2.0 * loss / static_cast<double>(n)));
  }
  model.net = std::move(net);
  return model;
}

}  // namespace pubgml
