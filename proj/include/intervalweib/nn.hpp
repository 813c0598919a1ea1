#pragma once

// Small feed-forward network producing a per-record log-rate eta(x) plus a
// global log-shape kappa, trained to the MAP point with Adam.
//
// Flat parameter layout (ParamVector), F inputs, H hidden units:
//   0 hidden layers: [w_1..w_F, b, kappa]                           P = F + 2
//   1 hidden layer : [W (H x F, row-major), b1 (H), v (H), c, kappa] P = H F + 2H + 2
// with eta(x) = w.x + b, or eta(x) = v.tanh(W x + b1) + c.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "intervalweib/common.hpp"
#include "intervalweib/dataset.hpp"
#include "intervalweib/survival.hpp"

namespace intervalweib {

enum class Activation { Tanh };

struct MlpSpec {
  Eigen::Index input_dim = 0;
  int hidden_layers = 0;
  Eigen::Index hidden_width = 0;
  Activation activation = Activation::Tanh;

  void validate() const {
    if (input_dim < 0) throw std::invalid_argument("input dimension must be >= 0");
    if (hidden_layers != 0 && hidden_layers != 1) throw std::invalid_argument("hidden layers must be 0 or 1");
    if (hidden_layers == 1 && hidden_width < 1) throw std::invalid_argument("hidden width must be >= 1");
  }

  /// Linear spec when width is zero, one tanh layer otherwise.
  static MlpSpec with_width(Eigen::Index input_dim, Eigen::Index width) {
    return width > 0 ? MlpSpec{input_dim, 1, width} : MlpSpec{input_dim, 0, 0};
  }

  Eigen::Index param_count() const {
    if (hidden_layers == 0) return input_dim + 2;
    return hidden_width * input_dim + 2 * hidden_width + 2;
  }
  Eigen::Index kappa_index() const { return param_count() - 1; }

  bool operator==(const MlpSpec&) const = default;
};

using ParamVector = Eigen::VectorXd;

/// Unconstrained network outputs. The natural outputs are lambda = exp(eta), k = exp(kappa).
struct NetOutput {
  double eta = 0.0;
  double kappa = 0.0;

  double rate() const { return std::exp(eta); }
  double shape() const { return std::exp(kappa); }
};

namespace detail {

inline void check_inputs(const MlpSpec& spec, const ParamVector& phi, const Eigen::VectorXd& x) {
  if (phi.size() != spec.param_count()) throw std::invalid_argument("parameter vector has wrong length");
  if (x.size() != spec.input_dim) throw std::invalid_argument("input has wrong dimension");
}

}  // namespace detail

inline NetOutput forward(const MlpSpec& spec, const ParamVector& phi, const Eigen::VectorXd& x) {
  detail::check_inputs(spec, phi, x);
  const Eigen::Index F = spec.input_dim;
  NetOutput out;
  out.kappa = phi[spec.kappa_index()];
  if (spec.hidden_layers == 0) {
    out.eta = phi.head(F).dot(x) + phi[F];
    return out;
  }
  const Eigen::Index H = spec.hidden_width;
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMajor> W(phi.data(), H, F);
  const auto b1 = phi.segment(H * F, H);
  const auto v = phi.segment(H * F + H, H);
  const double c = phi[H * F + 2 * H];
  const Eigen::VectorXd hidden = (W * x + b1).array().tanh().matrix();
  out.eta = v.dot(hidden) + c;
  return out;
}

/// eta(x) together with d eta / d phi written into `grad` (length P, kappa slot zero).
inline double eta_gradient(const MlpSpec& spec, const ParamVector& phi, const Eigen::VectorXd& x,
                           Eigen::Ref<Eigen::VectorXd> grad) {
  detail::check_inputs(spec, phi, x);
  const Eigen::Index F = spec.input_dim;
  grad.setZero();
  if (spec.hidden_layers == 0) {
    grad.head(F) = x;
    grad[F] = 1.0;
    return phi.head(F).dot(x) + phi[F];
  }
  const Eigen::Index H = spec.hidden_width;
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMajor> W(phi.data(), H, F);
  const auto b1 = phi.segment(H * F, H);
  const auto v = phi.segment(H * F + H, H);
  const double c = phi[H * F + 2 * H];
  const Eigen::VectorXd hidden = (W * x + b1).array().tanh().matrix();
  const Eigen::VectorXd delta = (v.array() * (1.0 - hidden.array().square())).matrix();
  Eigen::Map<RowMajor> dW(grad.data(), H, F);
  dW.noalias() = delta * x.transpose();
  grad.segment(H * F, H) = delta;
  grad.segment(H * F + H, H) = hidden;
  grad[H * F + 2 * H] = 1.0;
  return v.dot(hidden) + c;
}

/// 2 x P Jacobian of (eta, kappa) with respect to phi. Row 1 is the kappa unit vector.
inline Eigen::MatrixXd per_sample_jacobian(const MlpSpec& spec, const ParamVector& phi, const Eigen::VectorXd& x) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(2, spec.param_count());
  Eigen::VectorXd row(spec.param_count());
  eta_gradient(spec, phi, x, row);
  J.row(0) = row.transpose();
  J(1, spec.kappa_index()) = 1.0;
  return J;
}

/// Glorot-uniform weights, zero biases, kappa = 0 (k = 1).
inline ParamVector init_params(const MlpSpec& spec, std::uint64_t seed) {
  spec.validate();
  ParamVector phi = ParamVector::Zero(spec.param_count());
  Rng rng = make_stream(seed, 0x1417);
  auto fill = [&](Eigen::Index start, Eigen::Index count, double fan_in, double fan_out) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (Eigen::Index i = 0; i < count; ++i) phi[start + i] = limit * (2.0 * uniform01(rng) - 1.0);
  };
  const auto F = static_cast<double>(spec.input_dim);
  if (spec.hidden_layers == 0) {
    fill(0, spec.input_dim, F, 1.0);
  } else {
    const Eigen::Index H = spec.hidden_width;
    fill(0, H * spec.input_dim, F, static_cast<double>(H));
    fill(H * spec.input_dim + H, H, static_cast<double>(H), 1.0);
  }
  return phi;
}

// ---------------------------------------------------------------------------
// Objective

struct Objective {
  double value = 0.0;
  Eigen::VectorXd gradient;
};

/// Sum of record log-likelihoods over `indices` (all records when empty),
/// scaled by `likelihood_scale`, and its gradient.
inline Objective log_likelihood(const MlpSpec& spec, const ParamVector& phi, const IntervalDataset& ds,
                                std::span<const std::size_t> indices = {}, double likelihood_scale = 1.0) {
  const Eigen::Index P = spec.param_count();
  const Eigen::Index kappa_slot = spec.kappa_index();
  Objective out;
  out.gradient = Eigen::VectorXd::Zero(P);
  Eigen::VectorXd row(P);
  const double kappa = phi[kappa_slot];
  auto accumulate = [&](const TestRecord& r) {
    const double eta = eta_gradient(spec, phi, r.x, row);
    const auto term = record_log_likelihood(r.y, 0.0, eta, kappa, r.t_agelt, r.t_age);
    out.value += term.value;
    out.gradient.noalias() += term.d_eta * row;
    out.gradient[kappa_slot] += term.d_kappa;
  };
  if (indices.empty()) {
    for (const auto& r : ds.records()) accumulate(r);
  } else {
    for (auto i : indices) accumulate(ds[i]);
  }
  out.value *= likelihood_scale;
  out.gradient *= likelihood_scale;
  return out;
}

/// Unnormalized log posterior: log-likelihood - (precision / 2) |phi|^2.
inline Objective log_posterior(const MlpSpec& spec, const ParamVector& phi, const IntervalDataset& ds,
                               double precision, std::span<const std::size_t> indices = {},
                               double likelihood_scale = 1.0) {
  Objective out = log_likelihood(spec, phi, ds, indices, likelihood_scale);
  out.value -= 0.5 * precision * phi.squaredNorm();
  out.gradient -= precision * phi;
  return out;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  explicit AdamState(Eigen::Index n = 0) : m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)) {}
};

/// One bias-corrected Adam descent step on `params` along the loss gradient.
/// Coordinates with mask[i] == false are left untouched (moments included).
inline void adam_step(AdamState& state, Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& gradient,
                      double lr, std::span<const char> mask = {}) {
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    if (!mask.empty() && !mask[static_cast<std::size_t>(i)]) continue;
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * gradient[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * gradient[i] * gradient[i];
    params[i] -= lr * (state.m[i] / c1) / (std::sqrt(state.v[i] / c2) + state.epsilon);
  }
}

// ---------------------------------------------------------------------------
// MAP training

struct TrainConfig {
  double learning_rate = 1e-2;
  std::size_t batch_size = 128;
  int epochs = 2000;
  double precision = 1e-2;
  bool coordinate_descent = false;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
    if (batch_size < 1) throw std::invalid_argument("batch size must be positive");
    if (epochs < 1) throw std::invalid_argument("epochs must be positive");
    if (!(precision > 0.0)) throw std::invalid_argument("prior precision must be positive");
  }
};

struct TrainResult {
  ParamVector phi;
  double final_objective = 0.0;
  /// Full-batch log posterior after each epoch.
  std::vector<double> history;
};

/// Maximizes the log posterior with minibatch Adam. Each epoch visits a fresh
/// permutation of the records in batches of `batch_size` (the last batch may be
/// short); a batch's likelihood is rescaled by N / |batch|. With batch_size >= N
/// every step is plain full-batch Adam over the records in dataset order.
/// Coordinate descent alternates a network-weights pass and a shape pass per epoch.
inline TrainResult map_train(const MlpSpec& spec, const IntervalDataset& ds, const TrainConfig& cfg,
                             const ParamVector* init = nullptr) {
  spec.validate();
  cfg.validate();
  if (ds.n_features() != spec.input_dim) throw std::invalid_argument("dataset does not match network input");
  const Eigen::Index P = spec.param_count();
  ParamVector phi = init ? *init : init_params(spec, cfg.seed);
  if (phi.size() != P) throw std::invalid_argument("initial parameters have wrong length");

  const std::size_t N = ds.size();
  const std::size_t B = std::min(cfg.batch_size, std::max<std::size_t>(N, 1));
  const bool full_batch = B >= N;
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_stream(cfg.seed, 0xADA);

  std::vector<char> theta_mask(static_cast<std::size_t>(P), 1), kappa_mask(static_cast<std::size_t>(P), 0);
  const auto kappa_slot = static_cast<std::size_t>(spec.kappa_index());
  theta_mask.at(kappa_slot) = 0;
  kappa_mask.at(kappa_slot) = 1;
  AdamState joint(P), theta_state(P), kappa_state(P);

  TrainResult result;
  result.history.reserve(static_cast<std::size_t>(cfg.epochs));

  auto run_pass = [&](AdamState& state, std::span<const char> mask) {
    if (N == 0) {
      const auto obj = log_posterior(spec, phi, ds, cfg.precision, {}, 1.0);
      adam_step(state, phi, -obj.gradient, cfg.learning_rate, mask);
      return;
    }
    if (!full_batch) {
      for (std::size_t i = N - 1; i > 0; --i) {
        auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i + 1));
        std::swap(order[i], order[std::min(j, i)]);
      }
    }
    for (std::size_t start = 0; start < N; start += B) {
      const std::size_t len = std::min(B, N - start);
      std::span<const std::size_t> batch(order.data() + start, len);
      const double scale = static_cast<double>(N) / static_cast<double>(len);
      const auto obj = log_posterior(spec, phi, ds, cfg.precision, batch, scale);
      if (!std::isfinite(obj.value) || !obj.gradient.allFinite()) {
        throw NumericalError("non-finite objective during MAP training (learning rate " +
                             std::to_string(cfg.learning_rate) + " may be too high)");
      }
      adam_step(state, phi, -obj.gradient, cfg.learning_rate, mask);
    }
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.coordinate_descent) {
      run_pass(theta_state, theta_mask);
      run_pass(kappa_state, kappa_mask);
    } else {
      run_pass(joint, {});
    }
    const double full = log_posterior(spec, phi, ds, cfg.precision).value;
    if (!std::isfinite(full) || !phi.allFinite()) {
      throw NumericalError("non-finite objective after epoch " + std::to_string(epoch) + " (learning rate " +
                           std::to_string(cfg.learning_rate) + " may be too high)");
    }
    result.history.push_back(full);
  }
  result.phi = std::move(phi);
  result.final_objective = result.history.back();
  return result;
}

}  // namespace intervalweib
