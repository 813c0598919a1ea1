#pragma once

// Weibull regression posteriors sampled with NUTS. The shared rate is
// parameterized by the reliability R at t_fix and the shape k:
//   lambda = (-ln R)^(1/k) / t_fix,
// and covariates enter the hazard as exp(theta . x). Sampling happens in
// (theta, [log tau2], logit R, log k).

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "intervalweib/dataset.hpp"
#include "intervalweib/nuts.hpp"
#include "intervalweib/survival.hpp"

namespace intervalweib {

/// Priors on the reliability-at-t_fix and shape: R ~ Beta(a, b), log k ~ N(m, s^2).
struct ReliabilityPriors {
  double reliability_a = 5.0;
  double reliability_b = 1.0;
  double log_shape_mean = 0.0;
  double log_shape_sd = 0.5;
  double t_fix = 1.0;

  void validate() const {
    if (!(reliability_a > 0.0 && reliability_b > 0.0)) throw std::invalid_argument("Beta prior parameters must be positive");
    if (!(log_shape_sd > 0.0)) throw std::invalid_argument("shape prior sd must be positive");
    if (!(t_fix > 0.0)) throw std::invalid_argument("t_fix must be positive");
  }
};

/// Two-component normal mixture prior on each coefficient. With
/// `hypervariance`, the slab variance of each feature gets an inverse-gamma
/// prior (shape `hyper_shape`, mean `slab_variance`) and the spike keeps the
/// fixed spike/slab ratio.
struct SpikeSlabConfig {
  double spike_variance = 0.01;
  double slab_variance = 1.0;
  double inclusion_prob = 0.5;
  bool hypervariance = false;
  double hyper_shape = 5.0;

  static constexpr double kMinVarianceRatio = 100.0;

  void validate() const {
    if (!(spike_variance > 0.0 && slab_variance > 0.0)) throw std::invalid_argument("spike/slab variances must be positive");
    if (!(slab_variance / spike_variance >= kMinVarianceRatio)) {
      throw std::invalid_argument("slab variance must be at least 100x the spike variance");
    }
    if (!(inclusion_prob > 0.0 && inclusion_prob < 1.0)) throw std::invalid_argument("inclusion probability must lie in (0, 1)");
    if (hypervariance && !(hyper_shape > 1.0)) throw std::invalid_argument("hypervariance shape must exceed 1");
  }
};

enum class CoefficientPrior { None, Normal, SpikeSlabMixture, SpikeSlabEnumerated };

enum class SpikeSlabMode { ContinuousNmig, DiscreteMarginalized };

namespace detail {

/// log(1 + e^x) without overflow.
inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double log_normal_pdf(double x, double variance) {
  return -0.5 * std::log(2.0 * std::numbers::pi * variance) - 0.5 * x * x / variance;
}

}  // namespace detail

/// Posterior slab responsibility of one coefficient value.
inline double slab_responsibility(double theta, double spike_variance, double slab_variance, double inclusion_prob) {
  const double log_slab = std::log(inclusion_prob) + detail::log_normal_pdf(theta, slab_variance);
  const double log_spike = std::log1p(-inclusion_prob) + detail::log_normal_pdf(theta, spike_variance);
  return detail::sigmoid(log_slab - log_spike);
}

/// Log density of the Weibull regression posterior over unconstrained coordinates.
class WeibullRegressionModel {
 public:
  WeibullRegressionModel(const IntervalDataset& ds, CoefficientPrior prior, ReliabilityPriors priors = {},
                         SpikeSlabConfig spike_slab = {}, double normal_variance = 1.0)
      : ds_(ds), prior_(prior), priors_(priors), ss_(spike_slab), normal_variance_(normal_variance) {
    priors_.validate();
    if (prior_ == CoefficientPrior::SpikeSlabMixture || prior_ == CoefficientPrior::SpikeSlabEnumerated) ss_.validate();
    if (prior_ == CoefficientPrior::SpikeSlabEnumerated && ss_.hypervariance) {
      throw std::invalid_argument("hypervariance is only available with the continuous mixture");
    }
    if (!(normal_variance_ > 0.0)) throw std::invalid_argument("coefficient prior variance must be positive");
    n_theta_ = prior_ == CoefficientPrior::None ? 0 : ds_.n_features();
    n_hyper_ = (prior_ == CoefficientPrior::SpikeSlabMixture && ss_.hypervariance) ? n_theta_ : 0;
    index_rows();
  }

  Eigen::Index dim() const { return n_theta_ + n_hyper_ + 2; }
  Eigen::Index n_theta() const { return n_theta_; }
  Eigen::Index n_hyper() const { return n_hyper_; }
  Eigen::Index logit_r_index() const { return n_theta_ + n_hyper_; }
  Eigen::Index log_k_index() const { return n_theta_ + n_hyper_ + 1; }
  const ReliabilityPriors& priors() const { return priors_; }
  const SpikeSlabConfig& spike_slab() const { return ss_; }
  CoefficientPrior prior() const { return prior_; }

  std::vector<std::string> unconstrained_names() const {
    std::vector<std::string> names;
    for (Eigen::Index f = 0; f < n_theta_; ++f) names.push_back("theta[" + std::to_string(f + 1) + "]");
    for (Eigen::Index f = 0; f < n_hyper_; ++f) names.push_back("log_tau2[" + std::to_string(f + 1) + "]");
    names.push_back("logit_R");
    names.push_back("log_k");
    return names;
  }

  /// theta[f], tau2[f] (hypervariance only), R, k, lambda.
  std::vector<std::string> constrained_names() const {
    std::vector<std::string> names;
    for (Eigen::Index f = 0; f < n_theta_; ++f) names.push_back("theta[" + std::to_string(f + 1) + "]");
    for (Eigen::Index f = 0; f < n_hyper_; ++f) names.push_back("tau2[" + std::to_string(f + 1) + "]");
    names.push_back("R");
    names.push_back("k");
    names.push_back("lambda");
    return names;
  }

  Eigen::VectorXd constrain(const Eigen::VectorXd& q) const {
    Eigen::VectorXd out(n_theta_ + n_hyper_ + 3);
    out.head(n_theta_) = q.head(n_theta_);
    for (Eigen::Index f = 0; f < n_hyper_; ++f) out[n_theta_ + f] = std::exp(q[n_theta_ + f]);
    const double R = detail::sigmoid(q[logit_r_index()]);
    const double k = std::exp(q[log_k_index()]);
    const double log_neg_log_r = std::log(detail::softplus(-q[logit_r_index()]));
    out[n_theta_ + n_hyper_] = R;
    out[n_theta_ + n_hyper_ + 1] = k;
    out[n_theta_ + n_hyper_ + 2] = std::exp(log_neg_log_r / k - std::log(priors_.t_fix));
    return out;
  }

  Eigen::VectorXd initial_point() const {
    Eigen::VectorXd q = Eigen::VectorXd::Zero(dim());
    for (Eigen::Index f = 0; f < n_hyper_; ++f) q[n_theta_ + f] = std::log(ss_.slab_variance);
    q[logit_r_index()] = std::log(0.8 / 0.2);
    q[log_k_index()] = priors_.log_shape_mean;
    return q;
  }

  double log_density(const Eigen::VectorXd& q, Eigen::VectorXd& grad) const {
    grad = Eigen::VectorXd::Zero(dim());
    const double u = q[logit_r_index()];
    const double kappa = q[log_k_index()];
    const double k = std::exp(kappa);
    const double neg_log_r = detail::softplus(-u);  // -ln R
    const double log_neg_log_r = std::log(neg_log_r);
    const double log_t_fix = std::log(priors_.t_fix);
    const double eta = log_neg_log_r / k - log_t_fix;
    const double deta_du = -detail::sigmoid(-u) / (k * neg_log_r);  // (1 - R) / (k ln R)
    const double deta_dkappa = -log_neg_log_r / k;

    // Inspection times repeat across records: one pow per distinct time.
    std::vector<double> pw(times_.size()), pwl(times_.size());
    for (std::size_t u = 0; u < times_.size(); ++u) {
      pw[u] = std::pow(times_[u], k);
      pwl[u] = times_[u] > 0.0 ? pw[u] * log_times_[u] : 0.0;
    }
    double lp = 0.0;
    double d_eta = 0.0, d_kappa = 0.0;
    const auto theta = q.head(n_theta_);
    for (const auto& row : rows_) {
      const auto& r = ds_[row.record];
      const double g = n_theta_ > 0 ? theta.dot(r.x) : 0.0;
      const double A = pw[row.t2] - pw[row.t1];
      const double dA = k * (pwl[row.t2] - pwl[row.t1]);
      const auto term = record_term(r.y, g, eta, k, A, dA);
      lp += row.weight * term.value;
      d_eta += row.weight * term.d_eta;
      d_kappa += row.weight * term.d_kappa;
      if (n_theta_ > 0) grad.head(n_theta_) += term.d_g * r.x;
    }
    grad[logit_r_index()] += d_eta * deta_du;
    grad[log_k_index()] += d_kappa + d_eta * deta_dkappa;

    // R ~ Beta(a, b) pushed through the logit: a log R + b log(1 - R).
    lp += -priors_.reliability_a * detail::softplus(-u) - priors_.reliability_b * detail::softplus(u);
    grad[logit_r_index()] += priors_.reliability_a * detail::sigmoid(-u) - priors_.reliability_b * detail::sigmoid(u);
    // log k ~ N(m, s^2)
    const double z = (kappa - priors_.log_shape_mean) / priors_.log_shape_sd;
    lp += -0.5 * z * z;
    grad[log_k_index()] += -z / priors_.log_shape_sd;

    lp += coefficient_log_prior(q, grad);
    return lp;
  }

  LogDensityFn density() const {
    return [this](const Eigen::VectorXd& q, Eigen::VectorXd& grad) { return log_density(q, grad); };
  }

  /// Slab responsibility of each coefficient at one unconstrained draw.
  Eigen::VectorXd responsibilities(const Eigen::VectorXd& q) const {
    Eigen::VectorXd out(n_theta_);
    for (Eigen::Index f = 0; f < n_theta_; ++f) {
      const auto [spike, slab] = variances(q, f);
      out[f] = slab_responsibility(q[f], spike, slab, ss_.inclusion_prob);
    }
    return out;
  }

 private:
  struct Row {
    std::size_t record;  // representative record
    std::size_t t1, t2;  // indices into times_
    double weight;       // identical records folded into this row
  };

  void index_rows() {
    for (const auto& r : ds_.records()) {
      times_.push_back(r.t_agelt);
      times_.push_back(r.t_age);
    }
    std::sort(times_.begin(), times_.end());
    times_.erase(std::unique(times_.begin(), times_.end()), times_.end());
    for (double t : times_) log_times_.push_back(t > 0.0 ? std::log(t) : 0.0);
    auto at = [&](double t) {
      return static_cast<std::size_t>(std::lower_bound(times_.begin(), times_.end(), t) - times_.begin());
    };
    // Without covariates a record is just (t1, t2, y); fold duplicates.
    std::map<std::tuple<std::size_t, std::size_t, int>, std::size_t> seen;
    for (std::size_t i = 0; i < ds_.size(); ++i) {
      const auto& r = ds_[i];
      Row row{i, at(r.t_agelt), at(r.t_age), 1.0};
      if (n_theta_ == 0) {
        const auto [it, fresh] = seen.try_emplace({row.t1, row.t2, r.y}, rows_.size());
        if (!fresh) {
          rows_[it->second].weight += 1.0;
          continue;
        }
      }
      rows_.push_back(row);
    }
  }

  std::pair<double, double> variances(const Eigen::VectorXd& q, Eigen::Index f) const {
    if (n_hyper_ == 0) return {ss_.spike_variance, ss_.slab_variance};
    const double tau2 = std::exp(q[n_theta_ + f]);
    return {tau2 * ss_.spike_variance / ss_.slab_variance, tau2};
  }

  double coefficient_log_prior(const Eigen::VectorXd& q, Eigen::VectorXd& grad) const {
    double lp = 0.0;
    switch (prior_) {
      case CoefficientPrior::None:
        break;
      case CoefficientPrior::Normal:
        for (Eigen::Index f = 0; f < n_theta_; ++f) {
          lp += -0.5 * q[f] * q[f] / normal_variance_;
          grad[f] += -q[f] / normal_variance_;
        }
        break;
      case CoefficientPrior::SpikeSlabMixture:
        // Mixture density evaluated directly; log-sum-exp of the two weighted components.
        for (Eigen::Index f = 0; f < n_theta_; ++f) {
          const double theta = q[f];
          const auto [spike, slab] = variances(q, f);
          const double a = std::log(ss_.inclusion_prob) + detail::log_normal_pdf(theta, slab);
          const double b = std::log1p(-ss_.inclusion_prob) + detail::log_normal_pdf(theta, spike);
          const double m = std::max(a, b);
          lp += m + std::log(std::exp(a - m) + std::exp(b - m));
          const double r = detail::sigmoid(a - b);
          grad[f] += -theta * (r / slab + (1.0 - r) / spike);
          if (n_hyper_ > 0) {
            const Eigen::Index h = n_theta_ + f;
            // d/d log tau2 of each component's log density.
            grad[h] += r * (-0.5 + 0.5 * theta * theta / slab) + (1.0 - r) * (-0.5 + 0.5 * theta * theta / spike);
            // tau2 ~ InvGamma(shape, scale) with mean slab_variance, in log coordinates.
            const double shape = ss_.hyper_shape;
            const double scale = ss_.slab_variance * (shape - 1.0);
            lp += -shape * q[h] - scale * std::exp(-q[h]);
            grad[h] += -shape + scale * std::exp(-q[h]);
          }
        }
        break;
      case CoefficientPrior::SpikeSlabEnumerated:
        // Indicator gamma_f in {0, 1} summed out by enumerating its two values.
        for (Eigen::Index f = 0; f < n_theta_; ++f) {
          const double theta = q[f];
          std::array<double, 2> log_joint{};
          std::array<double, 2> d_theta{};
          for (int gamma = 0; gamma < 2; ++gamma) {
            const double variance = gamma ? ss_.slab_variance : ss_.spike_variance;
            const double log_p_gamma = gamma ? std::log(ss_.inclusion_prob) : std::log1p(-ss_.inclusion_prob);
            log_joint[static_cast<std::size_t>(gamma)] = log_p_gamma + detail::log_normal_pdf(theta, variance);
            d_theta[static_cast<std::size_t>(gamma)] = -theta / variance;
          }
          const double total = detail::log_sum_exp(log_joint[0], log_joint[1]);
          lp += total;
          for (std::size_t gamma = 0; gamma < 2; ++gamma) grad[f] += std::exp(log_joint[gamma] - total) * d_theta[gamma];
        }
        break;
    }
    return lp;
  }

  const IntervalDataset& ds_;
  CoefficientPrior prior_;
  ReliabilityPriors priors_;
  SpikeSlabConfig ss_;
  double normal_variance_;
  Eigen::Index n_theta_ = 0;
  Eigen::Index n_hyper_ = 0;
  std::vector<double> times_, log_times_;
  std::vector<Row> rows_;
};

/// Runs NUTS on `model` and returns constrained draws (theta, tau2, R, k, lambda).
inline PosteriorSamples sample_model(const WeibullRegressionModel& model, const NutsConfig& cfg) {
  auto outputs = nuts_chains(model.density(), model.initial_point(), cfg);
  PosteriorSamples s;
  s.names = model.constrained_names();
  for (auto& o : outputs) {
    s.divergences += o.divergences;
    Eigen::MatrixXd constrained(o.draws.rows(), s.dim());
    for (Eigen::Index i = 0; i < o.draws.rows(); ++i) {
      constrained.row(i) = model.constrain(o.draws.row(i).transpose()).transpose();
    }
    s.chains.push_back(std::move(constrained));
  }
  s.compute_diagnostics();
  const double total = static_cast<double>(cfg.chains) * cfg.draws;
  if (s.divergences > 0.25 * total) {
    s.warning = std::to_string(s.divergences) + " of " + std::to_string(static_cast<long>(total)) +
                " transitions diverged";
  }
  return s;
}

/// Weibull model without covariates: posterior over (R, k).
inline PosteriorSamples fit_baseline(const IntervalDataset& ds, const ReliabilityPriors& priors, const NutsConfig& cfg) {
  WeibullRegressionModel model(ds, CoefficientPrior::None, priors);
  return sample_model(model, cfg);
}

/// Linear Weibull regression with theta ~ N(0, variance I).
inline PosteriorSamples fit_linear_mvn(const IntervalDataset& ds, const NutsConfig& cfg,
                                       const ReliabilityPriors& priors = {}, double variance = 1.0) {
  WeibullRegressionModel model(ds, CoefficientPrior::Normal, priors, {}, variance);
  return sample_model(model, cfg);
}

/// Mean slab responsibility of each coefficient over all draws.
inline std::vector<double> compute_pip(const PosteriorSamples& samples, const SpikeSlabConfig& ss) {
  std::vector<double> pip;
  for (Eigen::Index f = 0;; ++f) {
    const std::string name = "theta[" + std::to_string(f + 1) + "]";
    if (std::find(samples.names.begin(), samples.names.end(), name) == samples.names.end()) break;
    const auto theta = samples.pooled(name);
    std::vector<double> tau2;
    const std::string hyper = "tau2[" + std::to_string(f + 1) + "]";
    if (std::find(samples.names.begin(), samples.names.end(), hyper) != samples.names.end()) tau2 = samples.pooled(hyper);
    double sum = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      double spike = ss.spike_variance, slab = ss.slab_variance;
      if (!tau2.empty()) {
        slab = tau2[i];
        spike = tau2[i] * ss.spike_variance / ss.slab_variance;
      }
      sum += slab_responsibility(theta[i], spike, slab, ss.inclusion_prob);
    }
    pip.push_back(theta.empty() ? 0.0 : sum / static_cast<double>(theta.size()));
  }
  return pip;
}

struct SpikeSlabFit {
  PosteriorSamples samples;
  std::vector<double> pip;

  /// Indices of features with PIP > 0.5 (median probability model).
  std::vector<std::size_t> selected() const {
    std::vector<std::size_t> out;
    for (std::size_t f = 0; f < pip.size(); ++f) {
      if (pip[f] > 0.5) out.push_back(f);
    }
    return out;
  }
};

inline SpikeSlabFit fit_spike_slab(const IntervalDataset& ds, const SpikeSlabConfig& ss, SpikeSlabMode mode,
                                   const NutsConfig& cfg, const ReliabilityPriors& priors = {}) {
  ss.validate();
  const auto prior = mode == SpikeSlabMode::ContinuousNmig ? CoefficientPrior::SpikeSlabMixture
                                                           : CoefficientPrior::SpikeSlabEnumerated;
  WeibullRegressionModel model(ds, prior, priors, ss);
  SpikeSlabFit fit;
  fit.samples = sample_model(model, cfg);
  fit.pip = compute_pip(fit.samples, ss);
  return fit;
}

/// Hazard draws at covariates x from constrained regression samples.
inline std::vector<HazardDraw> regression_hazards(const PosteriorSamples& samples, const Eigen::VectorXd& x,
                                                  double t_fix) {
  const auto R = samples.pooled("R");
  const auto k = samples.pooled("k");
  std::vector<std::vector<double>> theta;
  for (Eigen::Index f = 0; f < x.size(); ++f) {
    const std::string name = "theta[" + std::to_string(f + 1) + "]";
    if (std::find(samples.names.begin(), samples.names.end(), name) == samples.names.end()) break;
    theta.push_back(samples.pooled(name));
  }
  if (!theta.empty() && static_cast<Eigen::Index>(theta.size()) != x.size()) {
    throw std::invalid_argument("covariate dimension does not match the fitted model");
  }
  std::vector<HazardDraw> out(R.size());
  for (std::size_t s = 0; s < R.size(); ++s) {
    double g = 0.0;
    for (std::size_t f = 0; f < theta.size(); ++f) g += theta[f][s] * x[static_cast<Eigen::Index>(f)];
    // exp(g) lambda^k = exp(g) (-ln R) / t_fix^k
    out[s] = HazardDraw{g + std::log(-std::log(R[s])) - k[s] * std::log(t_fix), k[s]};
  }
  return out;
}

}  // namespace intervalweib
