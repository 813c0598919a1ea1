#pragma once

// Weibull-Cox intensity h(t) = e^g (lambda t)^(k-1) k lambda with covariates held
// constant inside each inspection interval. All gradients are with respect to
// the unconstrained coordinates g, eta = log(lambda) and kappa = log(k).

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>

#include <Eigen/Dense>

#include "intervalweib/dataset.hpp"

namespace intervalweib {

/// Upper clamp on the cumulative hazard before exponentiation.
inline constexpr double kMaxCumulativeHazard = 700.0;
/// Floor on the interval failure probability inside logarithms.
inline constexpr double kMinFailureProbability = 1e-15;

namespace detail {

inline void check_interval(double t1, double t2) {
  if (!(t1 >= 0.0)) throw std::invalid_argument("interval start must be >= 0");
  if (t1 > t2) throw std::invalid_argument("interval start exceeds interval end");
}

/// t^k * log(t), continuous at t = 0.
inline double pow_log(double t, double k) { return t > 0.0 ? std::pow(t, k) * std::log(t) : 0.0; }

/// t^k * log(t)^2, continuous at t = 0.
inline double pow_log2(double t, double k) {
  if (t <= 0.0) return 0.0;
  const double l = std::log(t);
  return std::pow(t, k) * l * l;
}

}  // namespace detail

/// Integral of the intensity over [t1, t2]: e^g * lambda^k * (t2^k - t1^k).
inline double cumulative_hazard(double g, double rate, double shape, double t1, double t2) {
  detail::check_interval(t1, t2);
  if (!(rate > 0.0) || !(shape > 0.0)) throw std::invalid_argument("rate and shape must be positive");
  if (t1 == t2) return 0.0;
  return std::exp(g + shape * std::log(rate)) * (std::pow(t2, shape) - std::pow(t1, shape));
}

/// P[T > t2 | T > t1]; the hazard is clamped so the result never underflows to NaN.
inline double conditional_survival(double g, double rate, double shape, double t1, double t2) {
  const double H = cumulative_hazard(g, rate, shape, t1, t2);
  return std::exp(-std::min(H, kMaxCumulativeHazard));
}

/// Rate that makes R the survival probability at t_fix with no covariate effect:
/// exp(-(lambda * t_fix)^k) = R.
inline double rate_from_reliability(double reliability, double shape, double t_fix) {
  if (!(reliability > 0.0 && reliability < 1.0)) throw std::invalid_argument("reliability must lie in (0, 1)");
  if (!(shape > 0.0)) throw std::invalid_argument("shape must be positive");
  if (!(t_fix > 0.0)) throw std::invalid_argument("t_fix must be positive");
  return std::pow(-std::log(reliability), 1.0 / shape) / t_fix;
}

/// Log-likelihood of one interval record and its partial derivatives.
struct RecordTerm {
  double value = 0.0;
  double d_g = 0.0;
  double d_eta = 0.0;
  double d_kappa = 0.0;
};

/// Record log-likelihood given the interval's time integrals A = t2^k - t1^k
/// and dA = dA/dkappa = k (t2^k ln t2 - t1^k ln t1); callers that share k
/// across many records can cache the powers.
inline RecordTerm record_term(int y, double g, double eta, double k, double A, double dA) {
  const double scale = std::exp(g + k * eta);
  const double H = scale * A;
  // dH/dg = H, dH/deta = k H, dH/dkappa = scale (A k eta + dA)
  const double H_kappa = scale * (A * k * eta + dA);

  RecordTerm term;
  double l_H = 0.0;
  if (y == 0) {
    term.value = -H;
    l_H = -1.0;
  } else {
    const double p_fail = -std::expm1(-H);
    if (p_fail < kMinFailureProbability) {
      term.value = std::log(kMinFailureProbability);
      return term;
    }
    // log(1 - e^{-H}) without cancellation on either side of ln 2
    term.value = H < std::numbers::ln2 ? std::log(p_fail) : std::log1p(-std::exp(-H));
    l_H = 1.0 / std::expm1(H);
  }
  term.d_g = l_H * H;
  term.d_eta = l_H * k * H;
  term.d_kappa = l_H * H_kappa;
  return term;
}

/// Bernoulli interval log-likelihood (1-y) log S + y log(1-S) with
/// S = exp(-e^g lambda^k (t2^k - t1^k)), lambda = e^eta, k = e^kappa.
inline RecordTerm record_log_likelihood(int y, double g, double eta, double kappa, double t1, double t2) {
  const double k = std::exp(kappa);
  const double A = std::pow(t2, k) - std::pow(t1, k);
  const double dA = k * (detail::pow_log(t2, k) - detail::pow_log(t1, k));
  return record_term(y, g, eta, k, A, dA);
}

struct LogLikelihood {
  double value = 0.0;
  Eigen::VectorXd d_g;
  Eigen::VectorXd d_eta;
  double d_kappa = 0.0;
};

/// Sum of record log-likelihoods with per-record g and eta and a shared kappa.
/// Reduction runs in record order.
inline LogLikelihood interval_log_likelihood(const IntervalDataset& ds, std::span<const double> g,
                                             std::span<const double> eta, double kappa) {
  if (g.size() != ds.size() || eta.size() != ds.size()) {
    throw std::invalid_argument("per-record parameters must align with the dataset");
  }
  LogLikelihood out;
  const auto n = static_cast<Eigen::Index>(ds.size());
  out.d_g.resize(n);
  out.d_eta.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = ds[static_cast<std::size_t>(i)];
    const auto term = record_log_likelihood(r.y, g[static_cast<std::size_t>(i)], eta[static_cast<std::size_t>(i)],
                                            kappa, r.t_agelt, r.t_age);
    out.value += term.value;
    out.d_g[i] = term.d_g;
    out.d_eta[i] = term.d_eta;
    out.d_kappa += term.d_kappa;
  }
  return out;
}

/// One posterior draw of a fitted hazard at fixed covariates: the cumulative
/// hazard from age 0 is exp(log_scale) * t^shape, i.e. log_scale = g + k eta.
struct HazardDraw {
  double log_scale = 0.0;
  double shape = 1.0;

  double cumulative(double t1, double t2) const {
    return std::exp(log_scale) * (std::pow(t2, shape) - std::pow(t1, shape));
  }
  /// Interval failure probability 1 - S, hazard clamped as in conditional_survival.
  double failure_probability(double t1, double t2) const {
    return -std::expm1(-std::min(cumulative(t1, t2), kMaxCumulativeHazard));
  }
  /// Survival from age 0.
  double reliability(double t) const { return std::exp(-std::min(cumulative(0.0, t), kMaxCumulativeHazard)); }
};

}  // namespace intervalweib
