#pragma once

// Gaussian (Laplace) posterior around the MAP network parameters with a
// generalized Gauss-Newton precision, Laplace evidence, post-hoc prior
// precision selection, and Monte-Carlo posterior predictives.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "intervalweib/common.hpp"
#include "intervalweib/dataset.hpp"
#include "intervalweib/nn.hpp"
#include "intervalweib/survival.hpp"

namespace intervalweib {

/// Negative Hessian of one record's log-likelihood with respect to the
/// unconstrained outputs (eta, kappa). Not projected; may be indefinite.
inline Eigen::Matrix2d link_hessian(int y, double eta, double kappa, double t1, double t2) {
  const double k = std::exp(kappa);
  const double A = std::pow(t2, k) - std::pow(t1, k);
  const double A1 = k * (detail::pow_log(t2, k) - detail::pow_log(t1, k));
  const double A2 = A1 + k * k * (detail::pow_log2(t2, k) - detail::pow_log2(t1, k));
  const double scale = std::exp(k * eta);
  const double H = scale * A;
  const double ke = k * eta;

  const Eigen::Vector2d grad(k * H, scale * (A * ke + A1));
  Eigen::Matrix2d hess;
  hess(0, 0) = k * k * H;
  hess(0, 1) = hess(1, 0) = k * H + k * grad[1];
  hess(1, 1) = scale * (ke * (A * ke + A1) + A1 * ke + A * ke + A2);

  double l1 = 0.0, l2 = 0.0;  // first and second derivative of the log-likelihood in H
  if (y == 0) {
    l1 = -1.0;
  } else {
    if (-std::expm1(-H) < kMinFailureProbability) return Eigen::Matrix2d::Zero();
    const double a = 1.0 / std::expm1(H);
    l1 = a;
    l2 = -a * (1.0 + a);
  }
  return -(l2 * grad * grad.transpose() + l1 * hess);
}

/// Clips negative eigenvalues of a symmetric 2x2 matrix to zero.
inline Eigen::Matrix2d project_psd(const Eigen::Matrix2d& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(0.5 * (m + m.transpose()));
  const Eigen::Vector2d values = eig.eigenvalues().cwiseMax(0.0);
  return eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose();
}

/// Exact: per-record link Hessians are used as computed. Projected: each is
/// clipped to PSD first. Auto: exact when the assembled precision is positive
/// definite, projected otherwise. For 0-hidden-layer networks the exact form is
/// the full Hessian of the negative log posterior.
enum class Curvature { Auto, Exact, Projected };

/// sum_i J_i^T H_i J_i + precision * I, J_i the per-record Jacobian at phi.
inline Eigen::MatrixXd ggn_precision(const MlpSpec& spec, const ParamVector& phi, const IntervalDataset& ds,
                                     double precision, bool project) {
  const Eigen::Index P = spec.param_count();
  const Eigen::Index kappa_slot = spec.kappa_index();
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(P, P);
  Eigen::VectorXd row(P);
  const double kappa = phi[kappa_slot];
  for (const auto& r : ds.records()) {
    const double eta = eta_gradient(spec, phi, r.x, row);
    Eigen::Matrix2d h = link_hessian(r.y, eta, kappa, r.t_agelt, r.t_age);
    if (project) h = project_psd(h);
    // J = [row; e_kappa], row[kappa_slot] == 0.
    G.selfadjointView<Eigen::Lower>().rankUpdate(row, h(0, 0));
    G.row(kappa_slot) += h(0, 1) * row.transpose();  // kappa is the last slot: lower triangle
    G(kappa_slot, kappa_slot) += h(1, 1);
  }
  Eigen::MatrixXd lower = G.triangularView<Eigen::Lower>();
  Eigen::MatrixXd full = lower + lower.transpose();
  full.diagonal() = lower.diagonal();
  full.diagonal().array() += precision;
  return full;
}

/// Square-root factor L with L L^T = cov; falls back to an eigen square root
/// for semi-definite input (e.g. the zero matrix).
inline Eigen::MatrixXd covariance_factor(const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal();
}

/// log p(D) ~ ell + (P/2) log(2 pi) + (1/2) log det(cov), where `ell` is the log
/// joint at the MAP including the prior's normalizing constant.
inline double log_marginal_likelihood(double log_joint, const Eigen::MatrixXd& cov, Eigen::Index P) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericalError("covariance is not positive definite");
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double value = log_joint + 0.5 * static_cast<double>(P) * std::log(2.0 * std::numbers::pi) + 0.5 * log_det;
  if (!std::isfinite(value)) throw NumericalError("non-finite log determinant");
  return value;
}

/// log-likelihood + log N(phi; 0, I / precision).
inline double log_joint_normalized(double log_lik, const ParamVector& phi, double precision) {
  const auto P = static_cast<double>(phi.size());
  return log_lik - 0.5 * precision * phi.squaredNorm() + 0.5 * P * std::log(precision / (2.0 * std::numbers::pi));
}

struct LaplacePosterior {
  MlpSpec spec;
  ParamVector map;
  Eigen::MatrixXd covariance;
  double precision = 1.0;
  double log_likelihood = 0.0;
  double log_evidence = 0.0;
  bool projected_curvature = false;
  Eigen::MatrixXd factor;  // factor * factor^T == covariance

  Eigen::Index param_count() const { return map.size(); }
};

namespace detail {

struct PrecisionSolve {
  Eigen::MatrixXd covariance;
  double log_det_precision = 0.0;
  bool projected = false;
};

inline PrecisionSolve solve_precision(const MlpSpec& spec, const ParamVector& phi, const IntervalDataset& ds,
                                      double precision, Curvature mode) {
  auto attempt = [&](bool project, PrecisionSolve& out) {
    const Eigen::MatrixXd G = ggn_precision(spec, phi, ds, precision, project);
    Eigen::LLT<Eigen::MatrixXd> llt(G);
    if (llt.info() != Eigen::Success) return false;
    const Eigen::MatrixXd L = llt.matrixL();
    out.log_det_precision = 2.0 * L.diagonal().array().log().sum();
    Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(G.rows(), G.cols()));
    out.covariance = 0.5 * (cov + cov.transpose());
    out.projected = project;
    return std::isfinite(out.log_det_precision);
  };
  PrecisionSolve out;
  if (mode != Curvature::Projected && attempt(false, out)) return out;
  if (mode == Curvature::Exact) throw NumericalError("exact GGN precision is not positive definite");
  if (!attempt(true, out)) throw NumericalError("Cholesky factorization of the GGN precision failed");
  return out;
}

}  // namespace detail

/// Sigma_GGN = (sum_i J^T H J + precision I)^-1 at phi.
inline Eigen::MatrixXd ggn_covariance(const MlpSpec& spec, const ParamVector& phi, const IntervalDataset& ds,
                                      double precision, Curvature mode = Curvature::Auto) {
  if (!(precision > 0.0)) throw std::invalid_argument("prior precision must be positive");
  return detail::solve_precision(spec, phi, ds, precision, mode).covariance;
}

/// Laplace posterior at a fixed MAP point for the given prior precision.
inline LaplacePosterior fit_laplace(const MlpSpec& spec, const ParamVector& map, const IntervalDataset& ds,
                                    double precision, Curvature mode = Curvature::Auto) {
  if (!(precision > 0.0)) throw std::invalid_argument("prior precision must be positive");
  auto solved = detail::solve_precision(spec, map, ds, precision, mode);
  LaplacePosterior post;
  post.spec = spec;
  post.map = map;
  post.precision = precision;
  post.log_likelihood = log_likelihood(spec, map, ds).value;
  const auto P = static_cast<double>(map.size());
  post.log_evidence = log_joint_normalized(post.log_likelihood, map, precision) +
                      0.5 * P * std::log(2.0 * std::numbers::pi) - 0.5 * solved.log_det_precision;
  if (!std::isfinite(post.log_evidence)) throw NumericalError("non-finite log marginal likelihood");
  post.projected_curvature = solved.projected;
  post.covariance = std::move(solved.covariance);
  post.factor = covariance_factor(post.covariance);
  return post;
}

struct PrecisionSearch {
  double best = 0.0;
  std::vector<std::pair<double, double>> evidence;  // (precision, log evidence), ascending precision
};

/// Grid search of the prior precision by Laplace evidence with the MAP held fixed.
/// Ties resolve to the smaller precision.
inline PrecisionSearch tune_precision(const MlpSpec& spec, const ParamVector& map, const IntervalDataset& ds,
                                      std::span<const double> grid, Curvature mode = Curvature::Auto) {
  if (grid.empty()) throw std::invalid_argument("precision grid is empty");
  std::vector<double> sorted(grid.begin(), grid.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  PrecisionSearch out;
  double best_value = -std::numeric_limits<double>::infinity();
  for (double rho : sorted) {
    const double ev = fit_laplace(spec, map, ds, rho, mode).log_evidence;
    out.evidence.emplace_back(rho, ev);
    if (ev > best_value) {
      best_value = ev;
      out.best = rho;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Posterior predictive

enum class PredictiveMode { Glm, Bnn, Map };

struct PredictiveConfig {
  std::size_t samples = 100;
  PredictiveMode mode = PredictiveMode::Glm;
  std::uint64_t seed = 0;

  void validate() const {
    if (samples < 1) throw std::invalid_argument("predictive sample count must be >= 1");
  }
};

/// phi_s = MAP + L eps_s; eps_s comes from sub-stream s of `seed`, so draws are
/// shared between predictive modes (common random numbers).
inline std::vector<ParamVector> posterior_draws(const LaplacePosterior& post, std::size_t samples, std::uint64_t seed) {
  std::vector<ParamVector> draws;
  draws.reserve(samples);
  const Eigen::Index P = post.param_count();
  Eigen::VectorXd eps(P);
  for (std::size_t s = 0; s < samples; ++s) {
    Rng rng = make_stream(seed, s);
    for (Eigen::Index i = 0; i < P; ++i) eps[i] = standard_normal(rng);
    draws.push_back(post.map + post.factor * eps);
  }
  return draws;
}

/// Hazard draws at covariates x: through the linearized network (Glm), the
/// full network (Bnn), or the MAP point alone (Map, a single draw).
inline std::vector<HazardDraw> predictive_hazards(const LaplacePosterior& post, const Eigen::VectorXd& x,
                                                  std::span<const ParamVector> draws, PredictiveMode mode) {
  std::vector<HazardDraw> out;
  auto to_draw = [](double eta, double kappa) {
    const double k = std::exp(kappa);
    return HazardDraw{k * eta, k};
  };
  if (mode == PredictiveMode::Map) {
    const auto z = forward(post.spec, post.map, x);
    out.push_back(to_draw(z.eta, z.kappa));
    return out;
  }
  out.reserve(draws.size());
  if (mode == PredictiveMode::Glm) {
    Eigen::VectorXd row(post.param_count());
    const double eta0 = eta_gradient(post.spec, post.map, x, row);
    const Eigen::Index kappa_slot = post.spec.kappa_index();
    const double kappa0 = post.map[kappa_slot];
    for (const auto& phi : draws) {
      const Eigen::VectorXd delta = phi - post.map;
      out.push_back(to_draw(eta0 + row.dot(delta), kappa0 + delta[kappa_slot]));
    }
  } else {
    for (const auto& phi : draws) {
      const auto z = forward(post.spec, phi, x);
      out.push_back(to_draw(z.eta, z.kappa));
    }
  }
  return out;
}

struct Prediction {
  double mean = 0.0;
  std::vector<double> samples;
};

inline Prediction predict_failure(const LaplacePosterior& post, const Eigen::VectorXd& x, double t1, double t2,
                                  const PredictiveConfig& cfg) {
  cfg.validate();
  detail::check_interval(t1, t2);
  std::vector<ParamVector> draws;
  if (cfg.mode != PredictiveMode::Map) draws = posterior_draws(post, cfg.samples, cfg.seed);
  Prediction out;
  for (const auto& h : predictive_hazards(post, x, draws, cfg.mode)) out.samples.push_back(h.failure_probability(t1, t2));
  double sum = 0.0;
  for (double p : out.samples) sum += p;
  out.mean = sum / static_cast<double>(out.samples.size());
  return out;
}

/// GLM (linearized-network) posterior predictive failure probability over (t1, t2].
inline Prediction glm_predict(const LaplacePosterior& post, const Eigen::VectorXd& x, double t1, double t2,
                              PredictiveConfig cfg) {
  cfg.mode = PredictiveMode::Glm;
  return predict_failure(post, x, t1, t2, cfg);
}

/// Monte-Carlo predictive through the full nonlinear network.
inline Prediction bnn_predict(const LaplacePosterior& post, const Eigen::VectorXd& x, double t1, double t2,
                              PredictiveConfig cfg) {
  cfg.mode = PredictiveMode::Bnn;
  return predict_failure(post, x, t1, t2, cfg);
}

/// Mean predictive failure probability for every record, one shared set of draws.
inline std::vector<double> predict_dataset(const LaplacePosterior& post, const IntervalDataset& ds,
                                           const PredictiveConfig& cfg) {
  cfg.validate();
  std::vector<ParamVector> draws;
  if (cfg.mode != PredictiveMode::Map) draws = posterior_draws(post, cfg.samples, cfg.seed);
  std::vector<double> out;
  out.reserve(ds.size());
  for (const auto& r : ds.records()) {
    const auto hazards = predictive_hazards(post, r.x, draws, cfg.mode);
    double sum = 0.0;
    for (const auto& h : hazards) sum += h.failure_probability(r.t_agelt, r.t_age);
    out.push_back(sum / static_cast<double>(hazards.size()));
  }
  return out;
}

}  // namespace intervalweib
