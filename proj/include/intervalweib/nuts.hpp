#pragma once

// No-U-Turn sampler: multinomial trajectory sampling over a doubling binary
// tree, generalized U-turn checks (including the cross-subtree checks),
// dual-averaging step-size adaptation and a windowed diagonal metric.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "intervalweib/common.hpp"
#include "intervalweib/diagnostics.hpp"

namespace intervalweib {

/// Log density with gradient: returns log p(q) and writes d log p / dq into grad.
/// Must be safe to call concurrently from several chains.
using LogDensityFn = std::function<double(const Eigen::VectorXd& q, Eigen::VectorXd& grad)>;

struct NutsConfig {
  int chains = 4;
  int warmup = 20000;
  int draws = 1000;
  double target_accept = 0.99;
  int max_depth = 10;
  std::uint64_t seed = 0;
  /// Chain c starts at init + U(-r, r)^D from its own stream.
  double init_radius = 0.5;
  /// Energy error above which a trajectory is flagged divergent.
  double max_energy_error = 1000.0;
  bool parallel = true;

  void validate() const {
    if (chains < 1) throw std::invalid_argument("need at least one chain");
    if (warmup < 0 || draws < 1) throw std::invalid_argument("warmup must be >= 0 and draws >= 1");
    if (!(target_accept > 0.0 && target_accept < 1.0)) throw std::invalid_argument("target acceptance must lie in (0, 1)");
    if (max_depth < 1 || max_depth > 12) throw std::invalid_argument("max tree depth must lie in [1, 12]");
  }
};

struct ChainOutput {
  Eigen::MatrixXd draws;  // kept draws x dimension
  std::vector<double> accept_stat;
  std::vector<int> tree_depth;
  int divergences = 0;
  double step_size = 0.0;
  Eigen::VectorXd inv_metric;
};

namespace detail {

struct PhasePoint {
  Eigen::VectorXd q, p, grad;
  double logp = 0.0;
};

struct Subtree {
  PhasePoint begin, end;  // begin is adjacent to where the subtree started
  Eigen::VectorXd sharp_begin, sharp_end, rho;
  PhasePoint sample;
  double log_sum_weight = 0.0;
};

struct TransitionStats {
  int n_leapfrog = 0;
  double sum_metro = 0.0;
  bool divergent = false;
  int depth = 0;
};

inline double log_sum_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

inline bool no_uturn(const Eigen::VectorXd& sharp_a, const Eigen::VectorXd& sharp_b, const Eigen::VectorXd& rho) {
  return sharp_a.dot(rho) > 0.0 && sharp_b.dot(rho) > 0.0;
}

class NutsChain {
 public:
  NutsChain(const LogDensityFn& density, Rng rng, Eigen::Index dim, int max_depth, double max_energy_error)
      : density_(density),
        rng_(std::move(rng)),
        inv_metric_(Eigen::VectorXd::Ones(dim)),
        max_depth_(max_depth),
        max_energy_error_(max_energy_error) {}

  double step_size = 1.0;
  const Eigen::VectorXd& inv_metric() const { return inv_metric_; }
  void set_inv_metric(Eigen::VectorXd m) { inv_metric_ = std::move(m); }
  Rng& rng() { return rng_; }

  PhasePoint make_point(const Eigen::VectorXd& q) const {
    PhasePoint z;
    z.q = q;
    z.grad.resize(q.size());
    z.logp = density_(z.q, z.grad);
    z.p = Eigen::VectorXd::Zero(q.size());
    return z;
  }

  /// Step-size heuristic: double or halve until the one-step acceptance crosses 0.8.
  void init_step_size(const PhasePoint& start) {
    PhasePoint z = start;
    sample_momentum(z);
    double H0 = hamiltonian(z);
    leapfrog(z, step_size);
    double delta = H0 - hamiltonian(z);
    const int direction = delta > std::log(0.8) ? 1 : -1;
    for (int iter = 0; iter < 100; ++iter) {
      z = start;
      sample_momentum(z);
      H0 = hamiltonian(z);
      leapfrog(z, step_size);
      delta = H0 - hamiltonian(z);
      if (std::isnan(delta)) delta = -std::numeric_limits<double>::infinity();
      if (direction == 1 && !(delta > std::log(0.8))) break;
      if (direction == -1 && !(delta < std::log(0.8))) break;
      step_size = direction == 1 ? 2.0 * step_size : 0.5 * step_size;
      if (step_size > 1e7) throw NumericalError("posterior is improper: step size diverged");
      if (step_size == 0.0) throw NumericalError("no acceptably small step size found");
    }
  }

  PhasePoint transition(const PhasePoint& current, TransitionStats& stats) {
    PhasePoint z = current;
    sample_momentum(z);
    const double H0 = hamiltonian(z);

    PhasePoint bck = z, fwd = z;
    Eigen::VectorXd sharp_bck = inv_metric_.cwiseProduct(z.p), sharp_fwd = sharp_bck;
    Eigen::VectorXd rho = z.p;
    double log_sum_weight = 0.0;
    PhasePoint sample = z;

    stats = TransitionStats{};
    while (stats.depth < max_depth_) {
      const bool forward = uniform01(rng_) > 0.5;
      Subtree tree;
      const bool valid = build_tree(stats.depth, forward ? fwd : bck, forward ? 1.0 : -1.0, H0, tree, stats);
      if (!valid) break;
      ++stats.depth;

      if (tree.log_sum_weight > log_sum_weight) {
        sample = tree.sample;
      } else if (uniform01(rng_) < std::exp(tree.log_sum_weight - log_sum_weight)) {
        sample = tree.sample;
      }
      log_sum_weight = log_sum_exp(log_sum_weight, tree.log_sum_weight);

      PhasePoint& adjacent = forward ? fwd : bck;
      Eigen::VectorXd& sharp_adjacent = forward ? sharp_fwd : sharp_bck;
      const Eigen::VectorXd& sharp_far = forward ? sharp_bck : sharp_fwd;
      const Eigen::VectorXd rho_total = rho + tree.rho;
      bool persist = no_uturn(sharp_far, tree.sharp_end, rho_total);
      persist = persist && no_uturn(sharp_far, tree.sharp_begin, rho + tree.begin.p);
      persist = persist && no_uturn(sharp_adjacent, tree.sharp_end, tree.rho + adjacent.p);

      adjacent = std::move(tree.end);
      sharp_adjacent = std::move(tree.sharp_end);
      rho = rho_total;
      if (!persist) break;
    }
    return sample;
  }

 private:
  double hamiltonian(const PhasePoint& z) const {
    return -z.logp + 0.5 * z.p.dot(inv_metric_.cwiseProduct(z.p));
  }

  void sample_momentum(PhasePoint& z) {
    for (Eigen::Index i = 0; i < z.p.size(); ++i) z.p[i] = standard_normal(rng_) / std::sqrt(inv_metric_[i]);
  }

  void leapfrog(PhasePoint& z, double eps) const {
    z.p += 0.5 * eps * z.grad;
    z.q += eps * inv_metric_.cwiseProduct(z.p);
    z.logp = density_(z.q, z.grad);
    z.p += 0.5 * eps * z.grad;
  }

  bool build_tree(int depth, const PhasePoint& from, double direction, double H0, Subtree& out,
                  TransitionStats& stats) {
    if (depth == 0) {
      PhasePoint z = from;
      leapfrog(z, direction * step_size);
      ++stats.n_leapfrog;
      double H = hamiltonian(z);
      if (std::isnan(H)) H = std::numeric_limits<double>::infinity();
      if (H - H0 > max_energy_error_) {
        stats.divergent = true;
        return false;
      }
      const double log_w = H0 - H;
      stats.sum_metro += log_w > 0.0 ? 1.0 : std::exp(log_w);
      out.sharp_begin = inv_metric_.cwiseProduct(z.p);
      out.sharp_end = out.sharp_begin;
      out.rho = z.p;
      out.log_sum_weight = log_w;
      out.begin = z;
      out.end = z;
      out.sample = std::move(z);
      return true;
    }
    Subtree left;
    if (!build_tree(depth - 1, from, direction, H0, left, stats)) return false;
    Subtree right;
    if (!build_tree(depth - 1, left.end, direction, H0, right, stats)) return false;

    out.log_sum_weight = log_sum_exp(left.log_sum_weight, right.log_sum_weight);
    const bool take_right = uniform01(rng_) < std::exp(right.log_sum_weight - out.log_sum_weight);
    out.sample = take_right ? std::move(right.sample) : std::move(left.sample);
    out.rho = left.rho + right.rho;

    bool persist = no_uturn(left.sharp_begin, right.sharp_end, out.rho);
    persist = persist && no_uturn(left.sharp_begin, right.sharp_begin, left.rho + right.begin.p);
    persist = persist && no_uturn(left.sharp_end, right.sharp_end, right.rho + left.end.p);

    out.begin = std::move(left.begin);
    out.sharp_begin = std::move(left.sharp_begin);
    out.end = std::move(right.end);
    out.sharp_end = std::move(right.sharp_end);
    return persist;
  }

  const LogDensityFn& density_;
  Rng rng_;
  Eigen::VectorXd inv_metric_;
  int max_depth_;
  double max_energy_error_;
};

/// Dual averaging of log step size toward a target acceptance statistic.
class DualAveraging {
 public:
  explicit DualAveraging(double target, double gamma = 0.05, double t0 = 10.0, double kappa = 0.75)
      : target_(target), gamma_(gamma), t0_(t0), kappa_(kappa) {}

  void restart(double step_size) {
    counter_ = 0;
    s_bar_ = 0.0;
    x_bar_ = 0.0;
    mu_ = std::log(10.0 * step_size);
  }

  double update(double accept_stat) {
    ++counter_;
    accept_stat = std::min(1.0, accept_stat);
    const double eta = 1.0 / (counter_ + t0_);
    s_bar_ = (1.0 - eta) * s_bar_ + eta * (target_ - accept_stat);
    const double x = mu_ - s_bar_ * std::sqrt(counter_) / gamma_;
    const double x_eta = std::pow(counter_, -kappa_);
    x_bar_ = (1.0 - x_eta) * x_bar_ + x_eta * x;
    return std::exp(x);
  }

  double final_step_size() const { return std::exp(x_bar_); }

 private:
  double target_, gamma_, t0_, kappa_;
  double counter_ = 0.0, s_bar_ = 0.0, x_bar_ = 0.0, mu_ = 0.0;
};

struct MetricWindow {
  int start = 0;
  int end = 0;  // exclusive
};

/// Slow metric-adaptation windows: an initial fast buffer of 75 iterations,
/// windows doubling from 25, and a terminal buffer of 50 (15% / 75% / 10% for
/// warmups shorter than 150). No windows below 20 warmup iterations.
inline std::vector<MetricWindow> metric_windows(int warmup) {
  std::vector<MetricWindow> windows;
  if (warmup < 20) return windows;
  int init = 75, term = 50, base = 25;
  if (init + term + base > warmup) {
    init = static_cast<int>(0.15 * warmup);
    term = static_cast<int>(0.1 * warmup);
    base = warmup - init - term;
  }
  const int last = warmup - term;
  int start = init, size = base;
  while (start < last) {
    int end = start + size;
    if (end + 2 * size > last) end = last;
    windows.push_back({start, end});
    start = end;
    size *= 2;
  }
  return windows;
}

inline ChainOutput run_chain(const LogDensityFn& density, const Eigen::VectorXd& init, const NutsConfig& cfg,
                             int chain_index) {
  const Eigen::Index dim = init.size();
  NutsChain chain(density, make_stream(cfg.seed, static_cast<std::uint64_t>(chain_index) + 1), dim, cfg.max_depth,
                  cfg.max_energy_error);

  PhasePoint z;
  bool found = false;
  for (int attempt = 0; attempt < 100 && !found; ++attempt) {
    Eigen::VectorXd q = init;
    for (Eigen::Index i = 0; i < dim; ++i) q[i] += cfg.init_radius * (2.0 * uniform01(chain.rng()) - 1.0);
    z = chain.make_point(q);
    found = std::isfinite(z.logp) && z.grad.allFinite();
    if (cfg.init_radius == 0.0) break;
  }
  if (!found) throw NumericalError("log density is not finite at the initial point");

  chain.init_step_size(z);
  DualAveraging adapt(cfg.target_accept);
  adapt.restart(chain.step_size);

  const auto windows = metric_windows(cfg.warmup);
  std::size_t next_window = 0;
  Eigen::VectorXd w_mean = Eigen::VectorXd::Zero(dim), w_m2 = Eigen::VectorXd::Zero(dim);
  int w_count = 0;

  ChainOutput out;
  out.draws.resize(cfg.draws, dim);
  TransitionStats stats;
  for (int iter = 0; iter < cfg.warmup; ++iter) {
    z = chain.transition(z, stats);
    chain.step_size = adapt.update(stats.n_leapfrog > 0 ? stats.sum_metro / stats.n_leapfrog : 0.0);
    if (next_window < windows.size() && iter >= windows[next_window].start) {
      ++w_count;
      const Eigen::VectorXd delta = z.q - w_mean;
      w_mean += delta / w_count;
      w_m2 += delta.cwiseProduct(z.q - w_mean);
      if (iter + 1 == windows[next_window].end) {
        const double n = w_count;
        Eigen::VectorXd var = w_m2 / std::max(n - 1.0, 1.0);
        var = (n / (n + 5.0)) * var.array() + 1e-3 * (5.0 / (n + 5.0));
        chain.set_inv_metric(var);
        chain.init_step_size(z);
        adapt.restart(chain.step_size);
        w_mean.setZero();
        w_m2.setZero();
        w_count = 0;
        ++next_window;
      }
    }
  }
  if (cfg.warmup > 0) chain.step_size = adapt.final_step_size();

  for (int iter = 0; iter < cfg.draws; ++iter) {
    z = chain.transition(z, stats);
    out.draws.row(iter) = z.q.transpose();
    out.accept_stat.push_back(stats.n_leapfrog > 0 ? stats.sum_metro / stats.n_leapfrog : 0.0);
    out.tree_depth.push_back(stats.depth);
    if (stats.divergent) ++out.divergences;
  }
  out.step_size = chain.step_size;
  out.inv_metric = chain.inv_metric();
  return out;
}

}  // namespace detail

/// Post-warmup draws of named scalar quantities from every chain, with diagnostics.
struct PosteriorSamples {
  std::vector<std::string> names;
  std::vector<Eigen::MatrixXd> chains;  // per chain: draws x names
  std::vector<ParamDiagnostics> diagnostics;
  int divergences = 0;
  std::string warning;

  Eigen::Index dim() const { return static_cast<Eigen::Index>(names.size()); }
  std::size_t n_chains() const { return chains.size(); }
  Eigen::Index draws_per_chain() const { return chains.empty() ? 0 : chains.front().rows(); }

  Eigen::Index index_of(const std::string& name) const {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw std::out_of_range("no parameter named '" + name + "'");
    return it - names.begin();
  }

  std::vector<std::vector<double>> per_chain(Eigen::Index j) const {
    std::vector<std::vector<double>> out;
    for (const auto& c : chains) out.emplace_back(c.col(j).data(), c.col(j).data() + c.rows());
    return out;
  }

  /// All draws of column j, chain after chain.
  std::vector<double> pooled(Eigen::Index j) const {
    std::vector<double> out;
    for (const auto& c : chains) out.insert(out.end(), c.col(j).data(), c.col(j).data() + c.rows());
    return out;
  }
  std::vector<double> pooled(const std::string& name) const { return pooled(index_of(name)); }

  const ParamDiagnostics& diagnostics_of(const std::string& name) const {
    return diagnostics[static_cast<std::size_t>(index_of(name))];
  }

  void compute_diagnostics() {
    diagnostics.clear();
    for (Eigen::Index j = 0; j < dim(); ++j) diagnostics.push_back(diagnose(per_chain(j)));
  }

  double max_rhat() const {
    double m = 0.0;
    for (const auto& d : diagnostics) {
      if (!d.degenerate && std::isfinite(d.rhat)) m = std::max(m, d.rhat);
    }
    return m;
  }
  double min_ess() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& d : diagnostics) {
      if (!d.degenerate) m = std::min(m, d.ess);
    }
    return m;
  }
};

/// Raw NUTS run: unconstrained draws per chain.
inline std::vector<ChainOutput> nuts_chains(const LogDensityFn& density, const Eigen::VectorXd& init,
                                                    const NutsConfig& cfg) {
  cfg.validate();
  {
    Eigen::VectorXd grad(init.size());
    const double lp = density(init, grad);
    if (!std::isfinite(lp) || !grad.allFinite()) throw NumericalError("log density is not finite at the initial point");
  }
  std::vector<ChainOutput> outputs(static_cast<std::size_t>(cfg.chains));
  std::vector<std::exception_ptr> errors(outputs.size());
  auto work = [&](int c) {
    try {
      outputs[static_cast<std::size_t>(c)] = detail::run_chain(density, init, cfg, c);
    } catch (...) {
      errors[static_cast<std::size_t>(c)] = std::current_exception();
    }
  };
  if (cfg.parallel && cfg.chains > 1) {
    std::vector<std::thread> threads;
    for (int c = 0; c < cfg.chains; ++c) threads.emplace_back(work, c);
    for (auto& t : threads) t.join();
  } else {
    for (int c = 0; c < cfg.chains; ++c) work(c);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return outputs;
}

/// Samples a density with NUTS and reports draws of the unconstrained
/// coordinates under `names` with diagnostics.
inline PosteriorSamples nuts_sample(const LogDensityFn& density, const Eigen::VectorXd& init, const NutsConfig& cfg,
                                    std::vector<std::string> names = {}) {
  if (names.empty()) {
    for (Eigen::Index i = 0; i < init.size(); ++i) names.push_back("q" + std::to_string(i));
  }
  if (static_cast<Eigen::Index>(names.size()) != init.size()) throw std::invalid_argument("one name per dimension required");
  auto outputs = nuts_chains(density, init, cfg);
  PosteriorSamples s;
  s.names = std::move(names);
  for (auto& o : outputs) {
    s.divergences += o.divergences;
    s.chains.push_back(std::move(o.draws));
  }
  s.compute_diagnostics();
  const double total = static_cast<double>(cfg.chains) * cfg.draws;
  if (s.divergences > 0.25 * total) {
    s.warning = std::to_string(s.divergences) + " of " + std::to_string(static_cast<long>(total)) +
                " transitions diverged";
  }
  return s;
}

}  // namespace intervalweib
