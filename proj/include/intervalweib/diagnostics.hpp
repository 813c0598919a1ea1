#pragma once

// Convergence diagnostics for multi-chain MCMC output: rank-normalized split
// R-hat (max of bulk and folded), effective sample size from split-chain
// autocorrelations with Geyer's initial positive/monotone sequence, and MCSE.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include <boost/math/distributions/normal.hpp>

namespace intervalweib {

struct ParamDiagnostics {
  double rhat = std::numeric_limits<double>::quiet_NaN();
  double ess = std::numeric_limits<double>::quiet_NaN();
  double mcse = std::numeric_limits<double>::quiet_NaN();
  double mean = 0.0;
  double sd = 0.0;
  /// Every draw identical: R-hat and ESS are undefined.
  bool degenerate = false;
};

namespace detail {

using Chains = std::vector<std::vector<double>>;

/// Halves each chain (dropping the middle draw of odd lengths).
inline Chains split_chains(const Chains& chains) {
  Chains out;
  for (const auto& c : chains) {
    const std::size_t half = c.size() / 2;
    out.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
    out.emplace_back(c.end() - static_cast<std::ptrdiff_t>(half), c.end());
  }
  return out;
}

inline double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Classic R-hat of already-split chains.
inline double rhat_basic(const Chains& chains) {
  const auto m = static_cast<double>(chains.size());
  const auto n = static_cast<double>(chains.front().size());
  std::vector<double> means, vars;
  for (const auto& c : chains) {
    const double mu = mean_of(c);
    double ss = 0.0;
    for (double v : c) ss += (v - mu) * (v - mu);
    means.push_back(mu);
    vars.push_back(ss / (n - 1.0));
  }
  const double grand = mean_of(means);
  double between = 0.0;
  for (double mu : means) between += (mu - grand) * (mu - grand);
  between *= n / (m - 1.0);
  const double within = mean_of(vars);
  const double var_plus = (n - 1.0) / n * within + between / n;
  return std::sqrt(var_plus / within);
}

/// Normal scores of the pooled fractional ranks (average rank for ties).
inline Chains rank_normalize(const Chains& chains) {
  std::vector<std::pair<double, std::size_t>> pooled;
  for (std::size_t c = 0; c < chains.size(); ++c) {
    for (std::size_t i = 0; i < chains[c].size(); ++i) pooled.emplace_back(chains[c][i], c * chains[0].size() + i);
  }
  std::sort(pooled.begin(), pooled.end());
  const auto S = static_cast<double>(pooled.size());
  std::vector<double> score(pooled.size());
  boost::math::normal_distribution<double> normal;
  for (std::size_t i = 0; i < pooled.size();) {
    std::size_t j = i;
    while (j < pooled.size() && pooled[j].first == pooled[i].first) ++j;
    const double rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    const double z = boost::math::quantile(normal, (rank - 0.375) / (S + 0.25));
    for (std::size_t t = i; t < j; ++t) score[pooled[t].second] = z;
    i = j;
  }
  Chains out(chains.size());
  for (std::size_t c = 0; c < chains.size(); ++c) {
    out[c].assign(score.begin() + static_cast<std::ptrdiff_t>(c * chains[0].size()),
                  score.begin() + static_cast<std::ptrdiff_t>((c + 1) * chains[0].size()));
  }
  return out;
}

inline double autocovariance(std::span<const double> c, double mu, std::size_t lag) {
  double s = 0.0;
  for (std::size_t i = 0; i + lag < c.size(); ++i) s += (c[i] - mu) * (c[i + lag] - mu);
  return s / static_cast<double>(c.size());
}

/// Multi-chain ESS with Geyer's initial positive sequence and monotone
/// adjustment, computed on already-split chains.
inline double ess_geyer(const Chains& chains) {
  const std::size_t m = chains.size();
  const std::size_t n = chains.front().size();
  std::vector<double> means(m), var0(m);
  for (std::size_t c = 0; c < m; ++c) {
    means[c] = mean_of(chains[c]);
    var0[c] = autocovariance(chains[c], means[c], 0) * static_cast<double>(n) / static_cast<double>(n - 1);
  }
  const double mean_var = mean_of(var0);
  double var_plus = mean_var * static_cast<double>(n - 1) / static_cast<double>(n);
  if (m > 1) {
    const double grand = mean_of(means);
    double b = 0.0;
    for (double mu : means) b += (mu - grand) * (mu - grand);
    var_plus += b / static_cast<double>(m - 1);
  }
  auto rho = [&](std::size_t lag) {
    double acov = 0.0;
    for (std::size_t c = 0; c < m; ++c) acov += autocovariance(chains[c], means[c], lag);
    acov /= static_cast<double>(m);
    return 1.0 - (mean_var - acov) / var_plus;
  };

  std::vector<double> rho_hat(n + 1, 0.0);
  rho_hat[0] = 1.0;
  double rho_even = 1.0;
  double rho_odd = rho(1);
  rho_hat[1] = rho_odd;
  std::size_t t = 1;
  while (t + 4 < n && rho_even + rho_odd > 0.0) {
    rho_even = rho(t + 1);
    rho_odd = rho(t + 2);
    if (rho_even + rho_odd >= 0.0) {
      rho_hat[t + 1] = rho_even;
      rho_hat[t + 2] = rho_odd;
    }
    t += 2;
  }
  const std::size_t max_t = t;
  if (rho_even > 0.0) rho_hat[max_t + 1] = rho_even;
  for (std::size_t s = 1; s + 3 <= max_t; s += 2) {
    if (rho_hat[s + 1] + rho_hat[s + 2] > rho_hat[s - 1] + rho_hat[s]) {
      rho_hat[s + 1] = 0.5 * (rho_hat[s - 1] + rho_hat[s]);
      rho_hat[s + 2] = rho_hat[s + 1];
    }
  }
  const double total = static_cast<double>(m * n);
  double tau = -1.0 + rho_hat[max_t + 1];
  for (std::size_t s = 0; s <= max_t; ++s) tau += 2.0 * rho_hat[s];
  tau = std::max(tau, 1.0 / std::log10(total));
  return total / tau;
}

}  // namespace detail

/// Diagnostics for one scalar parameter given per-chain post-warmup draws.
/// R-hat needs at least two chains; with one chain it stays NaN.
inline ParamDiagnostics diagnose(const std::vector<std::vector<double>>& chains) {
  ParamDiagnostics d;
  if (chains.empty() || chains.front().size() < 4) return d;
  for (const auto& c : chains) {
    if (c.size() != chains.front().size()) throw std::invalid_argument("chains must have equal length");
  }
  std::vector<double> pooled;
  for (const auto& c : chains) pooled.insert(pooled.end(), c.begin(), c.end());
  d.mean = detail::mean_of(pooled);
  double ss = 0.0;
  for (double v : pooled) ss += (v - d.mean) * (v - d.mean);
  d.sd = std::sqrt(ss / static_cast<double>(pooled.size() - 1));

  const auto [lo, hi] = std::minmax_element(pooled.begin(), pooled.end());
  if (*lo == *hi) {
    d.degenerate = true;
    d.mcse = 0.0;
    return d;
  }

  const auto split = detail::split_chains(chains);
  d.ess = detail::ess_geyer(split);
  d.mcse = d.sd / std::sqrt(d.ess);

  if (chains.size() >= 2) {
    const double bulk = detail::rhat_basic(detail::rank_normalize(split));
    std::vector<double> sorted = pooled;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
    const double median = sorted[sorted.size() / 2];
    auto folded = split;
    for (auto& c : folded) {
      for (auto& v : c) v = std::abs(v - median);
    }
    const double tail = detail::rhat_basic(detail::rank_normalize(folded));
    d.rhat = std::max(bulk, tail);
  }
  return d;
}

}  // namespace intervalweib
