#pragma once

// Shared fixtures for the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "intervalweib/common.hpp"
#include "intervalweib/datagen.hpp"
#include "intervalweib/dataset.hpp"

namespace iwtest {

using namespace intervalweib;

/// Central-difference gradient of a scalar function.
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x,
                                   double h) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    x[i] = xi + h;
    const double fp = f(x);
    x[i] = xi - h;
    const double fm = f(x);
    x[i] = xi;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Central-difference Hessian built from an analytic gradient.
inline Eigen::MatrixXd fd_hessian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad, Eigen::VectorXd x,
                                  double h) {
  const Eigen::Index n = x.size();
  Eigen::MatrixXd H(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double xi = x[i];
    x[i] = xi + h;
    const Eigen::VectorXd gp = grad(x);
    x[i] = xi - h;
    const Eigen::VectorXd gm = grad(x);
    x[i] = xi;
    H.col(i) = (gp - gm) / (2.0 * h);
  }
  return 0.5 * (H + H.transpose());
}

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor)
inline double max_rel_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double floor = 1e-8) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

/// Items with Weibull failure times whose log-hazard scale is theta . x, with
/// x ~ N(0, 1)^F per item; chunked on `window`.
inline IntervalDataset linear_weibull_data(std::size_t items, const Eigen::VectorXd& theta, double rate, double shape,
                                           double window, std::uint64_t seed, double max_time = 100.0) {
  std::vector<TestRecord> records;
  const Eigen::Index F = theta.size();
  for (std::size_t i = 0; i < items; ++i) {
    Rng rng = make_stream(seed, i);
    Eigen::VectorXd x(F);
    for (Eigen::Index f = 0; f < F; ++f) x[f] = standard_normal(rng);
    double u = uniform01(rng);
    while (u == 0.0) u = uniform01(rng);
    // H(t) = exp(theta.x) (rate t)^shape
    const double t = std::pow(-std::log1p(-u) * std::exp(-theta.dot(x)), 1.0 / shape) / rate;
    auto chunk = chunk_into_intervals("i" + std::to_string(i), t, CensorWindowSpec{window, max_time}, x);
    records.insert(records.end(), chunk.begin(), chunk.end());
  }
  return IntervalDataset(std::move(records), F, true);
}

/// Class-0 generator of the second synthetic family applied to x ~ N(0, sd^2) points.
inline IntervalDataset class0_data(std::size_t items, double sd, double window, std::uint64_t seed) {
  std::vector<TestRecord> records;
  for (std::size_t i = 0; i < items; ++i) {
    Rng rng = make_stream(seed, i);
    Eigen::VectorXd x(2);
    x << sd * standard_normal(rng), sd * standard_normal(rng);
    double u = uniform01(rng);
    while (u == 0.0) u = uniform01(rng);
    const double t = weibull_inverse_cdf(u, synthetic2_rate(0, x), kSynthetic2Shapes[0]);
    auto chunk = chunk_into_intervals("c" + std::to_string(i), t, CensorWindowSpec{window, 100.0}, x);
    records.insert(records.end(), chunk.begin(), chunk.end());
  }
  return IntervalDataset(std::move(records), 2, true);
}

/// Synthetic stand-in for the public heart-failure clinical records file: the
/// same columns and plausible marginal distributions, with death times from a
/// proportional-hazards Weibull that is linear in the covariates.
inline void write_heartfailure_surrogate(const std::string& path, std::size_t patients = 299, std::uint64_t seed = 2015) {
  std::ofstream os(path);
  os << "age,anaemia,creatinine_phosphokinase,diabetes,ejection_fraction,high_blood_pressure,platelets,"
        "serum_creatinine,serum_sodium,sex,smoking,time,DEATH_EVENT\n";
  for (std::size_t i = 0; i < patients; ++i) {
    Rng rng = make_stream(seed, i);
    auto bern = [&](double p) { return uniform01(rng) < p ? 1 : 0; };
    const double age = std::round(40.0 + 55.0 * uniform01(rng));
    const int anaemia = bern(0.43);
    const double cpk = std::round(std::exp(std::log(250.0) + 0.9 * standard_normal(rng)));
    const int diabetes = bern(0.42);
    const double ef = std::round(std::clamp(38.0 + 12.0 * standard_normal(rng), 14.0, 80.0));
    const int hbp = bern(0.35);
    const double platelets = std::round(std::max(25000.0, 263000.0 + 97000.0 * standard_normal(rng)));
    const double creatinine = std::round(100.0 * std::exp(std::log(1.1) + 0.4 * standard_normal(rng))) / 100.0;
    const double sodium = std::round(136.6 + 4.4 * standard_normal(rng));
    const int sex = bern(0.65);
    const int smoking = bern(0.32);
    const double lp = 0.05 * (age - 60.0) - 0.05 * (ef - 38.0) + 1.0 * std::log(creatinine / 1.1) + 0.3 * hbp;
    const double follow_up = std::round(4.0 + 281.0 * uniform01(rng));
    double u = uniform01(rng);
    while (u == 0.0) u = uniform01(rng);
    // baseline Weibull: rate 1/600 per day, shape 1.2
    const double t_death = std::pow(-std::log1p(-u) * std::exp(-lp), 1.0 / 1.2) * 600.0;
    const bool died = t_death <= follow_up;
    const double time = died ? std::max(1.0, std::ceil(t_death)) : follow_up;
    os << age << ',' << anaemia << ',' << cpk << ',' << diabetes << ',' << ef << ',' << hbp << ',' << platelets << ','
       << creatinine << ',' << sodium << ',' << sex << ',' << smoking << ',' << time << ',' << (died ? 1 : 0) << '\n';
  }
}

/// Fresh empty scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("intervalweib_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

/// Pairwise Mann-Whitney statistic: ties count 1/2.
inline double brute_roc_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[i] != 1 || y[j] != 0) continue;
      pairs += 1.0;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

/// Average precision from the precision/recall pair at every distinct threshold.
inline double brute_average_precision(const std::vector<double>& s, const std::vector<int>& y) {
  std::vector<double> thresholds(s);
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  double positives = 0.0;
  for (int v : y) positives += v;
  double ap = 0.0, prev_recall = 0.0;
  for (double tau : thresholds) {
    double tp = 0.0, n = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] >= tau) {
        n += 1.0;
        tp += y[i];
      }
    }
    const double recall = tp / positives;
    ap += (recall - prev_recall) * (tp / n);
    prev_recall = recall;
  }
  return ap;
}

/// Calls f(scores, labels) for every multiset of (score, label) pairs of size
/// 1..max_n over the score grid. Both metrics are order-free, so multisets
/// cover every labeled score set.
inline void for_each_labeled_set(const std::vector<double>& grid, std::size_t max_n,
                                 const std::function<void(const std::vector<double>&, const std::vector<int>&)>& f) {
  const std::size_t types = 2 * grid.size();
  std::vector<std::size_t> pick;
  std::function<void(std::size_t)> rec = [&](std::size_t from) {
    if (!pick.empty()) {
      std::vector<double> s;
      std::vector<int> y;
      for (auto t : pick) {
        s.push_back(grid[t / 2]);
        y.push_back(static_cast<int>(t % 2));
      }
      f(s, y);
    }
    if (pick.size() == max_n) return;
    for (std::size_t t = from; t < types; ++t) {
      pick.push_back(t);
      rec(t);
      pick.pop_back();
    }
  };
  rec(0);
}

}  // namespace iwtest
