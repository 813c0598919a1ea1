#pragma once

// Synthetic interval-censored datasets: Weibull failure times per point,
// chunked by a disjoint inspection window, plus ingestion of the public
// heart-failure clinical records file.

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "intervalweib/common.hpp"
#include "intervalweib/dataset.hpp"

namespace intervalweib {

struct WeibullClassSpec {
  double rate = 1.0;
  double shape = 1.0;

  void validate() const {
    if (!(rate > 0.0) || !(shape > 0.0)) throw std::invalid_argument("Weibull rate and shape must be positive");
  }
};

/// Class-0 and class-1 generators used for the first synthetic family.
inline constexpr std::array<WeibullClassSpec, 2> kSynthetic1Classes{{{0.1, 2.5}, {0.5, 3.0}}};
inline constexpr std::array<double, 2> kSynthetic2Shapes{2.5, 3.0};

/// Inspection schedule: windows [0,w], [w,2w], ... up to max_time.
struct CensorWindowSpec {
  double window = 2.0;
  double max_time = 100.0;

  void validate() const {
    if (!(window > 0.0)) throw std::invalid_argument("window must be positive");
    if (!(max_time >= window)) throw std::invalid_argument("max_time must be >= window");
  }
};

/// Inverse CDF of the Weibull with survival exp(-(rate t)^shape).
inline double weibull_inverse_cdf(double u, double rate, double shape) {
  return std::pow(-std::log1p(-u), 1.0 / shape) / rate;
}

/// One failure time per entry of `rates`. Entry i uses sub-stream i of `seed`.
inline std::vector<double> sample_weibull_times(std::span<const double> rates, double shape, std::uint64_t seed) {
  if (!(shape > 0.0)) throw std::invalid_argument("shape must be positive");
  std::vector<double> out(rates.size());
  for (std::size_t i = 0; i < rates.size(); ++i) {
    if (!(rates[i] > 0.0)) throw std::invalid_argument("rate must be positive");
    Rng rng = make_stream(seed, i);
    out[i] = weibull_inverse_cdf(uniform01(rng), rates[i], shape);
  }
  return out;
}

inline std::vector<double> sample_weibull_times(double rate, double shape, std::size_t n, std::uint64_t seed) {
  std::vector<double> rates(n, rate);
  return sample_weibull_times(rates, shape, seed);
}

/// Converts one failure time into interval observations. A failure exactly on a
/// window edge belongs to the window ending at that edge. Items still alive at
/// max_time produce passing windows up to max_time only.
inline std::vector<TestRecord> chunk_into_intervals(const std::string& item_id, double t_fail,
                                                    const CensorWindowSpec& spec,
                                                    const Eigen::VectorXd& x = Eigen::VectorXd()) {
  spec.validate();
  if (!(t_fail > 0.0)) throw std::invalid_argument("failure time must be positive");
  std::vector<TestRecord> out;
  const bool fails = t_fail <= spec.max_time;
  const double horizon = fails ? t_fail : spec.max_time;
  const auto n_windows = static_cast<long>(std::ceil(horizon / spec.window));
  for (long w = 0; w < std::max(n_windows, 1L); ++w) {
    TestRecord r;
    r.item_id = item_id;
    r.x = x;
    r.t_agelt = static_cast<double>(w) * spec.window;
    r.t_age = std::min(static_cast<double>(w + 1) * spec.window, fails ? r.t_agelt + spec.window : spec.max_time);
    r.y = (fails && w == n_windows - 1) ? 1 : 0;
    out.push_back(std::move(r));
  }
  return out;
}

/// 2-D points with binary class labels.
struct LabeledPoints {
  Eigen::MatrixXd X;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

/// Two interleaving half circles of radius 1: class 0 on the upper arc centred
/// at the origin, class 1 on the lower arc centred at (1, -0.5).
inline LabeledPoints make_moons(std::size_t n, double noise, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("make_moons needs n >= 2");
  const std::size_t n_out = n / 2, n_in = n - n_out;
  LabeledPoints pts;
  pts.X.resize(static_cast<Eigen::Index>(n), 2);
  pts.labels.resize(n);
  auto angle = [](std::size_t i, std::size_t m) {
    return m > 1 ? std::numbers::pi * static_cast<double>(i) / static_cast<double>(m - 1) : 0.0;
  };
  for (std::size_t i = 0; i < n_out; ++i) {
    const double a = angle(i, n_out);
    pts.X.row(static_cast<Eigen::Index>(i)) << std::cos(a), std::sin(a);
    pts.labels[i] = 0;
  }
  for (std::size_t i = 0; i < n_in; ++i) {
    const double a = angle(i, n_in);
    pts.X.row(static_cast<Eigen::Index>(n_out + i)) << 1.0 - std::cos(a), 0.5 - std::sin(a);
    pts.labels[n_out + i] = 1;
  }
  if (noise > 0.0) {
    Rng rng = make_stream(seed, 0);
    for (Eigen::Index i = 0; i < pts.X.rows(); ++i) {
      pts.X(i, 0) += noise * standard_normal(rng);
      pts.X(i, 1) += noise * standard_normal(rng);
    }
  }
  return pts;
}

/// Two facing crescents on elliptic arcs (semi-axes 2 and 1.2):
///   class 0: (2 cos a, 1.2 sin a),        a in [pi/8, 7pi/8]
///   class 1: (2 cos a, 1.2 sin a + 1.6),  a in [9pi/8, 15pi/8]
/// Angles are evenly spaced; Gaussian noise of the given sd is added.
inline LabeledPoints make_banana(std::size_t n, double noise, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("make_banana needs n >= 2");
  constexpr double pi = std::numbers::pi;
  const std::size_t n0 = n / 2, n1 = n - n0;
  LabeledPoints pts;
  pts.X.resize(static_cast<Eigen::Index>(n), 2);
  pts.labels.resize(n);
  auto angle = [](double lo, double hi, std::size_t i, std::size_t m) {
    return m > 1 ? lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(m - 1) : 0.5 * (lo + hi);
  };
  for (std::size_t i = 0; i < n0; ++i) {
    const double a = angle(pi / 8, 7 * pi / 8, i, n0);
    pts.X.row(static_cast<Eigen::Index>(i)) << 2.0 * std::cos(a), 1.2 * std::sin(a);
    pts.labels[i] = 0;
  }
  for (std::size_t i = 0; i < n1; ++i) {
    const double a = angle(9 * pi / 8, 15 * pi / 8, i, n1);
    pts.X.row(static_cast<Eigen::Index>(n0 + i)) << 2.0 * std::cos(a), 1.2 * std::sin(a) + 1.6;
    pts.labels[n0 + i] = 1;
  }
  if (noise > 0.0) {
    Rng rng = make_stream(seed, 0);
    for (Eigen::Index i = 0; i < pts.X.rows(); ++i) {
      pts.X(i, 0) += noise * standard_normal(rng);
      pts.X(i, 1) += noise * standard_normal(rng);
    }
  }
  return pts;
}

inline std::string point_item_id(std::size_t i) { return "p" + std::to_string(i); }

namespace detail {

template <class RateFn, class ShapeFn>
IntervalDataset generate_from_points(const LabeledPoints& base, RateFn rate_of, ShapeFn shape_of,
                                     const CensorWindowSpec& window, std::uint64_t seed) {
  window.validate();
  std::size_t counts[2] = {0, 0};
  for (int label : base.labels) {
    if (label != 0 && label != 1) throw std::invalid_argument("point labels must be 0 or 1");
    ++counts[label];
  }
  if (counts[0] == 0 || counts[1] == 0) throw std::invalid_argument("both classes must be non-empty");

  std::vector<TestRecord> records;
  for (std::size_t i = 0; i < base.size(); ++i) {
    const Eigen::VectorXd x = base.X.row(static_cast<Eigen::Index>(i)).transpose();
    const int label = base.labels[i];
    Rng rng = make_stream(seed, i);
    double u = uniform01(rng);
    while (u == 0.0) u = uniform01(rng);
    const double t_fail = weibull_inverse_cdf(u, rate_of(label, x), shape_of(label));
    auto chunk = chunk_into_intervals(point_item_id(i), t_fail, window, x);
    records.insert(records.end(), std::make_move_iterator(chunk.begin()), std::make_move_iterator(chunk.end()));
  }
  return IntervalDataset(std::move(records), base.X.cols(), true);
}

}  // namespace detail

/// Each class fails with its own constant Weibull (rate, shape).
inline IntervalDataset generate_synthetic_1(const LabeledPoints& base, const std::array<WeibullClassSpec, 2>& specs,
                                            const CensorWindowSpec& window, std::uint64_t seed) {
  for (const auto& s : specs) s.validate();
  return detail::generate_from_points(
      base, [&](int label, const Eigen::VectorXd&) { return specs[static_cast<std::size_t>(label)].rate; },
      [&](int label) { return specs[static_cast<std::size_t>(label)].shape; }, window, seed);
}

/// Covariate-dependent rate of the second synthetic family.
inline double synthetic2_rate(int label, const Eigen::VectorXd& x) {
  if (label == 0) return std::exp(-0.2 * x[0] - 0.15 * x[1] - 1.0);
  return std::exp(-0.5 * x[0] * x[0] - 0.15 * x[1] * x[1]) + 0.8;
}

inline IntervalDataset generate_synthetic_2(const LabeledPoints& base, const std::array<double, 2>& shapes,
                                            const CensorWindowSpec& window, std::uint64_t seed) {
  for (double k : shapes) {
    if (!(k > 0.0)) throw std::invalid_argument("shape must be positive");
  }
  if (base.X.cols() < 2) throw std::invalid_argument("second synthetic family needs 2-D points");
  return detail::generate_from_points(
      base, [](int label, const Eigen::VectorXd& x) { return synthetic2_rate(label, x); },
      [&](int label) { return shapes[static_cast<std::size_t>(label)]; }, window, seed);
}

// ---------------------------------------------------------------------------
// Heart-failure clinical records.

/// The eleven clinical covariates, in output column order.
inline const std::vector<std::string>& heartfailure_covariates() {
  static const std::vector<std::string> names{
      "age",           "anaemia",  "creatinine_phosphokinase", "diabetes",      "ejection_fraction",
      "high_blood_pressure", "platelets", "serum_creatinine", "serum_sodium", "sex", "smoking"};
  return names;
}

/// Windows for one patient followed up to `time`. A death is discovered at the
/// end of the window containing it; survivors get a final partial window.
inline std::vector<TestRecord> patient_intervals(const std::string& id, double time, bool died, double window,
                                                 const Eigen::VectorXd& x) {
  if (!(time > 0.0)) throw DataError("patient '" + id + "': follow-up time must be positive");
  if (died) return chunk_into_intervals(id, time, CensorWindowSpec{window, std::max(time, window)}, x);
  std::vector<TestRecord> out;
  for (long w = 0; static_cast<double>(w) * window < time; ++w) {
    TestRecord r;
    r.item_id = id;
    r.x = x;
    r.y = 0;
    r.t_agelt = static_cast<double>(w) * window;
    r.t_age = std::min(static_cast<double>(w + 1) * window, time);
    out.push_back(std::move(r));
  }
  return out;
}

inline IntervalDataset ingest_heartfailure(std::istream& is, double window_days = 30.0) {
  if (!(window_days > 0.0)) throw std::invalid_argument("window must be positive");
  std::string line;
  if (!std::getline(is, line)) throw DataError("heart-failure file is empty");
  auto header = detail::split_csv_line(line);
  std::unordered_map<std::string, std::size_t> column;
  for (std::size_t c = 0; c < header.size(); ++c) column.emplace(std::string(detail::trim(header[c])), c);

  std::vector<std::string> required = heartfailure_covariates();
  required.push_back("time");
  required.push_back("DEATH_EVENT");
  std::string missing;
  for (const auto& name : required) {
    if (!column.count(name)) missing += (missing.empty() ? "" : ", ") + name;
  }
  if (!missing.empty()) throw DataError("heart-failure file is missing columns: " + missing);

  const auto& covariates = heartfailure_covariates();
  const auto F = static_cast<Eigen::Index>(covariates.size());
  std::vector<TestRecord> records;
  std::size_t line_no = 1, patient = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_csv_line(line);
    auto value = [&](const std::string& name) {
      const auto c = column.at(name);
      double v = 0.0;
      if (c >= fields.size() || !detail::parse_double(fields[c], v)) {
        throw DataError("line " + std::to_string(line_no) + ": cannot parse '" + name + "'");
      }
      return v;
    };
    Eigen::VectorXd x(F);
    for (Eigen::Index f = 0; f < F; ++f) x[f] = value(covariates[static_cast<std::size_t>(f)]);
    const double time = value("time");
    const double event = value("DEATH_EVENT");
    if (event != 0.0 && event != 1.0) throw DataError("line " + std::to_string(line_no) + ": DEATH_EVENT must be 0 or 1");
    auto chunk = patient_intervals("patient" + std::to_string(patient++), time, event == 1.0, window_days, x);
    records.insert(records.end(), std::make_move_iterator(chunk.begin()), std::make_move_iterator(chunk.end()));
  }
  return IntervalDataset(std::move(records), F, true);
}

inline IntervalDataset ingest_heartfailure(const std::string& path, double window_days = 30.0) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open '" + path + "'");
  return ingest_heartfailure(is, window_days);
}

}  // namespace intervalweib
