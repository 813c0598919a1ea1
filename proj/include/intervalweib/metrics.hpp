#pragma once

// Ranking metrics over per-interval failure scores, Kaplan-Meier on interval
// data (right-endpoint convention), and posterior reliability curves.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "intervalweib/dataset.hpp"
#include "intervalweib/survival.hpp"

namespace intervalweib {

struct ScoredRecord {
  double score = 0.0;
  int label = 0;
};

namespace detail {

inline void check_scored(std::span<const ScoredRecord> scored) {
  for (const auto& s : scored) {
    if (!(s.score >= 0.0 && s.score <= 1.0)) throw std::invalid_argument("scores must be finite and lie in [0, 1]");
    if (s.label != 0 && s.label != 1) throw std::invalid_argument("labels must be 0 or 1");
  }
}

}  // namespace detail

/// Mann-Whitney ROC-AUC: P(score+ > score-) with ties counted 1/2.
inline double roc_auc(std::span<const ScoredRecord> scored) {
  detail::check_scored(scored);
  std::vector<ScoredRecord> s(scored.begin(), scored.end());
  std::sort(s.begin(), s.end(), [](const auto& a, const auto& b) { return a.score < b.score; });
  double pos = 0.0, neg = 0.0, rank_sum = 0.0;
  for (std::size_t i = 0; i < s.size();) {
    std::size_t j = i;
    while (j < s.size() && s[j].score == s[i].score) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (s[t].label == 1) {
        rank_sum += midrank;
        pos += 1.0;
      } else {
        neg += 1.0;
      }
    }
    i = j;
  }
  if (pos == 0.0 || neg == 0.0) throw std::invalid_argument("ROC-AUC needs both classes");
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

/// Average precision: sum over recall increments of precision, scanning
/// thresholds in descending score order with tied scores as one step.
inline double pr_auc(std::span<const ScoredRecord> scored) {
  detail::check_scored(scored);
  std::vector<ScoredRecord> s(scored.begin(), scored.end());
  std::sort(s.begin(), s.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
  const double total_pos = static_cast<double>(std::count_if(s.begin(), s.end(), [](const auto& r) { return r.label == 1; }));
  if (total_pos == 0.0) throw std::invalid_argument("PR-AUC needs at least one positive");
  double tp = 0.0, seen = 0.0, ap = 0.0;
  for (std::size_t i = 0; i < s.size();) {
    std::size_t j = i;
    double new_tp = 0.0;
    while (j < s.size() && s[j].score == s[i].score) {
      new_tp += s[j].label;
      ++j;
    }
    tp += new_tp;
    seen += static_cast<double>(j - i);
    ap += (new_tp / total_pos) * (tp / seen);
    i = j;
  }
  return ap;
}

inline std::vector<ScoredRecord> make_scored(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("scores and labels differ in length");
  std::vector<ScoredRecord> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = {scores[i], labels[i]};
  return out;
}

/// Step function: survival[i] holds on [times[i], times[i+1]); S = 1 before times[0].
struct SurvivalCurve {
  std::vector<double> times;
  std::vector<double> survival;

  double at(double t) const {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 1.0;
    return survival[static_cast<std::size_t>(it - times.begin() - 1)];
  }
};

/// Product-limit estimator. An item's event time is the t_age of its failure
/// record; items that never fail are censored at their last t_age.
inline SurvivalCurve kaplan_meier(const IntervalDataset& ds) {
  if (ds.size() == 0) throw std::invalid_argument("Kaplan-Meier needs a non-empty dataset");
  std::map<double, std::pair<int, int>> at_time;  // time -> (events, censored)
  for (const auto& id : ds.item_ids()) {
    double last = 0.0, event = -1.0;
    for (auto i : ds.item_records(id)) {
      const auto& r = ds[i];
      last = std::max(last, r.t_age);
      if (r.y == 1 && event < 0.0) event = r.t_age;
    }
    if (event >= 0.0) {
      ++at_time[event].first;
    } else {
      ++at_time[last].second;
    }
  }
  SurvivalCurve curve;
  double at_risk = static_cast<double>(ds.n_items());
  double s = 1.0;
  for (const auto& [t, counts] : at_time) {
    if (counts.first > 0) {
      s *= 1.0 - counts.first / at_risk;
      curve.times.push_back(t);
      curve.survival.push_back(s);
    }
    at_risk -= counts.first + counts.second;
  }
  return curve;
}

struct ReliabilityCurve {
  std::vector<double> times;
  std::vector<double> mean;
  std::vector<double> lower;
  std::vector<double> upper;
  double level = 0.8;
};

namespace detail {

/// Linear-interpolation quantile (type 7) of an unsorted sample.
inline double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double h = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// Pointwise mean and central band over draws (rows: draws, cols: grid).
inline ReliabilityCurve summarize(std::span<const double> times, const std::vector<std::vector<double>>& values,
                                  double level) {
  ReliabilityCurve c;
  c.times.assign(times.begin(), times.end());
  c.level = level;
  const double alpha = 0.5 * (1.0 - level);
  for (std::size_t t = 0; t < times.size(); ++t) {
    std::vector<double> col(values.size());
    for (std::size_t s = 0; s < values.size(); ++s) col[s] = values[s][t];
    const double m = std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(col.size());
    // The mean of a skewed sample can sit outside a central band; widen the band to contain it.
    c.mean.push_back(m);
    c.lower.push_back(std::min(quantile(col, alpha), m));
    c.upper.push_back(std::max(quantile(col, 1.0 - alpha), m));
  }
  return c;
}

}  // namespace detail

struct ReliabilityCurves {
  std::vector<ReliabilityCurve> items;
  ReliabilityCurve population;
};

/// `draws[j][s]` is posterior draw s of item j's hazard; all items share the
/// draw index so the population curve averages items within each draw.
inline ReliabilityCurves reliability_curves(const std::vector<std::vector<HazardDraw>>& draws,
                                            std::span<const double> times, double level = 0.8) {
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("credible level must lie in (0, 1)");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < 0.0 || (i > 0 && times[i] < times[i - 1])) throw std::invalid_argument("time grid must be increasing from 0");
  }
  if (draws.empty()) throw std::invalid_argument("no items to draw curves for");
  const std::size_t S = draws.front().size();
  if (S == 0) throw std::invalid_argument("no posterior draws");
  for (const auto& d : draws) {
    if (d.size() != S) throw std::invalid_argument("items must share the posterior draw count");
  }
  ReliabilityCurves out;
  std::vector<std::vector<double>> population(S, std::vector<double>(times.size(), 0.0));
  for (const auto& item : draws) {
    std::vector<std::vector<double>> values(S, std::vector<double>(times.size()));
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t t = 0; t < times.size(); ++t) {
        values[s][t] = item[s].reliability(times[t]);
        population[s][t] += values[s][t];
      }
    }
    out.items.push_back(detail::summarize(times, values, level));
  }
  // Divide once so that R(0) = 1 survives the item average exactly.
  for (auto& row : population) {
    for (double& v : row) v /= static_cast<double>(draws.size());
  }
  out.population = detail::summarize(times, population, level);
  return out;
}

}  // namespace intervalweib
