#pragma once

// Relational data model for interval-censored test results: one TestRecord per
// inspection interval, grouped by item.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "intervalweib/common.hpp"

namespace intervalweib {

/// One inspection interval of one item: covariates held over (t_agelt, t_age]
/// and the pass (0) / fail (1) result of the test at t_age.
struct TestRecord {
  std::string item_id;
  Eigen::VectorXd x;
  int y = 0;
  double t_agelt = 0.0;
  double t_age = 0.0;

  bool operator==(const TestRecord& other) const {
    return item_id == other.item_id && y == other.y && t_agelt == other.t_agelt &&
           t_age == other.t_age && x.size() == other.x.size() && x == other.x;
  }
};

/// Throws DataError naming the record if it breaks a TestRecord invariant.
inline void validate_record(const TestRecord& r, Eigen::Index n_features) {
  auto fail = [&](const std::string& what) {
    throw DataError("record for item '" + r.item_id + "' on [" + std::to_string(r.t_agelt) +
                    ", " + std::to_string(r.t_age) + "]: " + what);
  };
  if (!std::isfinite(r.t_agelt) || !std::isfinite(r.t_age)) fail("non-finite interval endpoint");
  if (r.t_agelt < 0.0) fail("t_agelt must be >= 0");
  if (!(r.t_agelt < r.t_age)) fail("t_agelt must be strictly less than t_age");
  if (r.y != 0 && r.y != 1) fail("label must be 0 or 1");
  if (r.x.size() != n_features) {
    fail("expected " + std::to_string(n_features) + " covariates, got " +
         std::to_string(r.x.size()));
  }
  if (!r.x.allFinite()) fail("non-finite covariate");
}

/// Immutable collection of records with an item index.
///
/// Records of one item must appear in increasing t_agelt order and may not
/// overlap; gaps between consecutive intervals are allowed. When the dataset
/// is flagged non-repairable, an item may fail at most once.
class IntervalDataset {
 public:
  IntervalDataset() = default;

  IntervalDataset(std::vector<TestRecord> records, Eigen::Index n_features,
                  bool non_repairable = false)
      : records_(std::move(records)), n_features_(n_features), non_repairable_(non_repairable) {
    if (n_features_ < 0) throw DataError("negative feature count");
    for (std::size_t i = 0; i < records_.size(); ++i) {
      const auto& r = records_[i];
      validate_record(r, n_features_);
      auto [it, inserted] = item_lookup_.try_emplace(r.item_id, item_ids_.size());
      if (inserted) {
        item_ids_.push_back(r.item_id);
        item_records_.emplace_back();
      }
      auto& idx = item_records_[it->second];
      if (!idx.empty()) {
        const auto& prev = records_[idx.back()];
        if (r.t_agelt < prev.t_age) {
          throw DataError("record for item '" + r.item_id + "' starting at " +
                          std::to_string(r.t_agelt) + " overlaps or precedes the interval ending at " +
                          std::to_string(prev.t_age));
        }
      }
      idx.push_back(i);
    }
    if (non_repairable_) {
      for (std::size_t j = 0; j < item_ids_.size(); ++j) {
        int failures = 0;
        for (auto i : item_records_[j]) failures += records_[i].y;
        if (failures > 1) {
          throw DataError("item '" + item_ids_[j] + "' has " + std::to_string(failures) +
                          " failures but the dataset is non-repairable");
        }
      }
    }
  }

  const std::vector<TestRecord>& records() const { return records_; }
  const TestRecord& operator[](std::size_t i) const { return records_[i]; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  Eigen::Index n_features() const { return n_features_; }
  bool non_repairable() const { return non_repairable_; }

  std::size_t n_items() const { return item_ids_.size(); }
  const std::vector<std::string>& item_ids() const { return item_ids_; }
  bool has_item(const std::string& id) const { return item_lookup_.count(id) > 0; }
  /// Record indices of the j-th item (first-appearance order).
  const std::vector<std::size_t>& item_records(std::size_t j) const { return item_records_[j]; }
  /// Record indices of an item by id; throws DataError if unknown.
  const std::vector<std::size_t>& item_records(const std::string& id) const {
    auto it = item_lookup_.find(id);
    if (it == item_lookup_.end()) throw DataError("unknown item '" + id + "'");
    return item_records_[it->second];
  }

  double failure_fraction() const {
    if (records_.empty()) return 0.0;
    double failed = 0.0;
    for (const auto& r : records_) failed += r.y;
    return failed / static_cast<double>(records_.size());
  }

  /// N x F design matrix.
  Eigen::MatrixXd design_matrix() const {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(records_.size()), n_features_);
    for (std::size_t i = 0; i < records_.size(); ++i) X.row(static_cast<Eigen::Index>(i)) = records_[i].x.transpose();
    return X;
  }

  bool operator==(const IntervalDataset& other) const {
    return n_features_ == other.n_features_ && records_ == other.records_;
  }

 private:
  std::vector<TestRecord> records_;
  Eigen::Index n_features_ = 0;
  bool non_repairable_ = false;
  std::vector<std::string> item_ids_;
  std::vector<std::vector<std::size_t>> item_records_;
  std::unordered_map<std::string, std::size_t> item_lookup_;
};

struct DatasetSplit {
  IntervalDataset train;
  IntervalDataset test;
};

/// Partitions items (never individual records) into train and test sets.
/// The number of test items is round(test_fraction * J), clamped so that
/// each side keeps at least one item.
inline DatasetSplit split_by_item(const IntervalDataset& ds, double test_fraction, std::uint64_t seed) {
  if (ds.n_items() < 2) throw DataError("cannot split: dataset has fewer than 2 items");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw std::invalid_argument("test_fraction must lie in (0, 1)");
  }
  const std::size_t J = ds.n_items();
  std::vector<std::size_t> order(J);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_stream(seed, 0);
  // Fisher-Yates with our own uniform so the partition is library independent.
  for (std::size_t i = J - 1; i > 0; --i) {
    auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i + 1));
    std::swap(order[i], order[std::min(j, i)]);
  }
  auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(J)));
  n_test = std::clamp<std::size_t>(n_test, 1, J - 1);

  std::vector<char> in_test(J, 0);
  for (std::size_t i = 0; i < n_test; ++i) in_test[order[i]] = 1;

  std::unordered_map<std::string, std::size_t> item_index;
  for (std::size_t j = 0; j < J; ++j) item_index.emplace(ds.item_ids()[j], j);

  std::vector<TestRecord> train, test;
  for (const auto& r : ds.records()) {
    (in_test[item_index.at(r.item_id)] ? test : train).push_back(r);
  }
  return {IntervalDataset(std::move(train), ds.n_features(), ds.non_repairable()),
          IntervalDataset(std::move(test), ds.n_features(), ds.non_repairable())};
}

/// Per-feature centering and scaling (population standard deviation).
class Standardizer {
 public:
  Standardizer() = default;
  Standardizer(Eigen::VectorXd mean, Eigen::VectorXd sd) : mean_(std::move(mean)), sd_(std::move(sd)) {
    if (mean_.size() != sd_.size()) throw std::invalid_argument("standardizer size mismatch");
    if ((sd_.array() <= 0.0).any()) throw std::invalid_argument("standardizer sd must be positive");
  }

  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::VectorXd& sd() const { return sd_; }
  Eigen::Index size() const { return mean_.size(); }

  Eigen::VectorXd transform(const Eigen::VectorXd& x) const {
    return ((x - mean_).array() / sd_.array()).matrix();
  }
  Eigen::VectorXd inverse(const Eigen::VectorXd& z) const {
    return (z.array() * sd_.array()).matrix() + mean_;
  }

 private:
  Eigen::VectorXd mean_;
  Eigen::VectorXd sd_;
};

/// Fits column means and population standard deviations on `train`.
/// Zero-variance columns get sd = 1 so they center to 0 and stay inert.
inline Standardizer fit_standardizer(const IntervalDataset& train) {
  if (train.empty()) throw DataError("cannot fit standardizer on an empty dataset");
  const Eigen::Index F = train.n_features();
  const double n = static_cast<double>(train.size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(F);
  for (const auto& r : train.records()) mean += r.x;
  mean /= n;
  Eigen::VectorXd var = Eigen::VectorXd::Zero(F);
  for (const auto& r : train.records()) var += (r.x - mean).array().square().matrix();
  var /= n;
  Eigen::VectorXd sd = var.array().sqrt().matrix();
  for (Eigen::Index f = 0; f < F; ++f) {
    // Relative guard: a column whose spread is pure rounding noise is constant.
    const double scale = std::max(1.0, std::abs(mean[f]));
    if (!(sd[f] > 1e-12 * scale)) sd[f] = 1.0;
  }
  return Standardizer(std::move(mean), std::move(sd));
}

inline IntervalDataset apply_standardizer(const Standardizer& sc, const IntervalDataset& ds) {
  if (sc.size() != ds.n_features()) throw DataError("standardizer/dataset feature count mismatch");
  std::vector<TestRecord> out = ds.records();
  for (auto& r : out) r.x = sc.transform(r.x);
  return IntervalDataset(std::move(out), ds.n_features(), ds.non_repairable());
}

inline IntervalDataset inverse_standardizer(const Standardizer& sc, const IntervalDataset& ds) {
  if (sc.size() != ds.n_features()) throw DataError("standardizer/dataset feature count mismatch");
  std::vector<TestRecord> out = ds.records();
  for (auto& r : out) r.x = sc.inverse(r.x);
  return IntervalDataset(std::move(out), ds.n_features(), ds.non_repairable());
}

// ---------------------------------------------------------------------------
// CSV: item_id,t_agelt,t_age,y,x1..xF

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"')) {
    s.remove_suffix(1);
  }
  return s;
}

inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace detail

inline void write_dataset(const IntervalDataset& ds, std::ostream& os) {
  os << "item_id,t_agelt,t_age,y";
  for (Eigen::Index f = 0; f < ds.n_features(); ++f) os << ",x" << (f + 1);
  os << '\n';
  for (const auto& r : ds.records()) {
    os << r.item_id << ',' << detail::format_double(r.t_agelt) << ',' << detail::format_double(r.t_age)
       << ',' << r.y;
    for (Eigen::Index f = 0; f < r.x.size(); ++f) os << ',' << detail::format_double(r.x[f]);
    os << '\n';
  }
}

inline void write_dataset(const IntervalDataset& ds, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open '" + path + "' for writing");
  write_dataset(ds, os);
  if (!os) throw DataError("failed writing '" + path + "'");
}

inline IntervalDataset read_dataset(std::istream& is, bool non_repairable = false) {
  std::string line;
  if (!std::getline(is, line)) throw DataError("line 1: missing header");
  auto header = detail::split_csv_line(line);
  static constexpr std::string_view kFixed[] = {"item_id", "t_agelt", "t_age", "y"};
  if (header.size() < 4) throw DataError("line 1: header must start with item_id,t_agelt,t_age,y");
  for (std::size_t c = 0; c < 4; ++c) {
    if (detail::trim(header[c]) != kFixed[c]) {
      throw DataError("line 1: expected column '" + std::string(kFixed[c]) + "', found '" +
                      std::string(detail::trim(header[c])) + "'");
    }
  }
  const auto F = static_cast<Eigen::Index>(header.size() - 4);

  std::vector<TestRecord> records;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_csv_line(line);
    auto fail = [&](const std::string& what) {
      throw DataError("line " + std::to_string(line_no) + ": " + what);
    };
    if (fields.size() != header.size()) {
      fail("expected " + std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));
    }
    TestRecord r;
    r.item_id = std::string(detail::trim(fields[0]));
    if (r.item_id.empty()) fail("empty item_id");
    double y = 0.0;
    if (!detail::parse_double(fields[1], r.t_agelt)) fail("cannot parse t_agelt");
    if (!detail::parse_double(fields[2], r.t_age)) fail("cannot parse t_age");
    if (!detail::parse_double(fields[3], y) || (y != 0.0 && y != 1.0)) fail("label must be 0 or 1");
    r.y = static_cast<int>(y);
    r.x.resize(F);
    for (Eigen::Index f = 0; f < F; ++f) {
      if (!detail::parse_double(fields[static_cast<std::size_t>(4 + f)], r.x[f])) {
        fail("cannot parse covariate x" + std::to_string(f + 1));
      }
    }
    try {
      validate_record(r, F);
    } catch (const DataError& e) {
      fail(e.what());
    }
    records.push_back(std::move(r));
  }
  return IntervalDataset(std::move(records), F, non_repairable);
}

inline IntervalDataset read_dataset(const std::string& path, bool non_repairable = false) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open '" + path + "'");
  return read_dataset(is, non_repairable);
}

}  // namespace intervalweib
