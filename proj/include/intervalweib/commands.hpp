#pragma once

// intervalweib {datagen|fit|gridsearch|evaluate|curves}. Exit codes: 0 success,
// 1 runtime failure, 2 usage or configuration error.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <CLI11.hpp>

#include "intervalweib/artifact.hpp"
#include "intervalweib/config.hpp"
#include "intervalweib/datagen.hpp"
#include "intervalweib/dataset.hpp"
#include "intervalweib/laplace.hpp"
#include "intervalweib/mcmc_models.hpp"
#include "intervalweib/metrics.hpp"
#include "intervalweib/nn.hpp"
#include "intervalweib/plot.hpp"

namespace intervalweib {

namespace cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs `build` and reports invalid settings as configuration errors.
template <class F>
auto checked(F&& build) {
  try {
    return build();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

inline std::uint64_t seed_of(const Config& c) { return static_cast<std::uint64_t>(c.get_int("seed", 0)); }

inline NutsConfig nuts_config(const Config& c) {
  return checked([&] {
    NutsConfig n;
    n.chains = static_cast<int>(c.get_int("nuts.chains", n.chains));
    n.warmup = static_cast<int>(c.get_int("nuts.warmup", n.warmup));
    n.draws = static_cast<int>(c.get_int("nuts.draws", n.draws));
    n.target_accept = c.get_double("nuts.target_accept", n.target_accept);
    n.max_depth = static_cast<int>(c.get_int("nuts.max_depth", n.max_depth));
    n.seed = seed_of(c);
    n.validate();
    return n;
  });
}

inline ReliabilityPriors reliability_priors(const Config& c) {
  return checked([&] {
    ReliabilityPriors p;
    p.reliability_a = c.get_double("priors.reliability_a", p.reliability_a);
    p.reliability_b = c.get_double("priors.reliability_b", p.reliability_b);
    p.log_shape_mean = c.get_double("priors.log_shape_mean", p.log_shape_mean);
    p.log_shape_sd = c.get_double("priors.log_shape_sd", p.log_shape_sd);
    p.t_fix = c.get_double("priors.t_fix", p.t_fix);
    p.validate();
    return p;
  });
}

inline SpikeSlabConfig spike_slab_config(const Config& c) {
  return checked([&] {
    SpikeSlabConfig s;
    s.spike_variance = c.get_double("spike_slab.spike_variance", s.spike_variance);
    s.slab_variance = c.get_double("spike_slab.slab_variance", s.slab_variance);
    s.inclusion_prob = c.get_double("spike_slab.inclusion_prob", s.inclusion_prob);
    s.hypervariance = c.get_bool("spike_slab.hypervariance", s.hypervariance);
    s.hyper_shape = c.get_double("spike_slab.hyper_shape", s.hyper_shape);
    s.validate();
    return s;
  });
}

inline TrainConfig train_config(const Config& c) {
  return checked([&] {
    TrainConfig t;
    t.learning_rate = c.get_double("train.learning_rate", t.learning_rate);
    const long batch = c.get_int("train.batch_size", static_cast<long>(t.batch_size));
    if (batch < 1) throw std::invalid_argument("batch size must be positive");
    t.batch_size = static_cast<std::size_t>(batch);
    t.epochs = static_cast<int>(c.get_int("train.epochs", t.epochs));
    t.precision = c.get_double("train.precision", t.precision);
    t.coordinate_descent = c.get_bool("train.coordinate_descent", t.coordinate_descent);
    t.seed = seed_of(c);
    t.validate();
    return t;
  });
}

inline std::filesystem::path output_dir(const Config& c) {
  std::filesystem::path dir = c.get_string("out", ".");
  std::filesystem::create_directories(dir);
  return dir;
}

inline IntervalDataset load_data(const Config& c) {
  const auto path = c.get_string("data.path", "");
  if (path.empty()) throw ConfigError("no dataset given (--data)");
  return read_dataset(path, c.get_bool("data.non_repairable", true));
}

// ---------------------------------------------------------------------------
// datagen

inline IntervalDataset generate_dataset(const Config& c) {
  const auto kind = c.get_string("data.kind", "");
  const auto seed = seed_of(c);
  if (kind == "heartfailure") {
    const auto input = c.get_string("data.input", "");
    if (input.empty()) throw ConfigError("heartfailure needs --input pointing at the clinical records CSV");
    return ingest_heartfailure(input, c.get_double("data.window", 30.0));
  }
  const auto n = c.get_int("data.n", 1000);
  if (n < 2) throw ConfigError("--n must be at least 2");
  const double noise = c.get_double("data.noise", 0.1);
  const CensorWindowSpec window = checked([&] {
    CensorWindowSpec w{c.get_double("data.window", 2.0), c.get_double("data.max_time", 100.0)};
    w.validate();
    return w;
  });
  LabeledPoints base;
  if (kind == "moons1" || kind == "moons2") {
    base = make_moons(static_cast<std::size_t>(n), noise, seed);
  } else if (kind == "banana1" || kind == "banana2") {
    base = make_banana(static_cast<std::size_t>(n), noise, seed);
  } else {
    throw ConfigError("unknown dataset kind '" + kind + "'");
  }
  // Failure times use a stream family distinct from the point cloud's.
  const std::uint64_t time_seed = seed ^ 0x5eed5eed5eedULL;
  if (kind.back() == '1') return generate_synthetic_1(base, kSynthetic1Classes, window, time_seed);
  return generate_synthetic_2(base, kSynthetic2Shapes, window, time_seed);
}

inline int cmd_datagen(const Config& c, std::ostream& out) {
  const auto ds = generate_dataset(c);
  const auto dir = output_dir(c);
  write_dataset(ds, (dir / "dataset.csv").string());
  const double frac = c.get_double("data.test_fraction", 0.25);
  if (!(frac > 0.0 && frac < 1.0)) throw ConfigError("test fraction must lie in (0, 1)");
  const auto split = split_by_item(ds, frac, seed_of(c));
  write_dataset(split.train, (dir / "train.csv").string());
  write_dataset(split.test, (dir / "test.csv").string());
  out << "records " << ds.size() << ", items " << ds.n_items() << ", features " << ds.n_features()
      << ", failed fraction " << ds.failure_fraction() << '\n'
      << "train " << split.train.size() << " records / test " << split.test.size() << " records -> " << dir.string()
      << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// fit

inline ModelArtifact fit_laplace_model(ModelKind kind, const IntervalDataset& std_ds, const Config& c,
                                       Eigen::Index width, const TrainConfig& train) {
  ModelArtifact a;
  a.kind = kind;
  a.train = train;
  const auto spec = MlpSpec::with_width(std_ds.n_features(), width);
  const auto result = map_train(spec, std_ds, train);
  a.final_objective = result.final_objective;
  double precision = train.precision;
  const auto grid = c.get_doubles("train.precision_grid", {});
  if (!grid.empty()) {
    auto search = tune_precision(spec, result.phi, std_ds, grid);
    a.precision_evidence = search.evidence;
    precision = search.best;
  }
  a.laplace = fit_laplace(spec, result.phi, std_ds, precision);
  a.predictive.samples = static_cast<std::size_t>(c.get_int("predictive.samples", 100));
  if (a.predictive.samples < 1) throw ConfigError("predictive samples must be >= 1");
  a.predictive.seed = seed_of(c);
  a.predictive.mode = kind == ModelKind::Bnn ? PredictiveMode::Bnn : PredictiveMode::Glm;
  return a;
}

inline ModelArtifact fit_model(ModelKind kind, const IntervalDataset& raw, const Config& c) {
  if (raw.empty()) throw DataError("cannot fit a model to an empty dataset");
  ModelArtifact a;
  a.kind = kind;
  a.n_features = raw.n_features();
  a.standardizer = fit_standardizer(raw);
  const auto ds = apply_standardizer(a.standardizer, raw);
  if (is_laplace(kind)) {
    const auto width = c.get_int("model.hidden_width", 8);
    if (width < 0) throw ConfigError("hidden width must be >= 0");
    auto fitted = fit_laplace_model(kind, ds, c, width, train_config(c));
    fitted.n_features = a.n_features;
    fitted.standardizer = a.standardizer;
    return fitted;
  }
  a.nuts = nuts_config(c);
  a.priors = reliability_priors(c);
  switch (kind) {
    case ModelKind::Baseline:
      a.samples = fit_baseline(ds, a.priors, a.nuts);
      break;
    case ModelKind::LinearMvn:
      a.samples = fit_linear_mvn(ds, a.nuts, a.priors, c.get_double("priors.normal_variance", 1.0));
      break;
    default: {
      a.spike_slab = spike_slab_config(c);
      const auto mode =
          kind == ModelKind::SpikeSlabContinuous ? SpikeSlabMode::ContinuousNmig : SpikeSlabMode::DiscreteMarginalized;
      auto fit = fit_spike_slab(ds, a.spike_slab, mode, a.nuts, a.priors);
      a.samples = std::move(fit.samples);
      a.pip = std::move(fit.pip);
    }
  }
  return a;
}

inline constexpr double kMaxRhat = 1.05;
inline constexpr double kMinEss = 100.0;

/// Prints the fit summary; returns false when MCMC diagnostics fail.
inline bool report_fit(const ModelArtifact& a, std::ostream& out) {
  out << "model " << to_string(a.kind) << '\n';
  if (a.laplace) {
    out << "final log posterior " << a.final_objective << '\n'
        << "prior precision " << a.laplace->precision << '\n'
        << "log marginal likelihood " << a.laplace->log_evidence << '\n';
    return true;
  }
  const auto& s = *a.samples;
  out << "parameter,mean,sd,rhat,ess,mcse\n";
  for (std::size_t j = 0; j < s.names.size(); ++j) {
    const auto& d = s.diagnostics[j];
    out << s.names[j] << ',' << d.mean << ',' << d.sd << ',' << d.rhat << ',' << d.ess << ',' << d.mcse << '\n';
  }
  for (std::size_t f = 0; f < a.pip.size(); ++f) out << "pip[" << f + 1 << "] " << a.pip[f] << '\n';
  out << "divergences " << s.divergences << '\n';
  if (!s.warning.empty()) out << "warning: " << s.warning << '\n';
  bool ok = true;
  if (s.max_rhat() > kMaxRhat) {
    out << "diagnostics failed: max R-hat " << s.max_rhat() << " > " << kMaxRhat << '\n';
    ok = false;
  }
  if (s.min_ess() < kMinEss) {
    out << "diagnostics failed: min ESS " << s.min_ess() << " < " << kMinEss << '\n';
    ok = false;
  }
  return ok;
}

inline int cmd_fit(const Config& c, std::ostream& out) {
  const auto kind = checked([&] { return parse_model_kind(c.get_string("model.kind", "")); });
  const auto raw = load_data(c);
  const auto artifact = fit_model(kind, raw, c);
  const auto dir = output_dir(c);
  write_artifact(artifact, (dir / "model.json").string());
  const bool ok = report_fit(artifact, out);
  return ok ? kExitOk : kExitFailure;
}

// ---------------------------------------------------------------------------
// gridsearch

struct GridPoint {
  double precision = 0.0;
  std::size_t batch_size = 0;
  Eigen::Index hidden_width = 0;
  double learning_rate = 0.0;
  int epochs = 0;
  bool coordinate_descent = false;

  auto key() const { return std::tie(hidden_width, precision, batch_size, learning_rate, epochs, coordinate_descent); }
};

struct GridResult {
  GridPoint point;
  double log_evidence = 0.0;
  double selected_precision = 0.0;
  double final_objective = 0.0;
  std::string error;
};

inline std::vector<GridPoint> enumerate_grid(const Config& c) {
  const TrainConfig defaults = train_config(c);
  const auto precisions = c.get_doubles("grid.precision", {defaults.precision});
  const auto batches = c.get_doubles("grid.batch_size", {static_cast<double>(defaults.batch_size)});
  const auto widths = c.get_doubles("grid.hidden_width", {static_cast<double>(c.get_int("model.hidden_width", 8))});
  const auto rates = c.get_doubles("grid.learning_rate", {defaults.learning_rate});
  const auto epochs = c.get_doubles("grid.epochs", {static_cast<double>(defaults.epochs)});
  const auto cds = c.get_bools("grid.coordinate_descent", {defaults.coordinate_descent});
  std::vector<GridPoint> grid;
  for (double p : precisions)
    for (double b : batches)
      for (double w : widths)
        for (double lr : rates)
          for (double e : epochs)
            for (bool cd : cds) {
              if (!(p > 0.0) || !(b >= 1.0) || !(w >= 0.0) || !(lr > 0.0) || !(e >= 1.0)) {
                throw ConfigError("grid values out of range");
              }
              grid.push_back({p, static_cast<std::size_t>(b), static_cast<Eigen::Index>(w), lr, static_cast<int>(e), cd});
            }
  if (grid.empty()) throw ConfigError("hyperparameter grid is empty");
  // Canonical order so results do not depend on how the grid was written.
  std::sort(grid.begin(), grid.end(), [](const auto& a, const auto& b) { return a.key() < b.key(); });
  grid.erase(std::unique(grid.begin(), grid.end(), [](const auto& a, const auto& b) { return a.key() == b.key(); }),
             grid.end());
  return grid;
}

/// Trains every grid point and ranks by training log marginal likelihood
/// (descending; ties keep canonical grid order). Failed points rank last.
inline std::vector<GridResult> run_gridsearch(const IntervalDataset& std_ds, const Config& c, bool parallel) {
  const auto grid = enumerate_grid(c);
  std::vector<GridResult> results(grid.size());
  auto work = [&](std::size_t i) {
    auto& r = results[i];
    r.point = grid[i];
    TrainConfig t = train_config(c);
    t.precision = r.point.precision;
    t.batch_size = r.point.batch_size;
    t.learning_rate = r.point.learning_rate;
    t.epochs = r.point.epochs;
    t.coordinate_descent = r.point.coordinate_descent;
    try {
      const auto a = fit_laplace_model(ModelKind::LaplaceNn, std_ds, c, r.point.hidden_width, t);
      r.log_evidence = a.laplace->log_evidence;
      r.selected_precision = a.laplace->precision;
      r.final_objective = a.final_objective;
    } catch (const NumericalError& e) {
      r.error = e.what();
      r.log_evidence = -std::numeric_limits<double>::infinity();
    }
  };
  if (parallel) {
    const std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
    std::vector<std::thread> threads;
    std::size_t next = 0;
    std::mutex m;
    for (std::size_t w = 0; w < std::min(workers, grid.size()); ++w) {
      threads.emplace_back([&] {
        for (;;) {
          std::size_t i;
          {
            std::lock_guard lock(m);
            if (next >= grid.size()) return;
            i = next++;
          }
          work(i);
        }
      });
    }
    for (auto& t : threads) t.join();
  } else {
    for (std::size_t i = 0; i < grid.size(); ++i) work(i);
  }
  std::stable_sort(results.begin(), results.end(),
                   [](const auto& a, const auto& b) { return a.log_evidence > b.log_evidence; });
  return results;
}

inline int cmd_gridsearch(const Config& c, bool parallel, std::ostream& out) {
  const auto raw = load_data(c);
  if (raw.empty()) throw DataError("cannot search hyperparameters on an empty dataset");
  const auto ds = apply_standardizer(fit_standardizer(raw), raw);
  const auto results = run_gridsearch(ds, c, parallel);
  const auto dir = output_dir(c);
  std::ofstream csv((dir / "gridsearch.csv").string(), std::ios::binary);
  if (!csv) throw DataError("cannot write gridsearch.csv");
  csv << "rank,hidden_width,precision,batch_size,learning_rate,epochs,coordinate_descent,selected_precision,"
         "log_evidence,final_objective,error\n";
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    csv << i + 1 << ',' << r.point.hidden_width << ',' << detail::format_double(r.point.precision) << ','
        << r.point.batch_size << ',' << detail::format_double(r.point.learning_rate) << ',' << r.point.epochs << ','
        << (r.point.coordinate_descent ? "true" : "false") << ',' << detail::format_double(r.selected_precision) << ','
        << detail::format_double(r.log_evidence) << ',' << detail::format_double(r.final_objective) << ',' << r.error
        << '\n';
  }
  const auto& best = results.front();
  if (!best.error.empty()) throw NumericalError("every grid point failed to train");
  std::ofstream ini((dir / "best.ini").string(), std::ios::binary);
  ini << "[model]\nkind = laplace-nn\nhidden_width = " << best.point.hidden_width << "\n\n[train]\nprecision = "
      << detail::format_double(best.point.precision) << "\nbatch_size = " << best.point.batch_size
      << "\nlearning_rate = " << detail::format_double(best.point.learning_rate) << "\nepochs = " << best.point.epochs
      << "\ncoordinate_descent = " << (best.point.coordinate_descent ? "true" : "false") << '\n';
  out << "evaluated " << results.size() << " configurations\n"
      << "best: hidden_width " << best.point.hidden_width << ", precision " << best.point.precision << ", batch_size "
      << best.point.batch_size << ", learning_rate " << best.point.learning_rate << ", epochs " << best.point.epochs
      << ", coordinate_descent " << (best.point.coordinate_descent ? "true" : "false") << ", log evidence "
      << best.log_evidence << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// evaluate

struct Metrics {
  double roc_auc = 0.0;
  double pr_auc = 0.0;
};

inline Metrics evaluate_artifact(const ModelArtifact& a, const IntervalDataset& ds) {
  const Predictor predictor(a);
  const auto scores = predictor.score(ds);
  std::vector<int> labels;
  for (const auto& r : ds.records()) labels.push_back(r.y);
  const auto scored = make_scored(scores, labels);
  return {roc_auc(scored), pr_auc(scored)};
}

inline double relative_percent(double m, double base) { return 100.0 * (m - base) / base; }

inline int cmd_evaluate(const Config& c, std::ostream& out) {
  const auto path = c.get_string("artifact", "");
  if (path.empty()) throw ConfigError("no model artifact given (--artifact)");
  const auto artifact = read_artifact(path);
  const auto ds = load_data(c);
  const auto m = evaluate_artifact(artifact, ds);
  const auto relative_to = c.get_string("relative_to", "");
  std::optional<Metrics> base;
  if (!relative_to.empty()) base = evaluate_artifact(read_artifact(relative_to), ds);

  const auto dir = output_dir(c);
  std::ofstream csv((dir / "metrics.csv").string(), std::ios::binary);
  if (!csv) throw DataError("cannot write metrics.csv");
  auto row = [&](std::ostream& os, const char* name, double v, double b) {
    os << name << ',' << detail::format_double(v);
    if (base) {
      char pct[32];
      std::snprintf(pct, sizeof pct, "%+.2f%%", relative_percent(v, b));
      os << ',' << detail::format_double(b) << ',' << pct;
    }
    os << '\n';
  };
  for (std::ostream* os : {static_cast<std::ostream*>(&csv), &out}) {
    *os << "metric,value" << (base ? ",baseline,relative" : "") << '\n';
    row(*os, "roc_auc", m.roc_auc, base ? base->roc_auc : 0.0);
    row(*os, "pr_auc", m.pr_auc, base ? base->pr_auc : 0.0);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// curves

inline std::string file_safe(const std::string& id) {
  std::string s = id;
  for (auto& ch : s) {
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_') ch = '_';
  }
  return s;
}

inline int cmd_curves(const Config& c, bool with_km, std::ostream& out) {
  const auto path = c.get_string("artifact", "");
  if (path.empty()) throw ConfigError("no model artifact given (--artifact)");
  const auto artifact = read_artifact(path);
  const auto ds = load_data(c);
  if (ds.n_items() == 0) throw DataError("dataset has no items");
  if (ds.n_features() != artifact.n_features) throw DataError("dataset/model feature count mismatch");

  double t_max = 0.0;
  for (const auto& r : ds.records()) t_max = std::max(t_max, r.t_age);
  t_max = c.get_double("curves.t_max", t_max);
  const auto points = c.get_int("curves.points", 101);
  const double level = c.get_double("curves.level", 0.8);
  if (!(t_max > 0.0) || points < 2) throw ConfigError("curve grid needs t_max > 0 and at least 2 points");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("credible level must lie in (0, 1)");
  std::vector<double> times(static_cast<std::size_t>(points));
  for (long i = 0; i < points; ++i) times[static_cast<std::size_t>(i)] = t_max * static_cast<double>(i) / static_cast<double>(points - 1);

  const auto items = c.get_strings("curves.items");
  for (const auto& id : items) {
    if (!ds.has_item(id)) throw DataError("unknown item '" + id + "'");
  }

  const Predictor predictor(artifact, static_cast<std::size_t>(c.get_int("curves.max_draws", 500)));
  // Covariates are constant within an item; each item's first record carries them.
  std::vector<std::vector<HazardDraw>> all;
  for (const auto& id : ds.item_ids()) all.push_back(predictor.hazards(ds[ds.item_records(id).front()].x));
  const auto population = reliability_curves(all, times, level).population;

  std::optional<SurvivalCurve> km;
  if (with_km) km = kaplan_meier(ds);
  const auto dir = output_dir(c);
  const std::string model = to_string(artifact.kind);
  write_curve_csv(population, (dir / "curve_population.csv").string(), km ? &*km : nullptr);
  write_curve_svg(population, model + ": population reliability", (dir / "curve_population.svg").string(),
                  km ? &*km : nullptr);
  std::size_t written = 1;
  for (const auto& id : items) {
    std::vector<std::vector<HazardDraw>> one{predictor.hazards(ds[ds.item_records(id).front()].x)};
    const auto curve = reliability_curves(one, times, level).items.front();
    const auto stem = "curve_" + file_safe(id);
    write_curve_csv(curve, (dir / (stem + ".csv")).string());
    write_curve_svg(curve, model + ": item " + id, (dir / (stem + ".svg")).string());
    ++written;
  }
  out << "wrote " << written << " curve(s) to " << dir.string() << '\n';
  return kExitOk;
}

}  // namespace cli

/// Entry point shared by the executable and the tests.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Bayesian reliability models for interval-censored failure data", "intervalweib"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "INI-style experiment config")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Random seed");
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--set", overrides, "Override a config value, section.key=value");
  };

  std::map<std::string, std::string> flags;  // config key -> flag value
  auto keyed = [&](CLI::App* sub, const std::string& flag, const std::string& key, const std::string& help) {
    return sub->add_option_function<std::string>(flag, [&flags, key](const std::string& v) { flags[key] = v; }, help);
  };

  auto* datagen = app.add_subcommand("datagen", "Generate or ingest an interval-censored dataset");
  common(datagen);
  std::vector<std::string> kinds{"moons1", "banana1", "moons2", "banana2", "heartfailure"};
  keyed(datagen, "--kind", "data.kind", "Dataset kind")->check(CLI::IsMember(kinds));
  keyed(datagen, "--n", "data.n", "Number of base points (items)");
  keyed(datagen, "--noise", "data.noise", "Point-cloud noise");
  keyed(datagen, "--window", "data.window", "Inspection window length");
  keyed(datagen, "--max-time", "data.max_time", "Censoring horizon for synthetic data");
  keyed(datagen, "--input", "data.input", "Heart-failure clinical records CSV");
  keyed(datagen, "--test-fraction", "data.test_fraction", "Fraction of items held out");

  std::vector<std::string> model_names;
  for (const auto& [name, kind] : model_kinds()) model_names.push_back(name);

  auto* fit = app.add_subcommand("fit", "Fit a model and write model.json");
  common(fit);
  keyed(fit, "--data", "data.path", "Training dataset CSV");
  keyed(fit, "--model", "model.kind", "Model kind")->check(CLI::IsMember(model_names));

  auto* grid = app.add_subcommand("gridsearch", "Rank Laplace network hyperparameters by training evidence");
  common(grid);
  keyed(grid, "--data", "data.path", "Training dataset CSV");
  bool parallel = false;
  grid->add_flag("--parallel", parallel, "Train grid points concurrently");

  auto* evaluate = app.add_subcommand("evaluate", "ROC-AUC and PR-AUC of a fitted model on a dataset");
  common(evaluate);
  keyed(evaluate, "--artifact", "artifact", "Model artifact (model.json)")->check(CLI::ExistingFile);
  keyed(evaluate, "--data", "data.path", "Evaluation dataset CSV");
  keyed(evaluate, "--relative-to", "relative_to", "Baseline artifact for percentage changes")->check(CLI::ExistingFile);

  auto* curves = app.add_subcommand("curves", "Reliability curves with credible bands (CSV + SVG)");
  common(curves);
  keyed(curves, "--artifact", "artifact", "Model artifact (model.json)")->check(CLI::ExistingFile);
  keyed(curves, "--data", "data.path", "Dataset whose items are plotted");
  keyed(curves, "--items", "curves.items", "Comma-separated item ids");
  keyed(curves, "--t-max", "curves.t_max", "Last grid time");
  keyed(curves, "--points", "curves.points", "Grid points");
  bool km = false;
  curves->add_flag("--km", km, "Overlay Kaplan-Meier");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return cli::kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return cli::kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return cli::kExitUsage;
  }

  try {
    Config c = config_path.empty() ? Config{} : Config::load(config_path);
    for (const auto& o : overrides) c.set_assignment(o);
    for (const auto& [key, value] : flags) c.set(key, value);
    if (seed) c.set("seed", std::to_string(*seed));
    if (!out_dir.empty()) c.set("out", out_dir);

    if (datagen->parsed()) return cli::cmd_datagen(c, out);
    if (fit->parsed()) return cli::cmd_fit(c, out);
    if (grid->parsed()) return cli::cmd_gridsearch(c, parallel, out);
    if (evaluate->parsed()) return cli::cmd_evaluate(c, out);
    if (curves->parsed()) return cli::cmd_curves(c, km, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return cli::kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return cli::kExitFailure;
  }
  return cli::kExitUsage;
}

}  // namespace intervalweib
