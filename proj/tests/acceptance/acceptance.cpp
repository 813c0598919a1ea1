// Acceptance checks 1-11. One PASS/FAIL line per criterion; exit status is
// nonzero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <sstream>

#include "intervalweib/commands.hpp"
#include "intervalweib/metrics.hpp"
#include "support.hpp"

using namespace intervalweib;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [fail]");
  }
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

double quantile_of(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  return v[static_cast<std::size_t>(p * static_cast<double>(v.size() - 1))];
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  const auto n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i] / n;
    mb += b[i] / n;
  }
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

// max |analytic - numeric| / max |analytic|
double gradient_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric) {
  return (analytic - numeric).cwiseAbs().maxCoeff() / std::max(analytic.cwiseAbs().maxCoeff(), 1e-300);
}

IntervalDataset first_records(const IntervalDataset& d, std::size_t n) {
  std::vector<TestRecord> r(d.records().begin(), d.records().begin() + static_cast<std::ptrdiff_t>(std::min(n, d.size())));
  return IntervalDataset(std::move(r), d.n_features(), true);
}

TestRecord km_record(const std::string& id, double t1, double t2, int y) {
  TestRecord r;
  r.item_id = id;
  r.t_agelt = t1;
  r.t_age = t2;
  r.y = y;
  return r;
}

// ---------------------------------------------------------------------------

Outcome benchmark_direction() {
  Outcome o;
  for (std::string kind : {"banana2", "moons2"}) {
    double d_roc = 0.0, d_pr = 0.0;
    for (int seed = 1; seed <= 3; ++seed) {
      Config c;
      c.set("data.kind", kind);
      c.set("data.n", "1000");
      c.set("data.window", "2.0");
      c.set("seed", std::to_string(seed));
      c.set("nuts.warmup", "500");
      c.set("nuts.draws", "500");
      c.set("train.epochs", "200");
      const auto split = split_by_item(cli::generate_dataset(c), 0.25, static_cast<std::uint64_t>(seed));
      const auto base = cli::evaluate_artifact(cli::fit_model(ModelKind::Baseline, split.train, c), split.test);
      const auto lap = cli::evaluate_artifact(cli::fit_model(ModelKind::LaplaceNn, split.train, c), split.test);
      d_roc += (lap.roc_auc - base.roc_auc) / 3.0;
      d_pr += (lap.pr_auc - base.pr_auc) / 3.0;
    }
    o.check(d_roc >= 0.10 && d_pr >= 0.10, kind + fmt(" dROC %+.3f", d_roc) + fmt(" dPR %+.3f", d_pr));
  }
  return o;
}

Outcome linear_selection() {
  Outcome o;
  const auto dir = iwtest::scratch_dir("acceptance_hf");
  const auto csv = (dir / "heart_failure_clinical_records.csv").string();
  iwtest::write_heartfailure_surrogate(csv);
  const auto raw = ingest_heartfailure(csv);
  const auto ds = apply_standardizer(fit_standardizer(raw), raw);
  Config c;
  c.set("grid.hidden_width", "0,8");
  c.set("train.precision_grid", "0.01,0.1,1,10");
  double best[2] = {-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& r : cli::run_gridsearch(ds, c, false)) {
    auto& slot = best[r.point.hidden_width == 0 ? 0 : 1];
    slot = std::max(slot, r.log_evidence);
  }
  o.check(best[0] >= best[1], fmt("log evidence 0 hidden %.2f vs 8 hidden %.2f", best[0], best[1]));
  return o;
}

Outcome gradients() {
  Outcome o;
  constexpr int kPoints = 50;
  Rng rng = make_stream(3, 0);

  double worst = 0.0;
  for (int i = 0; i < kPoints; ++i) {
    const int y = uniform01(rng) < 0.5 ? 1 : 0;
    const double g = -1.5 + 3.0 * uniform01(rng), eta = -2.0 + 2.5 * uniform01(rng),
                 kappa = -0.7 + 1.7 * uniform01(rng);
    const double t1 = uniform01(rng) < 0.3 ? 0.0 : 3.0 * uniform01(rng);
    const double t2 = t1 + 0.1 + 2.0 * uniform01(rng);
    const auto term = record_log_likelihood(y, g, eta, kappa, t1, t2);
    const Eigen::Vector3d analytic(term.d_g, term.d_eta, term.d_kappa);
    const auto numeric = iwtest::fd_gradient(
        [&](const Eigen::VectorXd& z) { return record_log_likelihood(y, z[0], z[1], z[2], t1, t2).value; },
        Eigen::Vector3d(g, eta, kappa), 1e-6);
    worst = std::max(worst, gradient_error(analytic, numeric));
  }
  o.check(worst < 1e-6, fmt("record likelihood %.1e", worst));

  const auto nn_data = iwtest::linear_weibull_data(40, Eigen::Vector3d(-0.5, 0.0, 0.5), 0.6, 1.5, 0.7, 7);
  for (const MlpSpec& spec : {MlpSpec{3, 0, 0}, MlpSpec{3, 1, 5}}) {
    worst = 0.0;
    for (int i = 0; i < kPoints; ++i) {
      ParamVector phi(spec.param_count());
      for (Eigen::Index j = 0; j < phi.size(); ++j) phi[j] = 0.5 * standard_normal(rng);
      const auto obj = log_posterior(spec, phi, nn_data, 0.3);
      const auto numeric = iwtest::fd_gradient(
          [&](const Eigen::VectorXd& p) { return log_posterior(spec, p, nn_data, 0.3).value; }, phi, 1e-6);
      worst = std::max(worst, gradient_error(obj.gradient, numeric));
    }
    o.check(worst < 1e-6, "MAP objective width " + std::to_string(spec.hidden_width) + fmt(" %.1e", worst));
  }

  const auto ds = iwtest::linear_weibull_data(40, Eigen::Vector3d(0.5, 0.0, -0.3), 0.4, 1.8, 1.0, 1);
  std::vector<TestRecord> plain;
  for (const auto& r : ds.records()) plain.push_back(km_record(r.item_id, r.t_agelt, r.t_age, r.y));
  const IntervalDataset baseline_ds(std::move(plain), 0, true);
  SpikeSlabConfig ss, hyper;
  hyper.hypervariance = true;
  ReliabilityPriors shifted;
  shifted.t_fix = 3.0;
  const std::vector<std::pair<std::string, WeibullRegressionModel>> models{
      {"baseline", WeibullRegressionModel(baseline_ds, CoefficientPrior::None)},
      {"linear-mvn", WeibullRegressionModel(ds, CoefficientPrior::Normal)},
      {"linear-mvn t_fix=3", WeibullRegressionModel(ds, CoefficientPrior::Normal, shifted)},
      {"spike-slab nmig", WeibullRegressionModel(ds, CoefficientPrior::SpikeSlabMixture, {}, ss)},
      {"spike-slab nmig+hyper", WeibullRegressionModel(ds, CoefficientPrior::SpikeSlabMixture, {}, hyper)},
      {"spike-slab discrete", WeibullRegressionModel(ds, CoefficientPrior::SpikeSlabEnumerated, {}, ss)},
  };
  for (const auto& [name, model] : models) {
    worst = 0.0;
    for (int i = 0; i < kPoints; ++i) {
      Eigen::VectorXd q = model.initial_point();
      for (Eigen::Index j = 0; j < q.size(); ++j) q[j] += 0.6 * standard_normal(rng);
      Eigen::VectorXd grad;
      model.log_density(q, grad);
      const auto numeric = iwtest::fd_gradient(
          [&](const Eigen::VectorXd& z) {
            Eigen::VectorXd unused;
            return model.log_density(z, unused);
          },
          q, 1e-6);
      worst = std::max(worst, gradient_error(grad, numeric));
    }
    o.check(worst < 1e-6, name + fmt(" %.1e", worst));
  }
  return o;
}

IntervalDataset standardized_linear(std::size_t items, std::uint64_t seed) {
  const auto raw = iwtest::linear_weibull_data(items, Eigen::Vector2d(0.6, -0.4), 0.5, 2.0, 1.0, seed);
  return apply_standardizer(fit_standardizer(raw), raw);
}

ParamVector full_batch_map(const MlpSpec& spec, const IntervalDataset& ds, double precision, int epochs) {
  TrainConfig t;
  t.precision = precision;
  t.epochs = epochs;
  t.batch_size = ds.size();
  t.learning_rate = 0.02;
  return map_train(spec, ds, t).phi;
}

Outcome ggn_exactness() {
  Outcome o;
  auto ds = standardized_linear(120, 2);
  ds = first_records(ds, 200);
  const MlpSpec spec{2, 0, 0};
  const double rho = 0.5;
  const auto phi = full_batch_map(spec, ds, rho, 1500);
  const Eigen::MatrixXd precision = ggn_covariance(spec, phi, ds, rho).inverse();
  const Eigen::MatrixXd hessian = iwtest::fd_hessian(
      [&](const Eigen::VectorXd& p) { return Eigen::VectorXd(-log_posterior(spec, p, ds, rho).gradient); }, phi, 1e-5);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < hessian.rows(); ++i) {
    for (Eigen::Index j = 0; j < hessian.cols(); ++j) {
      const double scale = std::max(std::abs(hessian(i, j)), 1e-6 * hessian.cwiseAbs().maxCoeff());
      worst = std::max(worst, std::abs(precision(i, j) - hessian(i, j)) / scale);
    }
  }
  o.check(ds.size() == 200, std::to_string(ds.size()) + " records");
  o.check(worst < 1e-4, fmt("max entrywise rel err %.1e", worst));
  return o;
}

Outcome linearization() {
  Outcome o;
  const auto ds = standardized_linear(150, 6);
  const MlpSpec spec{2, 0, 0};
  const auto post = fit_laplace(spec, full_batch_map(spec, ds, 1.0, 600), ds, 1.0);
  PredictiveConfig cfg;
  cfg.samples = 200;
  cfg.seed = 12;
  Rng rng = make_stream(6, 0);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const Eigen::Vector2d x(standard_normal(rng), standard_normal(rng));
    const auto g = glm_predict(post, x, 1.0, 2.0, cfg);
    const auto b = bnn_predict(post, x, 1.0, 2.0, cfg);
    for (std::size_t s = 0; s < cfg.samples; ++s) worst = std::max(worst, std::abs(g.samples[s] - b.samples[s]));
  }
  o.check(worst <= 1e-12, fmt("max |GLM - BNN| %.1e", worst));

  for (const MlpSpec& s : {MlpSpec{2, 0, 0}, MlpSpec{2, 1, 4}}) {
    LaplacePosterior collapsed;
    collapsed.spec = s;
    collapsed.map = init_params(s, 3);
    collapsed.covariance = Eigen::MatrixXd::Zero(collapsed.map.size(), collapsed.map.size());
    collapsed.factor = covariance_factor(collapsed.covariance);
    PredictiveConfig map_cfg;
    map_cfg.mode = PredictiveMode::Map;
    const Eigen::Vector2d x(0.4, -0.3);
    const double map = predict_failure(collapsed, x, 0.5, 1.5, map_cfg).mean;
    double gap = 0.0;
    for (std::size_t S : {1u, 7u, 50u}) {
      PredictiveConfig c2;
      c2.samples = S;
      gap = std::max({gap, std::abs(glm_predict(collapsed, x, 0.5, 1.5, c2).mean - map),
                      std::abs(bnn_predict(collapsed, x, 0.5, 1.5, c2).mean - map)});
    }
    o.check(gap <= 1e-15, "Sigma=0 width " + std::to_string(s.hidden_width) + fmt(" gap %.1e", gap));
  }
  return o;
}

Outcome nuts_gaussians() {
  Outcome o;
  for (double rho : {0.0, 0.9}) {
    const Eigen::Matrix2d cov{{1.0, rho}, {rho, 1.0}};
    const Eigen::Matrix2d prec = cov.inverse();
    const LogDensityFn density = [prec](const Eigen::VectorXd& q, Eigen::VectorXd& grad) {
      grad = -prec * q;
      return -0.5 * q.dot(prec * q);
    };
    NutsConfig cfg;
    cfg.warmup = 1000;
    // a diagonal metric leaves rho = 0.9 at roughly 0.2 effective draws per draw
    cfg.draws = rho == 0.0 ? 1000 : 3000;
    cfg.target_accept = 0.8;
    cfg.seed = rho == 0.0 ? 1 : 2;
    const auto s = nuts_sample(density, Eigen::Vector2d::Zero(), cfg);
    bool moments = true;
    for (const auto& d : s.diagnostics) {
      moments = moments && std::abs(d.mean) < 3.0 * d.mcse && std::abs(d.sd * d.sd - 1.0) < 0.1;
    }
    const double r = correlation(s.pooled(0), s.pooled(1));
    const std::string tag = fmt("rho=%.1f", rho);
    o.check(moments, tag + " moments");
    o.check(std::abs(r - rho) <= 0.03, fmt("corr %.3f", r));
    o.check(s.max_rhat() < 1.01, fmt("rhat %.4f", s.max_rhat()));
    o.check(s.min_ess() > 1000.0, fmt("ess %.0f", s.min_ess()));
    o.check(s.divergences == 0, "divergences " + std::to_string(s.divergences));
  }
  return o;
}

Outcome recovery() {
  Outcome o;
  // Baseline: 20 replications of 500 records with a 0.25 inspection window.
  int covered = 0;
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<TestRecord> recs;
    const auto t = sample_weibull_times(0.5, 3.0, 2000, static_cast<std::uint64_t>(100 + rep));
    for (std::size_t i = 0; recs.size() < 500; ++i) {
      auto chunk = chunk_into_intervals("i" + std::to_string(i), t[i], CensorWindowSpec{0.25, 100.0});
      recs.insert(recs.end(), chunk.begin(), chunk.end());
    }
    recs.resize(500);  // the last item is cut short, so its final windows read as survived
    NutsConfig cfg;
    cfg.warmup = 1000;
    cfg.draws = 1000;
    cfg.seed = static_cast<std::uint64_t>(rep);
    const auto s = fit_baseline(IntervalDataset(std::move(recs), 0, true), {}, cfg);
    const auto k = s.pooled("k"), lambda = s.pooled("lambda");
    const bool ck = quantile_of(k, 0.05) <= 3.0 && 3.0 <= quantile_of(k, 0.95);
    const bool cl = quantile_of(lambda, 0.05) <= 0.5 && 0.5 <= quantile_of(lambda, 0.95);
    covered += ck && cl;
  }
  o.check(covered >= 16, "baseline 90% CI covers (0.5, 3.0) in " + std::to_string(covered) + "/20");

  // Linear-MVN on class-0 data: log-hazard scale is k * (-0.2, -0.15) . x on
  // the raw covariates, i.e. k * beta_f * sd_f per standardized feature.
  const auto raw = first_records(iwtest::class0_data(1000, 1.0, 0.5, 31), 3000);
  const auto scaler = fit_standardizer(raw);
  NutsConfig cfg;
  cfg.warmup = 1000;
  cfg.draws = 1000;
  cfg.seed = 31;
  const auto s = fit_linear_mvn(apply_standardizer(scaler, raw), cfg);
  const double beta[2] = {-0.2, -0.15};
  for (int f = 0; f < 2; ++f) {
    const double truth = kSynthetic2Shapes[0] * beta[f] * scaler.sd()[f];
    const auto draws = s.pooled("theta[" + std::to_string(f + 1) + "]");
    const double lo = quantile_of(draws, 0.05), hi = quantile_of(draws, 0.95);
    o.check(lo <= truth && truth <= hi,
            "theta" + std::to_string(f + 1) + fmt(" truth %.3f", truth) + fmt(" in [%.3f, %.3f]", lo, hi));
  }
  o.check(s.max_rhat() < 1.05, fmt("linear-mvn rhat %.3f", s.max_rhat()));
  return o;
}

Outcome spike_slab() {
  Outcome o;
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(10);
  theta[0] = 0.5;
  theta[3] = -0.5;
  theta[7] = 0.5;
  const auto raw = first_records(iwtest::linear_weibull_data(1500, theta, 0.5, 2.0, 0.5, 41), 3000);
  const auto ds = apply_standardizer(fit_standardizer(raw), raw);
  std::vector<double> pips[2];
  int m = 0;
  for (auto mode : {SpikeSlabMode::ContinuousNmig, SpikeSlabMode::DiscreteMarginalized}) {
    NutsConfig cfg;
    cfg.warmup = 1000;
    cfg.draws = 1000;
    cfg.seed = 41;
    const auto fit = fit_spike_slab(ds, SpikeSlabConfig{}, mode, cfg);
    bool active = true;
    int inactive_ok = 0;
    std::string list;
    for (Eigen::Index f = 0; f < 10; ++f) {
      const double p = fit.pip[static_cast<std::size_t>(f)];
      if (theta[f] != 0.0) active = active && p > 0.5;
      else inactive_ok += p < 0.5;
      list += fmt(f == 0 ? "%.2f" : ",%.2f", p);
    }
    const std::string tag = m == 0 ? "nmig" : "discrete";
    o.check(active && inactive_ok >= 6, tag + " pip [" + list + "] inactive<0.5 " + std::to_string(inactive_ok) + "/7");
    pips[m++] = fit.pip;
  }
  double gap = 0.0;
  for (std::size_t f = 0; f < 10; ++f) gap = std::max(gap, std::abs(pips[0][f] - pips[1][f]));
  o.check(gap <= 0.1, fmt("max mode gap %.3f", gap));
  return o;
}

Outcome metric_oracles() {
  Outcome o;
  double worst = 0.0;
  long sets = 0;
  iwtest::for_each_labeled_set({0.0, 0.25, 0.5, 0.75, 1.0}, 8, [&](const auto& s, const auto& y) {
    const bool pos = std::count(y.begin(), y.end(), 1) > 0, neg = std::count(y.begin(), y.end(), 0) > 0;
    const auto scored = make_scored(s, y);
    if (pos && neg) worst = std::max(worst, std::abs(roc_auc(scored) - iwtest::brute_roc_auc(s, y)));
    if (pos) worst = std::max(worst, std::abs(pr_auc(scored) - iwtest::brute_average_precision(s, y)));
    ++sets;
  });
  o.check(worst <= 1e-12, std::to_string(sets) + fmt(" labeled sets, max err %.1e", worst));

  const auto two = kaplan_meier(
      IntervalDataset({km_record("a", 0, 1, 1), km_record("b", 0, 1, 0), km_record("b", 1, 2, 1)}, 0, true));
  const auto none = kaplan_meier(IntervalDataset({km_record("a", 0, 1, 0), km_record("b", 0, 3, 0)}, 0, true));
  const auto cens = kaplan_meier(
      IntervalDataset({km_record("a", 0, 1, 1), km_record("b", 0, 1, 0), km_record("b", 1, 2, 0)}, 0, true));
  const bool km = two.at(0.5) == 1.0 && two.at(1.0) == 0.5 && two.at(2.0) == 0.0 && none.at(0.0) == 1.0 &&
                  none.at(5.0) == 1.0 && cens.at(1.0) == 0.5 && cens.at(2.0) == 0.5 && cens.at(10.0) == 0.5;
  o.check(km, "Kaplan-Meier worked examples");
  return o;
}

Outcome data_fidelity() {
  Outcome o;
  auto t = sample_weibull_times(0.5, 3.0, 100000, 42);
  std::sort(t.begin(), t.end());
  const auto n = static_cast<double>(t.size());
  double ks = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double F = -std::expm1(-std::pow(0.5 * t[i], 3.0));
    ks = std::max({ks, std::abs(F - static_cast<double>(i) / n), std::abs(static_cast<double>(i + 1) / n - F)});
  }
  o.check(ks < 0.01, fmt("KS %.4f", ks));

  using Tuple = std::tuple<double, double, int>;
  const CensorWindowSpec w{2.0, 100.0};
  const std::vector<std::pair<double, std::vector<Tuple>>> table{
      {3.0, {{0, 2, 0}, {2, 4, 1}}},
      {3.8, {{0, 2, 0}, {2, 4, 1}}},
      {7.0, {{0, 2, 0}, {2, 4, 0}, {4, 6, 0}, {6, 8, 1}}},
      {10.0, {{0, 2, 0}, {2, 4, 0}, {4, 6, 0}, {6, 8, 0}, {8, 10, 1}}},
  };
  std::size_t matched = 0, total = 0;
  for (const auto& [t_fail, expect] : table) {
    const auto got = chunk_into_intervals("x", t_fail, w);
    total += expect.size();
    if (got.size() != expect.size()) continue;
    for (std::size_t i = 0; i < got.size(); ++i) {
      matched += Tuple{got[i].t_agelt, got[i].t_age, got[i].y} == expect[i];
    }
  }
  o.check(matched == total, "window-2 chunking tuples " + std::to_string(matched) + "/" + std::to_string(total));

  double worst = 0.0;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto ds = generate_synthetic_1(make_banana(1000, 0.1, seed), kSynthetic1Classes, w, seed);
    worst = std::max(worst, std::abs(ds.failure_fraction() - 0.33));
    o.detail += fmt(seed == 1 ? "; synthetic-I failure fraction %.3f" : ", %.3f", ds.failure_fraction());
  }
  o.check(worst <= 0.05, "within 0.33 +- 0.05");
  return o;
}

struct CliRun {
  int code;
  std::string out;
};

CliRun cli_run(std::vector<std::string> args) {
  args.insert(args.begin(), "intervalweib");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str() + err.str()};
}

// Runs the full command pipeline into `dir`; returns false on any nonzero exit.
bool pipeline(const fs::path& dir, const std::string& hf_csv) {
  const auto d = dir.string();
  const std::vector<std::string> fast{"--set", "train.epochs=60", "--set", "predictive.samples=50", "--set",
                                      "nuts.warmup=300", "--set", "nuts.draws=300"};
  auto with = [&](std::vector<std::string> a) {
    a.insert(a.end(), fast.begin(), fast.end());
    return a;
  };
  bool ok = true;
  ok &= cli_run({"datagen", "--kind", "moons2", "--n", "200", "--seed", "5", "--out", d + "/data"}).code == 0;
  ok &= cli_run({"datagen", "--kind", "heartfailure", "--input", hf_csv, "--seed", "5", "--out", d + "/hf"}).code == 0;
  for (std::string model : {"baseline", "linear-mvn", "spike-slab-continuous", "spike-slab-discrete", "laplace-nn", "bnn"}) {
    ok &= cli_run(with({"fit", "--model", model, "--data", d + "/data/train.csv", "--seed", "5", "--out",
                        d + "/fit_" + model}))
              .code != 2;
    ok &= cli_run(with({"evaluate", "--artifact", d + "/fit_" + model + "/model.json", "--data", d + "/data/test.csv",
                        "--relative-to", d + "/fit_baseline/model.json", "--out", d + "/eval_" + model}))
              .code == 0;
    ok &= cli_run(with({"curves", "--artifact", d + "/fit_" + model + "/model.json", "--data", d + "/data/test.csv",
                        "--km", "--seed", "5", "--out", d + "/curves_" + model}))
              .code == 0;
  }
  ok &= cli_run(with({"gridsearch", "--data", d + "/data/train.csv", "--set", "grid.hidden_width=0,2", "--set",
                      "grid.precision=0.1,1", "--seed", "5", "--parallel", "--out", d + "/grid"}))
            .code == 0;
  return ok;
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = iwtest::read_file(e.path());
  }
  return files;
}

Outcome determinism() {
  Outcome o;
  const auto base = iwtest::scratch_dir("acceptance_determinism");
  const auto hf = (base / "heart_failure_clinical_records.csv").string();
  iwtest::write_heartfailure_surrogate(hf);
  const bool ok_a = pipeline(base / "a", hf);
  const bool ok_b = pipeline(base / "b", hf);
  o.check(ok_a && ok_b, "all commands ran");
  const auto a = snapshot(base / "a"), b = snapshot(base / "b");
  std::size_t same = 0;
  std::string differing;
  for (const auto& [name, bytes] : a) {
    const auto it = b.find(name);
    if (it != b.end() && it->second == bytes) ++same;
    else differing += " " + name;
  }
  o.check(same == a.size() && a.size() == b.size() && !a.empty(),
          std::to_string(same) + "/" + std::to_string(a.size()) + " artifacts byte-identical" + differing);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"benchmark direction (Banana 2, Moon 2)", benchmark_direction},
      {"linear model selected on heart-failure data", linear_selection},
      {"gradients match finite differences", gradients},
      {"GGN exact for linear predictors", ggn_exactness},
      {"GLM/BNN linearization identity", linearization},
      {"NUTS on 2-D Gaussians", nuts_gaussians},
      {"parameter recovery", recovery},
      {"spike-slab selection", spike_slab},
      {"metric oracles", metric_oracles},
      {"data generation fidelity", data_fidelity},
      {"end-to-end determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !o.pass;
    std::printf("criterion %zu %s: %s -- %s (%.1fs)\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
