#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "intervalweib/laplace.hpp"
#include "support.hpp"

using namespace intervalweib;

namespace {

IntervalDataset linear_data(std::size_t items, std::uint64_t seed) {
  const auto raw = iwtest::linear_weibull_data(items, Eigen::Vector2d(0.6, -0.4), 0.5, 2.0, 1.0, seed);
  return apply_standardizer(fit_standardizer(raw), raw);
}

ParamVector train(const MlpSpec& spec, const IntervalDataset& ds, double precision, int epochs = 1500) {
  TrainConfig cfg;
  cfg.precision = precision;
  cfg.epochs = epochs;
  cfg.batch_size = ds.size();
  cfg.learning_rate = 0.02;
  return map_train(spec, ds, cfg).phi;
}

LaplacePosterior degenerate(const MlpSpec& spec, const ParamVector& map) {
  LaplacePosterior p;
  p.spec = spec;
  p.map = map;
  p.covariance = Eigen::MatrixXd::Zero(map.size(), map.size());
  p.factor = covariance_factor(p.covariance);
  return p;
}

}  // namespace

TEST(LinkHessian, WorkedExample) {
  const auto H = link_hessian(0, 0.0, std::log(2.0), 0.0, 1.0);
  EXPECT_NEAR(H(0, 0), 4.0, 1e-14);
  EXPECT_TRUE(link_hessian(1, 0.3, 0.2, 1.5, 1.5).isZero(0.0));
  EXPECT_TRUE(link_hessian(0, 0.3, 0.2, 1.5, 1.5).isZero(0.0));
}

TEST(LinkHessian, MatchesFiniteDifferences) {
  Rng rng = make_stream(1, 0);
  for (int i = 0; i < 200; ++i) {
    const int y = uniform01(rng) < 0.5;
    const double eta = -1.5 + 2.0 * uniform01(rng), kappa = -0.6 + 1.4 * uniform01(rng);
    const double t1 = uniform01(rng) < 0.3 ? 0.0 : 2.0 * uniform01(rng);
    const double t2 = t1 + 0.1 + 1.5 * uniform01(rng);
    const auto H = link_hessian(y, eta, kappa, t1, t2);
    auto grad = [&](const Eigen::VectorXd& z) {
      const auto t = record_log_likelihood(y, 0.0, z[0], z[1], t1, t2);
      return Eigen::VectorXd(Eigen::Vector2d(t.d_eta, t.d_kappa));
    };
    const Eigen::MatrixXd numeric = -iwtest::fd_hessian(grad, Eigen::Vector2d(eta, kappa), 1e-4);
    EXPECT_LT((H - numeric).cwiseAbs().maxCoeff(), 1e-5) << i;
  }
}

TEST(LinkHessian, ProjectionIsPsd) {
  Eigen::Matrix2d m;
  m << 1.0, 2.0, 2.0, 1.0;  // eigenvalues 3, -1
  const auto p = project_psd(m);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(p);
  EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-14);
  EXPECT_NEAR(eig.eigenvalues().maxCoeff(), 3.0, 1e-12);
}

TEST(GgnCovariance, EmptyDatasetIsPriorCovariance) {
  const MlpSpec spec{3, 1, 4};
  const IntervalDataset empty({}, 3);
  const auto cov = ggn_covariance(spec, init_params(spec, 1), empty, 4.0);
  EXPECT_LT((cov - 0.25 * Eigen::MatrixXd::Identity(spec.param_count(), spec.param_count())).cwiseAbs().maxCoeff(),
            1e-15);
}

TEST(GgnCovariance, ExactForLinearPredictor) {
  const auto ds = linear_data(120, 2);
  ASSERT_GE(ds.size(), 200u);
  const MlpSpec spec{2, 0, 0};
  const double rho = 0.5;
  const auto phi = train(spec, ds, rho);
  const Eigen::MatrixXd precision = ggn_covariance(spec, phi, ds, rho, Curvature::Exact).inverse();
  auto grad = [&](const Eigen::VectorXd& p) { return Eigen::VectorXd(-log_posterior(spec, p, ds, rho).gradient); };
  const Eigen::MatrixXd hessian = iwtest::fd_hessian(grad, phi, 1e-5);
  for (Eigen::Index i = 0; i < hessian.rows(); ++i) {
    for (Eigen::Index j = 0; j < hessian.cols(); ++j) {
      const double scale = std::max(std::abs(hessian(i, j)), 1e-6 * hessian.cwiseAbs().maxCoeff());
      EXPECT_LT(std::abs(precision(i, j) - hessian(i, j)) / scale, 1e-4) << i << "," << j;
    }
  }
}

TEST(GgnCovariance, SymmetricCholeskyAndPriorLimit) {
  const auto ds = linear_data(80, 3);
  const MlpSpec spec{2, 1, 5};
  const auto phi = train(spec, ds, 0.1, 500);
  const auto post = fit_laplace(spec, phi, ds, 0.1);
  EXPECT_LT((post.covariance - post.covariance.transpose()).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((post.factor * post.factor.transpose() - post.covariance).cwiseAbs().maxCoeff(), 1e-10);
  const auto tight = ggn_covariance(spec, phi, ds, 1e12);
  EXPECT_LT(tight.operatorNorm(), 1e-11);
}

TEST(Evidence, FormulaExamples) {
  EXPECT_NEAR(log_marginal_likelihood(0.0, Eigen::MatrixXd::Identity(1, 1), 1), 0.5 * std::log(2 * std::numbers::pi),
              1e-15);
  EXPECT_NEAR(log_marginal_likelihood(0.918939, Eigen::MatrixXd::Identity(1, 1), 1) - 0.918939, 0.918939, 1e-6);
  EXPECT_NEAR(log_marginal_likelihood(-3.0, Eigen::MatrixXd::Identity(4, 4), 4), -3.0 + 2.0 * std::log(2 * std::numbers::pi),
              1e-14);
}

TEST(Evidence, ConjugateGaussianIsExact) {
  // y_i ~ N(theta, s2), theta ~ N(0, 1/rho)
  const std::vector<double> y{0.3, -1.2, 2.2, 0.7, 1.1};
  const double s2 = 0.8, rho = 0.5;
  const double n = static_cast<double>(y.size());
  double sum = 0.0;
  for (double v : y) sum += v;
  const double post_prec = rho + n / s2;
  const double theta = (sum / s2) / post_prec;
  double log_lik = 0.0;
  for (double v : y) log_lik += -0.5 * std::log(2 * std::numbers::pi * s2) - 0.5 * (v - theta) * (v - theta) / s2;
  const double log_joint = log_joint_normalized(log_lik, Eigen::VectorXd::Constant(1, theta), rho);
  const double laplace = log_marginal_likelihood(log_joint, Eigen::MatrixXd::Constant(1, 1, 1.0 / post_prec), 1);
  // exact: y ~ N(0, s2 I + 11^T / rho)
  const Eigen::MatrixXd C = s2 * Eigen::MatrixXd::Identity(5, 5) + Eigen::MatrixXd::Constant(5, 5, 1.0 / rho);
  const Eigen::Map<const Eigen::VectorXd> yv(y.data(), 5);
  Eigen::LLT<Eigen::MatrixXd> llt(C);
  const double logdet = 2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
  const double exact = -0.5 * (5 * std::log(2 * std::numbers::pi) + logdet + yv.dot(llt.solve(yv)));
  EXPECT_NEAR(laplace, exact, 1e-8);
}

TEST(TunePrecision, SingletonOrderAndUnimodal) {
  const auto ds = linear_data(300, 4);
  const MlpSpec spec{2, 0, 0};
  const auto phi = train(spec, ds, 1e-2, 800);
  const std::vector<double> one{0.3};
  EXPECT_EQ(tune_precision(spec, phi, ds, one).best, 0.3);
  std::vector<double> grid;
  for (int e = -4; e <= 3; ++e) grid.push_back(std::pow(10.0, e));
  std::vector<double> reversed(grid.rbegin(), grid.rend());
  const auto a = tune_precision(spec, phi, ds, grid);
  const auto b = tune_precision(spec, phi, ds, reversed);
  EXPECT_EQ(a.best, b.best);
  // no interior local minimum between two maxima: increases then decreases
  const auto& ev = a.evidence;
  std::size_t peak = 0;
  for (std::size_t i = 1; i < ev.size(); ++i) {
    if (ev[i].second > ev[peak].second) peak = i;
  }
  for (std::size_t i = 1; i <= peak; ++i) EXPECT_GE(ev[i].second, ev[i - 1].second);
  for (std::size_t i = peak + 1; i < ev.size(); ++i) EXPECT_LE(ev[i].second, ev[i - 1].second);
  EXPECT_THROW(tune_precision(spec, phi, ds, std::vector<double>{}), std::invalid_argument);
}

TEST(Evidence, PenalizesDuplicatedNoiseColumns) {
  const auto base = linear_data(300, 5);
  // Ten copies of one pure-noise column appended to every record.
  std::vector<TestRecord> noisy;
  for (std::size_t i = 0; i < base.size(); ++i) {
    Rng rng = make_stream(77, std::hash<std::string>{}(base[i].item_id));
    const double z = standard_normal(rng);
    TestRecord r = base[i];
    r.x.conservativeResize(12);
    r.x.tail(10).setConstant(z);
    noisy.push_back(r);
  }
  const IntervalDataset wide(noisy, 12, true);
  const double rho = 1.0;
  const MlpSpec s2{2, 0, 0}, s12{12, 0, 0};
  const auto ev2 = fit_laplace(s2, train(s2, base, rho, 800), base, rho).log_evidence;
  const auto ev12 = fit_laplace(s12, train(s12, wide, rho, 800), wide, rho).log_evidence;
  EXPECT_LT(ev12, ev2);
}

TEST(Predictive, DegenerateCollapsesToMap) {
  const MlpSpec spec{2, 1, 4};
  const auto phi = init_params(spec, 3);
  const auto post = degenerate(spec, phi);
  const Eigen::Vector2d x(0.4, -0.3);
  PredictiveConfig map_cfg;
  map_cfg.mode = PredictiveMode::Map;
  const double map = predict_failure(post, x, 0.5, 1.5, map_cfg).mean;
  for (std::size_t S : {1u, 7u, 50u}) {
    PredictiveConfig cfg;
    cfg.samples = S;
    EXPECT_DOUBLE_EQ(glm_predict(post, x, 0.5, 1.5, cfg).mean, map);
    EXPECT_DOUBLE_EQ(bnn_predict(post, x, 0.5, 1.5, cfg).mean, map);
  }
}

TEST(Predictive, LinearSpecGlmEqualsBnn) {
  const auto ds = linear_data(150, 6);
  const MlpSpec spec{2, 0, 0};
  const auto post = fit_laplace(spec, train(spec, ds, 1.0, 600), ds, 1.0);
  PredictiveConfig cfg;
  cfg.samples = 200;
  cfg.seed = 12;
  Rng rng = make_stream(6, 0);
  for (int i = 0; i < 20; ++i) {
    const Eigen::Vector2d x(standard_normal(rng), standard_normal(rng));
    const auto g = glm_predict(post, x, 1.0, 2.0, cfg);
    const auto b = bnn_predict(post, x, 1.0, 2.0, cfg);
    for (std::size_t s = 0; s < cfg.samples; ++s) EXPECT_NEAR(g.samples[s], b.samples[s], 1e-12);
  }
}

TEST(Predictive, RangeDeterminismAndMonteCarloConvergence) {
  const auto ds = linear_data(150, 7);
  const MlpSpec spec{2, 1, 6};
  const auto post = fit_laplace(spec, train(spec, ds, 1.0, 600), ds, 1.0);
  const Eigen::Vector2d x(0.2, 0.9);
  PredictiveConfig cfg;
  cfg.samples = 300;
  cfg.seed = 5;
  const auto a = bnn_predict(post, x, 0.0, 2.0, cfg);
  const auto b = bnn_predict(post, x, 0.0, 2.0, cfg);
  EXPECT_EQ(a.samples, b.samples);
  for (double p : a.samples) EXPECT_TRUE(p >= 0.0 && p <= 1.0);

  cfg.samples = 10000;
  const auto small = glm_predict(post, x, 0.0, 2.0, cfg);
  cfg.samples = 100000;
  cfg.seed = 6;
  const auto big = glm_predict(post, x, 0.0, 2.0, cfg);
  double var = 0.0;
  for (double p : big.samples) var += (p - big.mean) * (p - big.mean);
  var /= static_cast<double>(big.samples.size() - 1);
  const double se = std::sqrt(var / 10000.0 + var / 100000.0);
  EXPECT_LT(std::abs(small.mean - big.mean), 3.0 * se);
}
