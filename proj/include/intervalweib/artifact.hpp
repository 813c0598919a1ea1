#pragma once

// Fitted-model artifacts (JSON) and a uniform predictor over them. Artifacts
// carry no timestamps so identical runs produce identical bytes.

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "intervalweib/dataset.hpp"
#include "intervalweib/laplace.hpp"
#include "intervalweib/mcmc_models.hpp"
#include "intervalweib/nn.hpp"
#include "intervalweib/nuts.hpp"

namespace intervalweib {

using Json = nlohmann::ordered_json;

enum class ModelKind { Baseline, LinearMvn, SpikeSlabContinuous, SpikeSlabDiscrete, LaplaceNn, Bnn };

inline const std::vector<std::pair<std::string, ModelKind>>& model_kinds() {
  static const std::vector<std::pair<std::string, ModelKind>> kinds{
      {"baseline", ModelKind::Baseline},
      {"linear-mvn", ModelKind::LinearMvn},
      {"spike-slab-continuous", ModelKind::SpikeSlabContinuous},
      {"spike-slab-discrete", ModelKind::SpikeSlabDiscrete},
      {"laplace-nn", ModelKind::LaplaceNn},
      {"bnn", ModelKind::Bnn}};
  return kinds;
}

inline std::string to_string(ModelKind kind) {
  for (const auto& [name, k] : model_kinds()) {
    if (k == kind) return name;
  }
  throw std::invalid_argument("unknown model kind");
}

inline ModelKind parse_model_kind(const std::string& name) {
  for (const auto& [n, k] : model_kinds()) {
    if (n == name) return k;
  }
  throw std::invalid_argument("unknown model kind '" + name + "'");
}

inline bool is_laplace(ModelKind kind) { return kind == ModelKind::LaplaceNn || kind == ModelKind::Bnn; }

namespace detail {

inline Json to_json(const Eigen::VectorXd& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

inline Eigen::VectorXd vector_from_json(const Json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// Row-major flattening.
inline Json matrix_to_json(const Eigen::MatrixXd& m) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) flat.push_back(m(i, j));
  }
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", flat}};
}

inline Eigen::MatrixXd matrix_from_json(const Json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto flat = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(flat.size()) != rows * cols) throw DataError("matrix has wrong number of entries");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = flat[static_cast<std::size_t>(i * cols + c)];
  }
  return m;
}

/// Non-finite diagnostics (degenerate parameters) are stored as null.
inline Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline double number_from(const Json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace detail

inline Json to_json(const PosteriorSamples& s) {
  Json chains = Json::array();
  for (const auto& c : s.chains) chains.push_back(detail::matrix_to_json(c));
  Json diags = Json::array();
  for (std::size_t j = 0; j < s.diagnostics.size(); ++j) {
    const auto& d = s.diagnostics[j];
    diags.push_back({{"name", s.names[j]},
                     {"mean", d.mean},
                     {"sd", d.sd},
                     {"rhat", detail::number_or_null(d.rhat)},
                     {"ess", detail::number_or_null(d.ess)},
                     {"mcse", detail::number_or_null(d.mcse)},
                     {"degenerate", d.degenerate}});
  }
  return Json{{"names", s.names},
              {"chains", chains},
              {"diagnostics", diags},
              {"divergences", s.divergences},
              {"warning", s.warning}};
}

inline PosteriorSamples samples_from_json(const Json& j) {
  PosteriorSamples s;
  s.names = j.at("names").get<std::vector<std::string>>();
  for (const auto& c : j.at("chains")) s.chains.push_back(detail::matrix_from_json(c));
  for (const auto& d : j.at("diagnostics")) {
    ParamDiagnostics p;
    p.mean = d.at("mean").get<double>();
    p.sd = d.at("sd").get<double>();
    p.rhat = detail::number_from(d.at("rhat"));
    p.ess = detail::number_from(d.at("ess"));
    p.mcse = detail::number_from(d.at("mcse"));
    p.degenerate = d.at("degenerate").get<bool>();
    s.diagnostics.push_back(p);
  }
  s.divergences = j.at("divergences").get<int>();
  s.warning = j.at("warning").get<std::string>();
  return s;
}

inline Json to_json(const NutsConfig& c) {
  return Json{{"chains", c.chains},         {"warmup", c.warmup},       {"draws", c.draws},
              {"target_accept", c.target_accept}, {"max_depth", c.max_depth}, {"seed", c.seed}};
}

inline Json to_json(const TrainConfig& c) {
  return Json{{"learning_rate", c.learning_rate}, {"batch_size", c.batch_size}, {"epochs", c.epochs},
              {"precision", c.precision},         {"coordinate_descent", c.coordinate_descent}, {"seed", c.seed}};
}

inline TrainConfig train_config_from_json(const Json& j) {
  TrainConfig c;
  c.learning_rate = j.at("learning_rate").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.epochs = j.at("epochs").get<int>();
  c.precision = j.at("precision").get<double>();
  c.coordinate_descent = j.at("coordinate_descent").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

/// Everything needed to score new data with a fitted model.
struct ModelArtifact {
  ModelKind kind = ModelKind::Baseline;
  Eigen::Index n_features = 0;
  Standardizer standardizer;
  ReliabilityPriors priors;

  // MCMC models
  std::optional<PosteriorSamples> samples;
  NutsConfig nuts;
  SpikeSlabConfig spike_slab;
  std::vector<double> pip;

  // Laplace models
  std::optional<LaplacePosterior> laplace;
  TrainConfig train;
  double final_objective = 0.0;
  std::vector<std::pair<double, double>> precision_evidence;
  PredictiveConfig predictive;
};

inline Json to_json(const ModelArtifact& a) {
  Json j;
  j["kind"] = to_string(a.kind);
  j["n_features"] = a.n_features;
  j["standardizer"] = {{"mean", detail::to_json(a.standardizer.mean())}, {"sd", detail::to_json(a.standardizer.sd())}};
  if (a.samples) {
    j["priors"] = {{"reliability_a", a.priors.reliability_a},
                   {"reliability_b", a.priors.reliability_b},
                   {"log_shape_mean", a.priors.log_shape_mean},
                   {"log_shape_sd", a.priors.log_shape_sd},
                   {"t_fix", a.priors.t_fix}};
    j["config"] = to_json(a.nuts);
    if (a.kind == ModelKind::SpikeSlabContinuous || a.kind == ModelKind::SpikeSlabDiscrete) {
      j["spike_slab"] = {{"spike_variance", a.spike_slab.spike_variance},
                         {"slab_variance", a.spike_slab.slab_variance},
                         {"inclusion_prob", a.spike_slab.inclusion_prob},
                         {"hypervariance", a.spike_slab.hypervariance},
                         {"hyper_shape", a.spike_slab.hyper_shape}};
      j["pip"] = a.pip;
    }
    j["samples"] = to_json(*a.samples);
  }
  if (a.laplace) {
    const auto& p = *a.laplace;
    j["spec"] = {{"input_dim", p.spec.input_dim}, {"hidden_layers", p.spec.hidden_layers},
                 {"hidden_width", p.spec.hidden_width}, {"activation", "tanh"}};
    j["training"] = to_json(a.train);
    j["final_objective"] = a.final_objective;
    j["predictive"] = {{"samples", a.predictive.samples}, {"seed", a.predictive.seed}};
    Json table = Json::array();
    for (const auto& [rho, ev] : a.precision_evidence) table.push_back({{"precision", rho}, {"log_evidence", ev}});
    j["precision_search"] = table;
    j["posterior"] = {{"phi", detail::to_json(p.map)},
                      {"covariance", detail::matrix_to_json(p.covariance)},
                      {"precision", p.precision},
                      {"log_likelihood", p.log_likelihood},
                      {"evidence", p.log_evidence},
                      {"projected_curvature", p.projected_curvature}};
  }
  return j;
}

inline ModelArtifact artifact_from_json(const Json& j) {
  ModelArtifact a;
  a.kind = parse_model_kind(j.at("kind").get<std::string>());
  a.n_features = j.at("n_features").get<Eigen::Index>();
  a.standardizer = Standardizer(detail::vector_from_json(j.at("standardizer").at("mean")),
                                detail::vector_from_json(j.at("standardizer").at("sd")));
  if (j.contains("samples")) {
    const auto& p = j.at("priors");
    a.priors.reliability_a = p.at("reliability_a").get<double>();
    a.priors.reliability_b = p.at("reliability_b").get<double>();
    a.priors.log_shape_mean = p.at("log_shape_mean").get<double>();
    a.priors.log_shape_sd = p.at("log_shape_sd").get<double>();
    a.priors.t_fix = p.at("t_fix").get<double>();
    const auto& c = j.at("config");
    a.nuts.chains = c.at("chains").get<int>();
    a.nuts.warmup = c.at("warmup").get<int>();
    a.nuts.draws = c.at("draws").get<int>();
    a.nuts.target_accept = c.at("target_accept").get<double>();
    a.nuts.max_depth = c.at("max_depth").get<int>();
    a.nuts.seed = c.at("seed").get<std::uint64_t>();
    if (j.contains("spike_slab")) {
      const auto& s = j.at("spike_slab");
      a.spike_slab.spike_variance = s.at("spike_variance").get<double>();
      a.spike_slab.slab_variance = s.at("slab_variance").get<double>();
      a.spike_slab.inclusion_prob = s.at("inclusion_prob").get<double>();
      a.spike_slab.hypervariance = s.at("hypervariance").get<bool>();
      a.spike_slab.hyper_shape = s.at("hyper_shape").get<double>();
      a.pip = j.at("pip").get<std::vector<double>>();
    }
    a.samples = samples_from_json(j.at("samples"));
  }
  if (j.contains("posterior")) {
    LaplacePosterior p;
    const auto& s = j.at("spec");
    p.spec.input_dim = s.at("input_dim").get<Eigen::Index>();
    p.spec.hidden_layers = s.at("hidden_layers").get<int>();
    p.spec.hidden_width = s.at("hidden_width").get<Eigen::Index>();
    p.spec.validate();
    a.train = train_config_from_json(j.at("training"));
    a.final_objective = j.at("final_objective").get<double>();
    a.predictive.samples = j.at("predictive").at("samples").get<std::size_t>();
    a.predictive.seed = j.at("predictive").at("seed").get<std::uint64_t>();
    a.predictive.mode = a.kind == ModelKind::Bnn ? PredictiveMode::Bnn : PredictiveMode::Glm;
    for (const auto& row : j.at("precision_search")) {
      a.precision_evidence.emplace_back(row.at("precision").get<double>(), row.at("log_evidence").get<double>());
    }
    const auto& post = j.at("posterior");
    p.map = detail::vector_from_json(post.at("phi"));
    p.covariance = detail::matrix_from_json(post.at("covariance"));
    p.precision = post.at("precision").get<double>();
    p.log_likelihood = post.at("log_likelihood").get<double>();
    p.log_evidence = post.at("evidence").get<double>();
    p.projected_curvature = post.at("projected_curvature").get<bool>();
    if (p.map.size() != p.spec.param_count()) throw DataError("artifact parameter vector does not match its spec");
    p.factor = covariance_factor(p.covariance);
    a.laplace = std::move(p);
  }
  if (!a.samples && !a.laplace) throw DataError("artifact holds neither samples nor a Laplace posterior");
  return a;
}

inline void write_artifact(const ModelArtifact& a, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write '" + path + "'");
  os << to_json(a).dump(1) << '\n';
}

inline ModelArtifact read_artifact(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open '" + path + "'");
  Json j;
  try {
    is >> j;
    return artifact_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed artifact '" + path + "': " + e.what());
  }
}

/// Posterior hazard draws for raw (unstandardized) covariates. Draw s of every
/// item comes from the same posterior sample, so item curves can be averaged
/// within a draw.
class Predictor {
 public:
  /// `max_draws` thins long MCMC runs evenly; 0 keeps every draw.
  explicit Predictor(const ModelArtifact& a, std::size_t max_draws = 0) : artifact_(&a) {
    if (a.laplace) {
      if (a.predictive.mode != PredictiveMode::Map) draws_ = posterior_draws(*a.laplace, a.predictive.samples, a.predictive.seed);
      return;
    }
    const auto& s = *a.samples;
    const auto R = s.pooled("R");
    const auto k = s.pooled("k");
    std::vector<std::size_t> keep(R.size());
    std::iota(keep.begin(), keep.end(), 0);
    if (max_draws > 0 && R.size() > max_draws) {
      keep.resize(max_draws);
      for (std::size_t i = 0; i < max_draws; ++i) keep[i] = i * R.size() / max_draws;
    }
    const Eigen::Index F = a.kind == ModelKind::Baseline ? 0 : a.n_features;
    theta_.resize(static_cast<Eigen::Index>(keep.size()), F);
    base_.resize(static_cast<Eigen::Index>(keep.size()));
    shape_.resize(static_cast<Eigen::Index>(keep.size()));
    std::vector<std::vector<double>> cols;
    for (Eigen::Index f = 0; f < F; ++f) cols.push_back(s.pooled("theta[" + std::to_string(f + 1) + "]"));
    for (std::size_t i = 0; i < keep.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      const std::size_t d = keep[i];
      for (Eigen::Index f = 0; f < F; ++f) theta_(r, f) = cols[static_cast<std::size_t>(f)][d];
      // exp(g) lambda^k = exp(g) (-ln R) / t_fix^k
      base_[r] = std::log(-std::log(R[d])) - k[d] * std::log(a.priors.t_fix);
      shape_[r] = k[d];
    }
  }

  std::size_t draw_count() const {
    if (artifact_->laplace) return artifact_->predictive.mode == PredictiveMode::Map ? 1 : draws_.size();
    return static_cast<std::size_t>(base_.size());
  }

  std::vector<HazardDraw> hazards(const Eigen::VectorXd& raw_x) const {
    if (raw_x.size() != artifact_->n_features) {
      throw DataError("dataset has " + std::to_string(raw_x.size()) + " features but the model expects " +
                      std::to_string(artifact_->n_features));
    }
    const Eigen::VectorXd x = artifact_->standardizer.transform(raw_x);
    if (artifact_->laplace) return predictive_hazards(*artifact_->laplace, x, draws_, artifact_->predictive.mode);
    std::vector<HazardDraw> out(static_cast<std::size_t>(base_.size()));
    const Eigen::VectorXd g = theta_.cols() > 0 ? Eigen::VectorXd(theta_ * x) : Eigen::VectorXd::Zero(base_.size());
    for (Eigen::Index s = 0; s < base_.size(); ++s) out[static_cast<std::size_t>(s)] = HazardDraw{g[s] + base_[s], shape_[s]};
    return out;
  }

  /// Posterior-predictive mean failure probability over (t1, t2].
  double failure_probability(const TestRecord& r) const {
    const auto hs = hazards(r.x);
    double sum = 0.0;
    for (const auto& h : hs) sum += h.failure_probability(r.t_agelt, r.t_age);
    return sum / static_cast<double>(hs.size());
  }

  std::vector<double> score(const IntervalDataset& ds) const {
    if (ds.n_features() != artifact_->n_features) {
      throw DataError("dataset has " + std::to_string(ds.n_features()) + " features but the model expects " +
                      std::to_string(artifact_->n_features));
    }
    std::vector<double> out;
    out.reserve(ds.size());
    for (const auto& r : ds.records()) out.push_back(failure_probability(r));
    return out;
  }

 private:
  const ModelArtifact* artifact_;
  std::vector<ParamVector> draws_;
  Eigen::MatrixXd theta_;
  Eigen::VectorXd base_;
  Eigen::VectorXd shape_;
};

}  // namespace intervalweib
