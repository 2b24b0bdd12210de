#include "tunenet/tunenet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "tunenet/datasets.hpp"
#include "tunenet/errors.hpp"

namespace tunenet {

Normalizer Normalizer::fit(const std::vector<const sim::Observation*>& observations) {
  Normalizer norm;
  if (observations.empty()) return norm;
  const std::size_t n_channels = observations.front()->num_channels();
  norm.channels.assign(n_channels, {std::numeric_limits<double>::infinity(),
                                    -std::numeric_limits<double>::infinity()});
  for (const auto* obs : observations) {
    if (obs->num_channels() != n_channels) {
      throw DimensionError("Normalizer::fit: observations differ in channel count");
    }
    for (std::size_t c = 0; c < n_channels; ++c) {
      for (double v : obs->channels[c]) {
        norm.channels[c].lo = std::min(norm.channels[c].lo, v);
        norm.channels[c].hi = std::max(norm.channels[c].hi, v);
      }
    }
  }
  return norm;
}

std::vector<double> Normalizer::apply(const sim::Observation& obs) const {
  if (empty()) return obs.flatten();
  if (obs.num_channels() != channels.size()) {
    throw DimensionError("normalizer expects " + std::to_string(channels.size()) +
                         " channels, observation has " + std::to_string(obs.num_channels()));
  }
  std::vector<double> flat;
  flat.reserve(obs.flat_size());
  for (std::size_t c = 0; c < channels.size(); ++c) {
    const double lo = channels[c].lo;
    const double w = channels[c].width();
    for (double v : obs.channels[c]) flat.push_back(w > 0.0 ? (v - lo) / w : 0.0);
  }
  return flat;
}

TuneNetModel build_tunenet(ObservationShape p, ObservationShape t, std::size_t param_dim,
                           Seed seed) {
  if (p.flat_size() < 1 || t.flat_size() < 1 || param_dim < 1) {
    throw DimensionError("build_tunenet: dimensions must be >= 1");
  }
  std::mt19937_64 rng(seed);
  TuneNetModel model;
  model.shape_p = p;
  model.shape_t = t;
  const nn::BlockShape extractors[] = {{p.flat_size(), kFeatureSize}, {t.flat_size(), kFeatureSize}};
  model.net.layers.push_back(nn::init_block_layer(extractors, nn::Activation::relu, rng));
  const nn::BlockShape hidden{2 * kFeatureSize, kEstimatorHidden};
  model.net.layers.push_back(nn::init_block_layer(std::span(&hidden, 1), nn::Activation::relu, rng));
  const nn::BlockShape head{kEstimatorHidden, param_dim};
  model.net.layers.push_back(nn::init_block_layer(std::span(&head, 1), nn::Activation::tanh, rng));
  model.output_scale.assign(param_dim, 1.0);
  return model;
}

TuneNetModel build_tunenet(std::size_t obs_p_dim, std::size_t obs_t_dim, std::size_t param_dim,
                           Seed seed) {
  return build_tunenet(ObservationShape{0, obs_p_dim}, ObservationShape{0, obs_t_dim}, param_dim, seed);
}

namespace {

void check_shape(const ObservationShape& shape, const sim::Observation& obs, const char* side) {
  const bool ok = shape.channels == 0
                      ? obs.flat_size() == shape.length
                      : (obs.num_channels() == shape.channels && obs.length() == shape.length);
  if (!ok) {
    throw DimensionError(std::string("observation ") + side + " has shape " +
                         std::to_string(obs.num_channels()) + "x" + std::to_string(obs.length()) +
                         ", model expects " + std::to_string(shape.channels) + "x" +
                         std::to_string(shape.length));
  }
}

}  // namespace

Eigen::VectorXd pair_input(const TuneNetModel& model, const sim::Observation& o_p,
                           const sim::Observation& o_t) {
  check_shape(model.shape_p, o_p, "o_p");
  check_shape(model.shape_t, o_t, "o_t");
  const auto a = model.norm_p.apply(o_p);
  const auto b = model.norm_t.apply(o_t);
  Eigen::VectorXd x(static_cast<Eigen::Index>(a.size() + b.size()));
  std::copy(a.begin(), a.end(), x.data());
  std::copy(b.begin(), b.end(), x.data() + a.size());
  return x;
}

ParamVector predict_residual(const TuneNetModel& model, const sim::Observation& o_p,
                             const sim::Observation& o_t) {
  const Eigen::VectorXd out = nn::forward(model.net, pair_input(model, o_p, o_t));
  ParamVector delta(static_cast<std::size_t>(out.size()));
  for (std::size_t i = 0; i < delta.size(); ++i) {
    delta[i] = out[static_cast<Eigen::Index>(i)] * model.output_scale[i];
  }
  return delta;
}

TuneNetTrainResult train_tunenet(const data::Dataset& dataset, const nn::TrainConfig& cfg,
                                 std::vector<double> output_scale) {
  const auto& pairs = dataset.train;
  if (pairs.empty()) throw DimensionError("train_tunenet: empty training split");
  const std::size_t pdim = pairs.front().delta.size();
  if (output_scale.empty()) {
    for (const auto& r : dataset.spec.proposed_range) output_scale.push_back(r.width());
  }
  if (output_scale.size() != pdim) throw DimensionError("train_tunenet: output scale size mismatch");

  const ObservationShape sp{pairs.front().o_p.num_channels(), pairs.front().o_p.length()};
  const ObservationShape st{pairs.front().o_t.num_channels(), pairs.front().o_t.length()};
  TuneNetModel model = build_tunenet(sp, st, pdim, mix_seed(cfg.seed, 1));
  model.output_scale = output_scale;

  std::vector<const sim::Observation*> ps, ts;
  for (const auto& s : pairs) {
    ps.push_back(&s.o_p);
    ts.push_back(&s.o_t);
  }
  model.norm_p = Normalizer::fit(ps);
  model.norm_t = Normalizer::fit(ts);

  nn::RegressionData reg;
  const auto n = static_cast<Eigen::Index>(pairs.size());
  reg.inputs.resize(static_cast<Eigen::Index>(model.net.input_dim()), n);
  reg.targets.resize(static_cast<Eigen::Index>(pdim), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = pairs[static_cast<std::size_t>(i)];
    if (s.delta.size() != pdim) throw DimensionError("train_tunenet: pairs differ in parameter dim");
    reg.inputs.col(i) = pair_input(model, s.o_p, s.o_t);
    for (std::size_t d = 0; d < pdim; ++d) {
      reg.targets(static_cast<Eigen::Index>(d), i) = s.delta[d] / output_scale[d];
    }
  }

  auto trained = nn::train_sgd(std::move(model.net), reg, cfg);
  model.net = std::move(trained.model);
  return {std::move(model), std::move(trained.loss_history)};
}

double residual_mae(const TuneNetModel& model, const data::Dataset& dataset) {
  if (dataset.val.empty()) throw DimensionError("residual_mae: empty validation split");
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& s : dataset.val) {
    const auto d = predict_residual(model, s.o_p, s.o_t);
    for (std::size_t i = 0; i < d.size(); ++i) {
      total += std::abs(d[i] - s.delta[i]);
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

sim::Observation resample(const sim::Observation& obs, std::size_t L) {
  if (L < 2) throw DimensionError("resample: target length must be >= 2");
  obs.validate();
  const std::size_t n = obs.length();
  if (n == L) return obs;
  sim::Observation out;
  out.sample_rate = obs.sample_rate * static_cast<double>(L - 1) / static_cast<double>(n - 1);
  out.channels.reserve(obs.num_channels());
  for (const auto& ch : obs.channels) {
    std::vector<double> r(L);
    for (std::size_t j = 0; j < L; ++j) {
      const std::size_t num = j * (n - 1);
      const std::size_t i0 = num / (L - 1);
      const std::size_t rem = num % (L - 1);
      if (rem == 0) {
        r[j] = ch[i0];
      } else {
        const double frac = static_cast<double>(rem) / static_cast<double>(L - 1);
        r[j] = ch[i0] + frac * (ch[i0 + 1] - ch[i0]);
      }
    }
    out.channels.push_back(std::move(r));
  }
  return out;
}

TuneResult tune(const sim::Observation& o_t, const Simulator& simulator,
                const ParamVector& initial, const TuneNetModel& model, std::size_t K,
                const Bounds& bounds) {
  if (K < 1) throw ParameterDomainError("tune: K must be >= 1");
  if (initial.size() != model.param_dim()) throw DimensionError("tune: initial guess has wrong dimension");
  if (!bounds.empty() && bounds.size() != initial.size()) {
    throw DimensionError("tune: bounds have wrong dimension");
  }
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    if (!bounds[i].contains(initial[i])) throw ParameterDomainError("tune: initial guess outside bounds");
  }

  const std::size_t target_length = model.shape_t.channels == 0 ? o_t.length() : model.shape_t.length;
  const sim::Observation target =
      o_t.length() == target_length ? o_t : resample(o_t, target_length);

  TuneResult result;
  result.estimates.reserve(K + 1);
  result.estimates.push_back(initial);
  ParamVector zeta = initial;
  for (std::size_t k = 0; k < K; ++k) {
    sim::Observation o_p;
    try {
      o_p = simulator(zeta);
    } catch (const std::exception& e) {
      throw IndexedError(k, std::string("tune: simulator failed: ") + e.what());
    }
    ++result.rollouts_used;
    ParamVector delta = predict_residual(model, o_p, target);
    for (std::size_t i = 0; i < zeta.size(); ++i) {
      zeta[i] += delta[i];
      if (!bounds.empty()) zeta[i] = bounds[i].clamp(zeta[i]);
    }
    result.deltas.push_back(std::move(delta));
    result.estimates.push_back(zeta);
  }
  return result;
}

namespace {

nlohmann::json shape_json(const ObservationShape& s) {
  return {{"channels", s.channels}, {"length", s.length}};
}

ObservationShape shape_from(const nlohmann::json& j) {
  return {j.at("channels").get<std::size_t>(), j.at("length").get<std::size_t>()};
}

nlohmann::json norm_json(const Normalizer& n) {
  auto arr = nlohmann::json::array();
  for (const auto& c : n.channels) arr.push_back({c.lo, c.hi});
  return arr;
}

Normalizer norm_from(const nlohmann::json& j) {
  Normalizer n;
  for (const auto& c : j) n.channels.push_back({c.at(0).get<double>(), c.at(1).get<double>()});
  return n;
}

}  // namespace

void save_tunenet(const TuneNetModel& model, const std::string& weights_path,
                  const std::string& meta_path) {
  std::ofstream w(weights_path);
  if (!w) throw FormatError("cannot open " + weights_path + " for writing");
  nn::save_model(model.net, w);

  nlohmann::json meta;
  meta["format"] = "tunenet-meta";
  meta["version"] = 1;
  meta["shape_p"] = shape_json(model.shape_p);
  meta["shape_t"] = shape_json(model.shape_t);
  meta["norm_p"] = norm_json(model.norm_p);
  meta["norm_t"] = norm_json(model.norm_t);
  meta["output_scale"] = model.output_scale;
  meta["param_dim"] = model.param_dim();
  std::ofstream m(meta_path);
  if (!m) throw FormatError("cannot open " + meta_path + " for writing");
  m << meta.dump(2) << '\n';
}

TuneNetModel load_tunenet(const std::string& weights_path, const std::string& meta_path) {
  std::ifstream w(weights_path);
  if (!w) throw MissingArtifactError("missing model weights " + weights_path);
  std::ifstream m(meta_path);
  if (!m) throw MissingArtifactError("missing model metadata " + meta_path);
  TuneNetModel model;
  model.net = nn::load_model(w);
  try {
    nlohmann::json meta;
    m >> meta;
    if (meta.value("format", "") != "tunenet-meta" || meta.value("version", -1) != 1) {
      throw FormatError("unsupported model metadata in " + meta_path);
    }
    model.shape_p = shape_from(meta.at("shape_p"));
    model.shape_t = shape_from(meta.at("shape_t"));
    model.norm_p = norm_from(meta.at("norm_p"));
    model.norm_t = norm_from(meta.at("norm_t"));
    model.output_scale = meta.at("output_scale").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("corrupt model metadata: ") + e.what());
  }
  if (model.output_scale.size() != model.param_dim() ||
      model.net.input_dim() != model.shape_p.flat_size() + model.shape_t.flat_size()) {
    throw FormatError("model metadata does not match weights");
  }
  return model;
}

}  // namespace tunenet
