#pragma once

// Residual parameter estimator and the iterative tuning loop built on it.
//
// The network reads a proposed-model observation and a target observation
// through two independent ReLU feature extractors (32 outputs each),
// concatenates the features, and regresses the parameter difference
// zeta_T - zeta_P through a 64 -> 32 (ReLU) -> param_dim (tanh) estimator.
// The tanh output is scaled by a per-parameter output scale to physical
// units.

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "tunenet/nn.hpp"
#include "tunenet/sim.hpp"
#include "tunenet/types.hpp"

namespace tunenet {

namespace data {
struct Dataset;
}

inline constexpr std::size_t kFeatureSize = 32;
inline constexpr std::size_t kEstimatorHidden = 32;

/// Per-channel min/max scaling to [0, 1]. Degenerate channels map to 0.
/// An empty normalizer passes values through unchanged.
struct Normalizer {
  std::vector<Interval> channels;

  static Normalizer fit(const std::vector<const sim::Observation*>& observations);
  /// Normalized, channel-major flattened observation.
  std::vector<double> apply(const sim::Observation& obs) const;
  bool empty() const { return channels.empty(); }
};

/// Expected layout of one observation side. channels == 0 accepts any
/// observation whose flattened size matches flat_size().
struct ObservationShape {
  std::size_t channels = 0;
  std::size_t length = 0;

  std::size_t flat_size() const { return channels == 0 ? length : channels * length; }
};

struct TuneNetModel {
  nn::MlpModel net;
  ObservationShape shape_p;
  ObservationShape shape_t;
  Normalizer norm_p;
  Normalizer norm_t;
  /// Maps tanh outputs to physical parameter deltas.
  std::vector<double> output_scale;

  std::size_t param_dim() const { return net.output_dim(); }
};

TuneNetModel build_tunenet(std::size_t obs_p_dim, std::size_t obs_t_dim, std::size_t param_dim,
                           Seed seed);
TuneNetModel build_tunenet(ObservationShape p, ObservationShape t, std::size_t param_dim,
                           Seed seed);

/// Network input for one pair: [normalized o_p ; normalized o_t].
Eigen::VectorXd pair_input(const TuneNetModel& model, const sim::Observation& o_p,
                           const sim::Observation& o_t);

/// Estimated zeta_T - zeta_P in physical units.
ParamVector predict_residual(const TuneNetModel& model, const sim::Observation& o_p,
                             const sim::Observation& o_t);

struct TuneNetTrainResult {
  TuneNetModel model;
  std::vector<double> loss_history;
};

/// Fits normalizers on the training split, then regresses (delta / scale)
/// with nn::train_sgd. output_scale defaults to the width of the dataset's
/// proposed range per parameter.
TuneNetTrainResult train_tunenet(const data::Dataset& dataset, const nn::TrainConfig& cfg,
                                 std::vector<double> output_scale = {});

/// Mean absolute error of predicted residuals over the validation split.
double residual_mae(const TuneNetModel& model, const data::Dataset& dataset);

/// Proposed model: parameter vector -> observation of one rollout.
using Simulator = std::function<sim::Observation(const ParamVector&)>;

struct TuneResult {
  /// zeta_{P_0} .. zeta_{P_K}.
  std::vector<ParamVector> estimates;
  /// Predicted residual at each iteration (K entries).
  std::vector<ParamVector> deltas;
  std::size_t rollouts_used = 0;

  const ParamVector& final_estimate() const { return estimates.back(); }
};

/// Iterative residual tuning: per iteration, one proposed rollout, one
/// forward pass, and zeta <- clamp(zeta + delta, bounds). The target
/// observation is resampled to the model's target length once.
TuneResult tune(const sim::Observation& o_t, const Simulator& simulator,
                const ParamVector& initial, const TuneNetModel& model, std::size_t K,
                const Bounds& bounds);

/// Linear interpolation of each channel onto L uniformly spaced samples
/// spanning the original time extent. Endpoints are preserved exactly.
sim::Observation resample(const sim::Observation& obs, std::size_t L);

/// Weights go through nn::save_model; the sidecar holds shapes,
/// normalization ranges and the output scale.
void save_tunenet(const TuneNetModel& model, const std::string& weights_path,
                  const std::string& meta_path);
TuneNetModel load_tunenet(const std::string& weights_path, const std::string& meta_path);

}  // namespace tunenet
