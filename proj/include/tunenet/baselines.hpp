#pragma once

// Comparison methods for residual tuning: constant-mean prediction, direct
// one-shot network prediction, CMA-ES, and greedy entropy search over a GP
// surrogate of the observation discrepancy.

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tunenet/gp.hpp"
#include "tunenet/nn.hpp"
#include "tunenet/sim.hpp"
#include "tunenet/tunenet.hpp"
#include "tunenet/types.hpp"

namespace tunenet::data {
struct Dataset;
}

namespace tunenet::baselines {

/// Per-iteration progress of an optimizer.
struct TraceRecord {
  std::size_t rollouts = 0;
  ParamVector estimate;
  double discrepancy = 0.0;
};

ParamVector mean_baseline(const std::vector<ParamVector>& targets);

// ---------------------------------------------------------------------------
// Direct prediction

struct DirectModel {
  nn::MlpModel net;
  ObservationShape shape;
  Normalizer norm;
  /// zeta = center + scale * tanh(...)
  std::vector<double> center;
  std::vector<double> scale;
};

/// Target-side extractor (32, ReLU) + estimator head (32 ReLU, tanh) trained
/// to regress zeta_T from o_T alone.
DirectModel direct_predict_train(const data::Dataset& dataset, const nn::TrainConfig& cfg);

/// Uses no simulator rollouts.
ParamVector direct_predict(const DirectModel& model, const sim::Observation& o_t);

void save_direct(const DirectModel& model, const std::string& weights_path,
                 const std::string& meta_path);
DirectModel load_direct(const std::string& weights_path, const std::string& meta_path);

// ---------------------------------------------------------------------------
// Discrepancy between a candidate observation and the target

using Discrepancy = std::function<double(const sim::Observation&, const sim::Observation&)>;

/// Mean squared difference of the two observations after normalization.
Discrepancy normalized_mse(Normalizer norm);

// ---------------------------------------------------------------------------
// CMA-ES

struct EsState {
  Eigen::VectorXd mean;
  double sigma = 0.3;
  Eigen::MatrixXd cov;
  Eigen::VectorXd path_sigma;
  Eigen::VectorXd path_c;
  std::size_t generation = 0;
  std::size_t population = 10;
};

struct CmaesOptions {
  std::size_t population = 10;
  /// Initial step size in bound-normalized coordinates.
  double sigma0 = 0.3;
  /// Stop once sigma * sqrt(max eigenvalue of C) drops below this.
  double tolerance = 0.1;
  Seed seed = 0;
  /// Search box; candidates are repaired by clamping. Coordinates are
  /// normalized by the box widths when present.
  Bounds bounds;
};

struct CmaesResult {
  ParamVector best;
  double best_value = 0.0;
  std::size_t rollouts = 0;
  std::size_t generations = 0;
  bool converged = false;
  /// Best-so-far after each generation.
  std::vector<TraceRecord> trace;
  /// Smallest eigenvalue of C after each generation.
  std::vector<double> min_eigenvalues;
  EsState final_state;
};

using Objective = std::function<double(const ParamVector&)>;

/// (mu/mu_w, lambda)-CMA-ES. Runs floor(budget / population) generations at
/// most; budget smaller than one generation throws ParameterDomainError.
CmaesResult cmaes_minimize(const Objective& f, const ParamVector& initial, std::size_t budget,
                           const CmaesOptions& options = {});

CmaesResult cmaes_tune(const sim::Observation& o_t, const Simulator& simulator,
                       const ParamVector& initial, std::size_t budget,
                       const Discrepancy& discrepancy, const CmaesOptions& options = {});

// ---------------------------------------------------------------------------
// Greedy entropy search

struct EntropySearchOptions {
  std::size_t bins = 50;
  std::size_t population = 100;
  Interval bounds{0.0, 1.0};
  /// Observation noise on the standardized discrepancy scale.
  double noise_variance = 1e-4;
  /// Initial length scale as a fraction of the interval width.
  double length_scale_fraction = 0.1;
  std::size_t refit_every = 5;
  /// Gauss-Hermite nodes used to average over fantasized observations.
  std::size_t fantasies = 5;
  bool early_stop = true;
  Seed seed = 0;
};

struct EntropySearchResult {
  double estimate = 0.0;
  std::size_t rollouts = 0;
  bool stopped_early = false;
  std::vector<TraceRecord> trace;
  /// Posterior variance at the observed points after the last update.
  std::vector<double> observed_variance;
  double noise_variance = 0.0;
  double jitter = 0.0;
};

/// First query is the initial guess; each later query is the grid bin whose
/// observation minimizes the expected entropy of the argmin distribution.
/// The estimate is the mode of that distribution. With early_stop, the run
/// ends once the estimate is unchanged for two consecutive steps.
EntropySearchResult entropy_search_minimize(const std::function<double(double)>& f, double initial,
                                            std::size_t budget,
                                            const EntropySearchOptions& options = {});

EntropySearchResult entropy_search_tune(const sim::Observation& o_t, const Simulator& simulator,
                                        const ParamVector& initial, std::size_t budget,
                                        const Discrepancy& discrepancy,
                                        const EntropySearchOptions& options = {});

/// Bin centers of the discretized interval.
std::vector<double> grid_centers(Interval range, std::size_t bins);

}  // namespace tunenet::baselines
