#pragma once

// Auto-generated paired-simulation datasets with known parameter residuals.
//
// File format (version 1), all integers little-endian:
//   bytes 0..3   magic "TNDS"
//   bytes 4..7   uint32 format version
//   bytes 8..15  uint64 length N of the JSON header
//   N bytes      UTF-8 JSON header: version, spec (including seed), split
//                counts, observation shapes and sample rates
//   payload      per sample (train, then val, then test), float32 LE:
//                zeta_p[param_dim], zeta_t[param_dim], drop_height,
//                o_p (channel-major), o_t (channel-major)
// Generated values are rounded to float32 when drawn, so a save/load round
// trip is bit-exact. delta is recomputed on load as zeta_t - zeta_p.

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "tunenet/sim.hpp"
#include "tunenet/tunenet.hpp"
#include "tunenet/types.hpp"

namespace tunenet::data {

enum class Scenario { ball, arm };
enum class ObservationKind { identity, projected };

std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& s);
std::string to_string(ObservationKind k);
ObservationKind observation_kind_from_string(const std::string& s);

struct DatasetSpec {
  Scenario scenario = Scenario::ball;
  std::size_t n_train = 0;
  std::size_t n_val = 0;
  std::size_t n_test = 0;
  Bounds proposed_range{{0.3, 0.7}};
  Bounds target_range{{0.3, 0.7}};
  Seed seed = 0;
  /// Frames per rollout (ball). Arm rollouts use trajectory.duration * rate.
  std::size_t frames = sim::kEpisodeFrames;
  double rate = sim::kFrameRate;
  /// Shared nuisance variable for ball pairs.
  Interval drop_height{4.0, 5.0};
  sim::TrajectorySpec trajectory;
  ObservationKind proposed_observation = ObservationKind::identity;
  ObservationKind target_observation = ObservationKind::identity;

  std::size_t param_dim() const { return proposed_range.size(); }
  std::size_t total() const { return n_train + n_val + n_test; }
  void validate() const;
};

struct PairSample {
  ParamVector zeta_p;
  ParamVector zeta_t;
  /// zeta_t - zeta_p, componentwise.
  ParamVector delta;
  /// Shared by both rollouts of the pair (ball only; 0 for the arm).
  double drop_height = 0.0;
  Seed camera_seed = 0;
  sim::Observation o_p;
  sim::Observation o_t;

  bool operator==(const PairSample& other) const;
};

struct Dataset {
  DatasetSpec spec;
  std::vector<PairSample> train;
  std::vector<PairSample> val;
  std::vector<PairSample> test;

  bool operator==(const Dataset& other) const;
};

/// Episode context needed to re-run a scenario for a given parameter vector.
struct Episode {
  double drop_height = 0.0;
  Seed camera_seed = 0;
};

/// Raw rollout of the scenario at zeta.
sim::Rollout scenario_rollout(const DatasetSpec& spec, const ParamVector& zeta,
                              const Episode& episode);

sim::Observation scenario_observation(const DatasetSpec& spec, const ParamVector& zeta,
                                      const Episode& episode, ObservationKind kind);

/// Proposed-model simulator for tuning one episode.
Simulator proposed_simulator(const DatasetSpec& spec, const Episode& episode);

/// Draws zeta_P and zeta_T independently and uniformly from their ranges,
/// one shared nuisance draw per pair, and renders both observations.
/// Sample i uses an RNG stream derived from (seed, i); output order never
/// depends on scheduling.
Dataset generate_pairs(const DatasetSpec& spec);

struct Histogram {
  Interval range;
  std::vector<std::size_t> counts;
  std::vector<double> density;
  std::size_t total = 0;

  double bin_width() const { return range.width() / static_cast<double>(counts.size()); }
};

/// Empirical density of the first residual component (of |delta| when
/// absolute is set) over the given range.
Histogram residual_histogram(const std::vector<PairSample>& samples, std::size_t bins,
                             Interval range, bool absolute = true);

/// Mean residual, componentwise.
ParamVector mean_residual(const std::vector<PairSample>& samples);

inline constexpr std::uint32_t kDatasetFormatVersion = 1;

void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);
void write_dataset(const Dataset& dataset, std::ostream& out);
Dataset read_dataset(std::istream& in);

/// One row per sample: split,index,drop_height,zeta_p*,zeta_t*,delta*.
/// With observations, a long-format block follows (split,index,side,
/// channel,frame,value).
void export_dataset_csv(const Dataset& dataset, std::ostream& out, bool with_observations = false);

}  // namespace tunenet::data
