#pragma once

// Experiment configuration and the drivers behind each CLI subcommand.
//
// A config is one JSON document. Dataset seeds, training seeds and
// optimizer seeds are all derived from the top-level seed, so --seed alone
// selects a run. Every driver reads its inputs from and writes its outputs
// to the run directory:
//
//   data/<name>.tnds, data/<name>.csv     generated datasets
//   models/tunenet.json (+ .meta.json)    TuneNet weights and metadata
//   models/direct.json (+ .meta.json)     direct-prediction baseline
//   models/tunenet_obs.json (+ .meta)     projected-observation variant
//   models/tunenet_task.json (+ .meta)    bounce-shot task model
//   *.csv, fig3.svg                       tables, traces and curves
//   manifest.json                         config hash, seed, outputs

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tunenet/baselines.hpp"
#include "tunenet/bounce_shot.hpp"
#include "tunenet/datasets.hpp"
#include "tunenet/eval.hpp"
#include "tunenet/nn.hpp"
#include "tunenet/tunenet.hpp"

namespace tunenet::eval {

struct TuneSettings {
  std::string dataset = "easy";
  std::size_t K = 5;
};

struct BaselineSettings {
  std::string dataset = "easy";
  std::vector<std::string> methods{"mean", "direct", "cmaes", "entsearch"};
  std::size_t budget = 100;
};

struct Table1Settings {
  /// Validation episodes come from this dataset's val split.
  std::string val_dataset = "train";
  std::string test_dataset = "test";
  std::size_t K = 9;
};

struct Table2Settings {
  std::vector<std::string> datasets{"easy", "hard"};
  std::vector<std::size_t> ks{1, 5, 10, 100};
  /// Largest rollout count on the exported curves.
  std::size_t curve_max = 100;
};

struct Table3Settings {
  std::string dataset = "easy";
  std::size_t K = 5;
  /// Optional projected-observation variant (dataset names; empty to skip).
  std::string obs_train;
  std::string obs_test;
};

struct TaskSettings {
  std::size_t trials = 50;
  Interval true_cor{0.3, 0.7};
  Interval drop_height{4.0, 5.0};
  std::size_t K = 5;
  double initial_cor = 0.0;
  shot::BounceShotSpec shot;
  /// Flight step of the held-out world.
  double world_step = 1.0 / 240.0;
  /// When set, `train` fits a separate model (tunenet_task) on this dataset
  /// and the task uses it. Empty uses the main model.
  std::string train_dataset;
  /// Output scale of that model; empty means the proposed-range width.
  std::vector<double> output_scale;
};

struct ExperimentConfig {
  std::string name = "experiment";
  Seed seed = 0;
  std::string run_dir;
  std::map<std::string, data::DatasetSpec> datasets;
  /// Dataset used for training.
  std::string train_dataset = "train";
  nn::TrainConfig training;
  std::vector<double> output_scale;
  Bounds bounds;
  bool train_direct = true;
  TuneSettings tune;
  BaselineSettings baseline;
  Table1Settings table1;
  Table2Settings table2;
  Table3Settings table3;
  TaskSettings task;
  baselines::CmaesOptions cmaes;
  baselines::EntropySearchOptions entropy_search;
  /// Document as loaded, with the seed override applied.
  nlohmann::json document;

  void validate() const;
  const data::DatasetSpec& dataset(const std::string& name) const;
};

/// Parses a config document. seed overrides the document's seed; run_dir
/// defaults to runs/<name>-seed<seed> relative to the working directory.
ExperimentConfig parse_config(const nlohmann::json& doc, std::optional<Seed> seed = {});
ExperimentConfig load_config(const std::string& path, std::optional<Seed> seed = {});

/// 64-bit FNV-1a of the text, as 16 hex digits.
std::string fnv1a_hex(const std::string& text);
/// Hash of the canonical (sorted-key) dump of the effective config.
std::string config_hash(const ExperimentConfig& cfg);

struct RunPaths {
  std::filesystem::path root;

  std::filesystem::path dataset(const std::string& name) const;
  std::filesystem::path model(const std::string& name) const;
  std::filesystem::path model_meta(const std::string& name) const;
  std::filesystem::path file(const std::string& name) const;
};

RunPaths run_paths(const ExperimentConfig& cfg);

/// Records (command, config hash, seed, outputs) in manifest.json.
void write_manifest(const ExperimentConfig& cfg, const std::string& command,
                    const std::vector<std::string>& outputs);

/// Files written by one driver, relative to the run directory.
using Outputs = std::vector<std::string>;

Outputs run_gen_data(const ExperimentConfig& cfg);
Outputs run_train(const ExperimentConfig& cfg);
Outputs run_tune(const ExperimentConfig& cfg);
Outputs run_baseline(const ExperimentConfig& cfg);
Outputs run_table1(const ExperimentConfig& cfg);
Outputs run_table2(const ExperimentConfig& cfg);
Outputs run_table3(const ExperimentConfig& cfg);
Outputs run_task(const ExperimentConfig& cfg);

// Lower-level pieces, exposed for tests and the Python binding.

struct TaskTrial {
  double true_cor = 0.0;
  double drop_height = 0.0;
  double tuned_cor = 0.0;
  double planned_height = 0.0;
  shot::ShotOutcome executed;
  double oracle_height = 0.0;
  shot::ShotOutcome oracle;
};

struct TaskResult {
  std::vector<TaskTrial> trials;
  double success_rate = 0.0;
  double oracle_success_rate = 0.0;
};

/// Held-out world for the bounce-shot task: semi-implicit Euler ball.
sim::Observation world_observation(double cor, double drop_height, const data::DatasetSpec& spec);

TaskResult sim2sim_task(const TuneNetModel& model, const data::DatasetSpec& spec,
                        const TaskSettings& settings, Seed seed);

}  // namespace tunenet::eval
