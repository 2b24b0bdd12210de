#include <cstdio>
#include <fstream>
#include <set>

#include "tunenet/errors.hpp"
#include "tunenet/experiment.hpp"
#include "tunenet/json_io.hpp"

namespace tunenet {

void to_json(nlohmann::json& j, const Interval& v) { j = nlohmann::json::array({v.lo, v.hi}); }

void from_json(const nlohmann::json& j, Interval& v) {
  if (!j.is_array() || j.size() != 2) throw FormatError("interval must be a [lo, hi] pair");
  v.lo = j.at(0).get<double>();
  v.hi = j.at(1).get<double>();
}

}  // namespace tunenet

namespace tunenet::sim {

void to_json(nlohmann::json& j, const TrajectorySpec& v) {
  j = {{"duration", v.duration},
       {"center_x", v.center_x},
       {"center_y", v.center_y},
       {"radius", v.radius},
       {"angular_rate", v.angular_rate}};
}

void from_json(const nlohmann::json& j, TrajectorySpec& v) {
  v.duration = j.value("duration", v.duration);
  v.center_x = j.value("center_x", v.center_x);
  v.center_y = j.value("center_y", v.center_y);
  v.radius = j.value("radius", v.radius);
  v.angular_rate = j.value("angular_rate", v.angular_rate);
}

}  // namespace tunenet::sim

namespace tunenet::nn {

void to_json(nlohmann::json& j, const TrainConfig& v) {
  j = {{"epochs", v.epochs},
       {"batch_size", v.batch_size},
       {"learning_rate", v.learning_rate},
       {"l2_lambda", v.l2_lambda},
       {"lr_decay_fraction", v.lr_decay_fraction},
       {"lr_decay_period_epochs", v.lr_decay_period_epochs},
       {"seed", v.seed}};
}

void from_json(const nlohmann::json& j, TrainConfig& v) {
  v.epochs = j.value("epochs", v.epochs);
  v.batch_size = j.value("batch_size", v.batch_size);
  v.learning_rate = j.value("learning_rate", v.learning_rate);
  v.l2_lambda = j.value("l2_lambda", v.l2_lambda);
  v.lr_decay_fraction = j.value("lr_decay_fraction", v.lr_decay_fraction);
  v.lr_decay_period_epochs = j.value("lr_decay_period_epochs", v.lr_decay_period_epochs);
  v.seed = j.value("seed", v.seed);
}

}  // namespace tunenet::nn

namespace tunenet::data {

void to_json(nlohmann::json& j, const DatasetSpec& v) {
  j = {{"scenario", to_string(v.scenario)},
       {"n_train", v.n_train},
       {"n_val", v.n_val},
       {"n_test", v.n_test},
       {"proposed_range", v.proposed_range},
       {"target_range", v.target_range},
       {"seed", v.seed},
       {"frames", v.frames},
       {"rate", v.rate},
       {"drop_height", v.drop_height},
       {"trajectory", v.trajectory},
       {"proposed_observation", to_string(v.proposed_observation)},
       {"target_observation", to_string(v.target_observation)}};
}

void from_json(const nlohmann::json& j, DatasetSpec& v) {
  if (j.contains("scenario")) v.scenario = scenario_from_string(j.at("scenario").get<std::string>());
  v.n_train = j.value("n_train", v.n_train);
  v.n_val = j.value("n_val", v.n_val);
  v.n_test = j.value("n_test", v.n_test);
  if (j.contains("proposed_range")) v.proposed_range = j.at("proposed_range").get<Bounds>();
  if (j.contains("target_range")) v.target_range = j.at("target_range").get<Bounds>();
  v.seed = j.value("seed", v.seed);
  v.frames = j.value("frames", v.frames);
  v.rate = j.value("rate", v.rate);
  if (j.contains("drop_height")) v.drop_height = j.at("drop_height").get<Interval>();
  if (j.contains("trajectory")) v.trajectory = j.at("trajectory").get<sim::TrajectorySpec>();
  if (j.contains("proposed_observation")) {
    v.proposed_observation = observation_kind_from_string(j.at("proposed_observation").get<std::string>());
  }
  if (j.contains("target_observation")) {
    v.target_observation = observation_kind_from_string(j.at("target_observation").get<std::string>());
  }
}

}  // namespace tunenet::data

namespace tunenet::eval {

namespace {

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ParameterDomainError("config: " + where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ParameterDomainError("config: unknown key '" + key + "' in " + where);
  }
}

const std::set<std::string> kTopLevelKeys{
    "name",    "seed",   "run_dir", "datasets", "train_dataset", "training", "output_scale",
    "bounds",  "train_direct", "tune", "baseline", "table1", "table2", "table3",
    "task",    "cmaes",  "entropy_search"};

}  // namespace

std::string fnv1a_hex(const std::string& text) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(text)));
  return buf;
}

void ExperimentConfig::validate() const {
  if (datasets.empty()) throw ParameterDomainError("config: no datasets");
  for (const auto& [name, spec] : datasets) {
    try {
      spec.validate();
    } catch (const Error& e) {
      throw ParameterDomainError("config: dataset '" + name + "': " + e.what());
    }
  }
  training.validate();
  const auto& train = dataset(train_dataset);
  if (!output_scale.empty() && output_scale.size() != train.param_dim()) {
    throw ParameterDomainError("config: output_scale has wrong dimension");
  }
  for (double s : output_scale)
    if (!(s > 0.0)) throw ParameterDomainError("config: output_scale must be positive");
  if (bounds.size() != train.param_dim()) throw ParameterDomainError("config: bounds have wrong dimension");
  for (const auto& b : bounds)
    if (!(b.hi > b.lo)) throw ParameterDomainError("config: degenerate bounds");
  if (tune.K < 1 || table1.K < 1 || table3.K < 1 || task.K < 1) {
    throw ParameterDomainError("config: K must be >= 1");
  }
  for (auto k : table2.ks)
    if (k < 1) throw ParameterDomainError("config: table2 K values must be >= 1");
  if (task.trials < 1) throw ParameterDomainError("config: task needs at least one trial");
  if (!(task.world_step > 0.0)) throw ParameterDomainError("config: world_step must be positive");
  task.shot.validate();
  if (!task.train_dataset.empty()) {
    const auto& t = dataset(task.train_dataset);
    if (t.scenario != data::Scenario::ball) throw ParameterDomainError("config: task dataset must be a ball dataset");
    if (!task.output_scale.empty() && task.output_scale.size() != t.param_dim()) {
      throw ParameterDomainError("config: task output_scale has wrong dimension");
    }
    for (double s : task.output_scale)
      if (!(s > 0.0)) throw ParameterDomainError("config: task output_scale must be positive");
  }
  if (cmaes.population < 2 || !(cmaes.sigma0 > 0.0) || !(cmaes.tolerance >= 0.0)) {
    throw ParameterDomainError("config: invalid cmaes options");
  }
  if (entropy_search.bins < 2 || entropy_search.population < 1 || entropy_search.refit_every < 1) {
    throw ParameterDomainError("config: invalid entropy_search options");
  }
  for (const auto& m : baseline.methods) {
    if (m != "mean" && m != "direct" && m != "cmaes" && m != "entsearch") {
      throw ParameterDomainError("config: unknown baseline method '" + m + "'");
    }
  }
}

const data::DatasetSpec& ExperimentConfig::dataset(const std::string& n) const {
  const auto it = datasets.find(n);
  if (it == datasets.end()) throw ParameterDomainError("config: no dataset named '" + n + "'");
  return it->second;
}

ExperimentConfig parse_config(const nlohmann::json& input, std::optional<Seed> seed) {
  try {
    check_keys(input, kTopLevelKeys, "config");
    ExperimentConfig cfg;
    cfg.document = input;
    cfg.name = input.value("name", cfg.name);
    cfg.seed = seed ? *seed : input.value("seed", Seed{0});
    cfg.document["seed"] = cfg.seed;
    cfg.run_dir = input.value("run_dir", std::string());
    if (cfg.run_dir.empty()) cfg.run_dir = "runs/" + cfg.name + "-seed" + std::to_string(cfg.seed);

    if (!input.contains("datasets")) throw ParameterDomainError("config: missing 'datasets'");
    for (const auto& [name, entry] : input.at("datasets").items()) {
      if (entry.contains("seed")) {
        throw ParameterDomainError("config: dataset '" + name + "' sets a seed; seeds derive from the top-level seed");
      }
      data::DatasetSpec spec = entry.get<data::DatasetSpec>();
      spec.seed = mix_seed(cfg.seed, fnv1a(name));
      cfg.datasets.emplace(name, spec);
    }
    cfg.train_dataset = input.value("train_dataset", cfg.train_dataset);
    if (input.contains("training")) {
      if (input.at("training").contains("seed")) {
        throw ParameterDomainError("config: training seed derives from the top-level seed");
      }
      cfg.training = input.at("training").get<nn::TrainConfig>();
    }
    cfg.training.seed = mix_seed(cfg.seed, 101);
    const auto& train = cfg.dataset(cfg.train_dataset);
    cfg.output_scale = input.value("output_scale", std::vector<double>{});
    cfg.bounds = input.contains("bounds") ? input.at("bounds").get<Bounds>() : train.proposed_range;
    cfg.train_direct = input.value("train_direct", cfg.train_direct);

    if (input.contains("tune")) {
      const auto& j = input.at("tune");
      check_keys(j, {"dataset", "K"}, "tune");
      cfg.tune.dataset = j.value("dataset", cfg.tune.dataset);
      cfg.tune.K = j.value("K", cfg.tune.K);
    }
    if (input.contains("baseline")) {
      const auto& j = input.at("baseline");
      check_keys(j, {"dataset", "methods", "budget"}, "baseline");
      cfg.baseline.dataset = j.value("dataset", cfg.baseline.dataset);
      cfg.baseline.methods = j.value("methods", cfg.baseline.methods);
      cfg.baseline.budget = j.value("budget", cfg.baseline.budget);
    }
    if (input.contains("table1")) {
      const auto& j = input.at("table1");
      check_keys(j, {"val_dataset", "test_dataset", "K"}, "table1");
      cfg.table1.val_dataset = j.value("val_dataset", cfg.table1.val_dataset);
      cfg.table1.test_dataset = j.value("test_dataset", cfg.table1.test_dataset);
      cfg.table1.K = j.value("K", cfg.table1.K);
    }
    if (input.contains("table2")) {
      const auto& j = input.at("table2");
      check_keys(j, {"datasets", "K", "curve_max"}, "table2");
      cfg.table2.datasets = j.value("datasets", cfg.table2.datasets);
      cfg.table2.ks = j.value("K", cfg.table2.ks);
      cfg.table2.curve_max = j.value("curve_max", cfg.table2.curve_max);
    }
    if (input.contains("table3")) {
      const auto& j = input.at("table3");
      check_keys(j, {"dataset", "K", "obs_train", "obs_test"}, "table3");
      cfg.table3.dataset = j.value("dataset", cfg.table3.dataset);
      cfg.table3.K = j.value("K", cfg.table3.K);
      cfg.table3.obs_train = j.value("obs_train", cfg.table3.obs_train);
      cfg.table3.obs_test = j.value("obs_test", cfg.table3.obs_test);
    }
    if (input.contains("task")) {
      const auto& j = input.at("task");
      check_keys(j, {"trials", "true_cor", "drop_height", "K", "initial_cor", "world_step", "shot", "train_dataset",
                     "output_scale"},
                 "task");
      auto& t = cfg.task;
      t.trials = j.value("trials", t.trials);
      if (j.contains("true_cor")) t.true_cor = j.at("true_cor").get<Interval>();
      if (j.contains("drop_height")) t.drop_height = j.at("drop_height").get<Interval>();
      t.K = j.value("K", t.K);
      t.initial_cor = j.value("initial_cor", t.initial_cor);
      t.world_step = j.value("world_step", t.world_step);
      t.train_dataset = j.value("train_dataset", t.train_dataset);
      t.output_scale = j.value("output_scale", t.output_scale);
      if (j.contains("shot")) {
        const auto& s = j.at("shot");
        check_keys(s, {"incline_deg", "hoop_x", "hoop_y", "hoop_radius", "heights", "n_candidates", "ramp_length"},
                   "task.shot");
        if (s.contains("incline_deg")) t.shot.incline = s.at("incline_deg").get<double>() * 3.14159265358979323846 / 180.0;
        t.shot.hoop_x = s.value("hoop_x", t.shot.hoop_x);
        t.shot.hoop_y = s.value("hoop_y", t.shot.hoop_y);
        t.shot.hoop_radius = s.value("hoop_radius", t.shot.hoop_radius);
        if (s.contains("heights")) t.shot.heights = s.at("heights").get<Interval>();
        t.shot.n_candidates = s.value("n_candidates", t.shot.n_candidates);
        t.shot.ramp_length = s.value("ramp_length", t.shot.ramp_length);
      }
    }
    cfg.cmaes.bounds = cfg.bounds;
    if (input.contains("cmaes")) {
      const auto& j = input.at("cmaes");
      check_keys(j, {"population", "sigma0", "tolerance"}, "cmaes");
      cfg.cmaes.population = j.value("population", cfg.cmaes.population);
      cfg.cmaes.sigma0 = j.value("sigma0", cfg.cmaes.sigma0);
      cfg.cmaes.tolerance = j.value("tolerance", cfg.cmaes.tolerance);
    }
    cfg.entropy_search.bounds = cfg.bounds.front();
    if (input.contains("entropy_search")) {
      const auto& j = input.at("entropy_search");
      check_keys(j, {"bins", "population", "noise_variance", "length_scale_fraction", "refit_every", "fantasies",
                     "early_stop"},
                 "entropy_search");
      auto& e = cfg.entropy_search;
      e.bins = j.value("bins", e.bins);
      e.population = j.value("population", e.population);
      e.noise_variance = j.value("noise_variance", e.noise_variance);
      e.length_scale_fraction = j.value("length_scale_fraction", e.length_scale_fraction);
      e.refit_every = j.value("refit_every", e.refit_every);
      e.fantasies = j.value("fantasies", e.fantasies);
      e.early_stop = j.value("early_stop", e.early_stop);
    }
    cfg.validate();
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ParameterDomainError(std::string("config: ") + e.what());
  }
}

ExperimentConfig load_config(const std::string& path, std::optional<Seed> seed) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("config file not found: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParameterDomainError("config: cannot parse " + path + ": " + e.what());
  }
  return parse_config(doc, seed);
}

std::string config_hash(const ExperimentConfig& cfg) {
  nlohmann::json doc = cfg.document;
  doc.erase("run_dir");
  return fnv1a_hex(doc.dump());
}

std::filesystem::path RunPaths::dataset(const std::string& name) const { return root / "data" / (name + ".tnds"); }
std::filesystem::path RunPaths::model(const std::string& name) const { return root / "models" / (name + ".json"); }
std::filesystem::path RunPaths::model_meta(const std::string& name) const {
  return root / "models" / (name + ".meta.json");
}
std::filesystem::path RunPaths::file(const std::string& name) const { return root / name; }

RunPaths run_paths(const ExperimentConfig& cfg) { return {std::filesystem::path(cfg.run_dir)}; }

void write_manifest(const ExperimentConfig& cfg, const std::string& command,
                    const std::vector<std::string>& outputs) {
  const auto path = run_paths(cfg).file("manifest.json");
  std::filesystem::create_directories(path.parent_path());
  nlohmann::json manifest;
  if (std::ifstream in(path); in) {
    try {
      in >> manifest;
    } catch (const nlohmann::json::exception&) {
      manifest = nlohmann::json::object();
    }
  }
  manifest["format"] = "tunenet-run-manifest";
  manifest["version"] = 1;
  manifest["name"] = cfg.name;
  manifest["commands"][command] = {{"config_hash", config_hash(cfg)}, {"seed", cfg.seed}, {"outputs", outputs}};
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << manifest.dump(2) << '\n';
}

}  // namespace tunenet::eval
