#include <optional>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tunenet/baselines.hpp"
#include "tunenet/bounce_shot.hpp"
#include "tunenet/datasets.hpp"
#include "tunenet/errors.hpp"
#include "tunenet/eval.hpp"
#include "tunenet/experiment.hpp"
#include "tunenet/sim.hpp"
#include "tunenet/tunenet.hpp"

namespace py = pybind11;
using namespace tunenet;

namespace {

py::array_t<double> frames_array(const sim::Rollout& r) {
  py::array_t<double> a({r.size(), r.dim()});
  auto v = a.mutable_unchecked<2>();
  for (std::size_t t = 0; t < r.size(); ++t)
    for (std::size_t c = 0; c < r.dim(); ++c) v(t, c) = r.frames[t][c];
  return a;
}

sim::Rollout rollout_from(const py::array_t<double, py::array::c_style | py::array::forcecast>& a, double dt) {
  if (a.ndim() != 2) throw DimensionError("rollout array must be 2-D (frames x channels)");
  auto v = a.unchecked<2>();
  sim::Rollout r;
  r.dt = dt;
  r.frames.assign(static_cast<std::size_t>(v.shape(0)), std::vector<double>(static_cast<std::size_t>(v.shape(1))));
  for (py::ssize_t t = 0; t < v.shape(0); ++t)
    for (py::ssize_t c = 0; c < v.shape(1); ++c) r.frames[t][c] = v(t, c);
  return r;
}

py::array_t<double> channels_array(const sim::Observation& o) {
  py::array_t<double> a({o.num_channels(), o.length()});
  auto v = a.mutable_unchecked<2>();
  for (std::size_t c = 0; c < o.num_channels(); ++c)
    for (std::size_t t = 0; t < o.length(); ++t) v(c, t) = o.channels[c][t];
  return a;
}

const std::vector<data::PairSample>& split_of(const data::Dataset& ds, const std::string& split) {
  if (split == "train") return ds.train;
  if (split == "val") return ds.val;
  if (split == "test") return ds.test;
  throw ParameterDomainError("unknown split '" + split + "'");
}

using Driver = eval::Outputs (*)(const eval::ExperimentConfig&);

Driver driver_for(const std::string& name) {
  if (name == "gen-data") return eval::run_gen_data;
  if (name == "train") return eval::run_train;
  if (name == "tune") return eval::run_tune;
  if (name == "baseline") return eval::run_baseline;
  if (name == "table1") return eval::run_table1;
  if (name == "table2") return eval::run_table2;
  if (name == "table3") return eval::run_table3;
  if (name == "task") return eval::run_task;
  throw ParameterDomainError("unknown command '" + name + "'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Iterative residual tuning of simulator parameters";

  // Later registrations are tried first.
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });
  py::register_exception<MissingArtifactError>(m, "MissingArtifactError", PyExc_FileNotFoundError);

  py::class_<sim::BallParams>(m, "BallParams")
      .def(py::init([](double cor, double drop_height) { return sim::BallParams{cor, drop_height}; }),
           py::arg("cor") = 0.5, py::arg("drop_height") = 4.5)
      .def_readwrite("cor", &sim::BallParams::cor)
      .def_readwrite("drop_height", &sim::BallParams::drop_height);

  m.def(
      "simulate_ball",
      [](double cor, double drop_height, double dt, std::size_t n_frames, bool euler) {
        sim::BallOptions opt;
        if (euler) opt.integrator = sim::BallIntegrator::semi_implicit_euler;
        return frames_array(sim::simulate_ball({cor, drop_height}, dt, n_frames, opt));
      },
      py::arg("cor"), py::arg("drop_height") = 4.5, py::arg("dt") = 1.0 / sim::kFrameRate,
      py::arg("n_frames") = sim::kEpisodeFrames, py::arg("euler") = false,
      "Ball center positions, shape (n_frames, 3).");

  m.def(
      "simulate_arm",
      [](double payload_mass, double dt) { return frames_array(sim::simulate_arm({payload_mass}, {}, dt)); },
      py::arg("payload_mass"), py::arg("dt") = 1.0 / 30.0, "Joint torques, shape (n_frames, 2).");

  py::class_<eval::TrajectoryError>(m, "TrajectoryError")
      .def_readonly("mae_cm", &eval::TrajectoryError::mae_cm)
      .def_readonly("pct", &eval::TrajectoryError::pct)
      .def_readonly("normalizer_cm", &eval::TrajectoryError::normalizer_cm);

  m.def(
      "trajectory_error",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& proposed,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& target, double dt) {
        return eval::trajectory_error(rollout_from(proposed, dt), rollout_from(target, dt));
      },
      py::arg("proposed"), py::arg("target"), py::arg("dt") = 1.0 / sim::kFrameRate);

  py::class_<data::DatasetSpec>(m, "DatasetSpec")
      .def(py::init<>())
      .def_property(
          "scenario", [](const data::DatasetSpec& s) { return data::to_string(s.scenario); },
          [](data::DatasetSpec& s, const std::string& v) { s.scenario = data::scenario_from_string(v); })
      .def_readwrite("n_train", &data::DatasetSpec::n_train)
      .def_readwrite("n_val", &data::DatasetSpec::n_val)
      .def_readwrite("n_test", &data::DatasetSpec::n_test)
      .def_readwrite("seed", &data::DatasetSpec::seed)
      .def_readwrite("frames", &data::DatasetSpec::frames)
      .def_readwrite("rate", &data::DatasetSpec::rate)
      .def_property(
          "proposed_range",
          [](const data::DatasetSpec& s) { return std::make_pair(s.proposed_range[0].lo, s.proposed_range[0].hi); },
          [](data::DatasetSpec& s, std::pair<double, double> r) { s.proposed_range = {{r.first, r.second}}; })
      .def_property(
          "target_range",
          [](const data::DatasetSpec& s) { return std::make_pair(s.target_range[0].lo, s.target_range[0].hi); },
          [](data::DatasetSpec& s, std::pair<double, double> r) { s.target_range = {{r.first, r.second}}; });

  py::class_<data::Dataset>(m, "Dataset")
      .def_readonly("spec", &data::Dataset::spec)
      .def("size", [](const data::Dataset& d, const std::string& split) { return split_of(d, split).size(); },
           py::arg("split"))
      .def(
          "residuals",
          [](const data::Dataset& d, const std::string& split) {
            std::vector<double> out;
            for (const auto& s : split_of(d, split)) out.push_back(s.delta[0]);
            return py::array_t<double>(static_cast<py::ssize_t>(out.size()), out.data());
          },
          py::arg("split"))
      .def(
          "observations",
          [](const data::Dataset& d, const std::string& split, std::size_t i) {
            const auto& s = split_of(d, split).at(i);
            return py::make_tuple(channels_array(s.o_p), channels_array(s.o_t));
          },
          py::arg("split"), py::arg("index"))
      .def(
          "parameters",
          [](const data::Dataset& d, const std::string& split, std::size_t i) {
            const auto& s = split_of(d, split).at(i);
            return py::make_tuple(s.zeta_p, s.zeta_t);
          },
          py::arg("split"), py::arg("index"));

  m.def("generate_pairs", &data::generate_pairs, py::arg("spec"));
  m.def("save_dataset", &data::save_dataset, py::arg("dataset"), py::arg("path"));
  m.def("load_dataset", &data::load_dataset, py::arg("path"));

  py::class_<TuneNetModel>(m, "TuneNetModel")
      .def_property_readonly("param_dim", &TuneNetModel::param_dim)
      .def_readonly("output_scale", &TuneNetModel::output_scale)
      .def("residual_mae", [](const TuneNetModel& model, const data::Dataset& d) { return residual_mae(model, d); })
      .def("save", [](const TuneNetModel& model, const std::string& w, const std::string& meta) {
        save_tunenet(model, w, meta);
      });

  m.def(
      "train_tunenet",
      [](const data::Dataset& d, std::size_t epochs, double learning_rate, Seed seed) {
        nn::TrainConfig cfg;
        cfg.epochs = epochs;
        cfg.learning_rate = learning_rate;
        cfg.seed = seed;
        auto res = train_tunenet(d, cfg);
        return py::make_tuple(res.model, res.loss_history);
      },
      py::arg("dataset"), py::arg("epochs") = 200, py::arg("learning_rate") = 1e-2, py::arg("seed") = 0,
      "Returns (model, per-epoch loss).");
  m.def("load_tunenet", &load_tunenet, py::arg("weights_path"), py::arg("meta_path"));

  py::class_<TuneResult>(m, "TuneResult")
      .def_readonly("estimates", &TuneResult::estimates)
      .def_readonly("deltas", &TuneResult::deltas)
      .def_readonly("rollouts_used", &TuneResult::rollouts_used)
      .def_property_readonly("final_estimate", &TuneResult::final_estimate);

  m.def(
      "tune_episode",
      [](const TuneNetModel& model, const data::Dataset& d, const std::string& split, std::size_t index,
         std::size_t K, std::optional<std::pair<double, double>> bounds) {
        const auto& s = split_of(d, split).at(index);
        const Bounds b = bounds ? Bounds{{bounds->first, bounds->second}} : Bounds{};
        return tune(s.o_t, data::proposed_simulator(d.spec, {s.drop_height, s.camera_seed}), s.zeta_p, model, K, b);
      },
      py::arg("model"), py::arg("dataset"), py::arg("split"), py::arg("index"), py::arg("K"),
      py::arg("bounds") = std::nullopt, "Tunes one stored episode starting from its proposed parameters.");

  m.def(
      "cmaes_minimize",
      [](const std::function<double(const std::vector<double>&)>& f, const std::vector<double>& initial,
         std::size_t budget, Seed seed) {
        baselines::CmaesOptions opt;
        opt.seed = seed;
        const auto r = baselines::cmaes_minimize(f, initial, budget, opt);
        return py::make_tuple(r.best, r.best_value, r.rollouts);
      },
      py::arg("f"), py::arg("initial"), py::arg("budget"), py::arg("seed") = 0,
      "Returns (best, best_value, rollouts).");

  m.def(
      "perfect_shot_height", [](double cor) { return shot::perfect_shot_height(cor, {}); }, py::arg("cor"));
  m.def(
      "plan_bounce_shot",
      [](double cor) {
        const auto p = shot::plan_bounce_shot(cor, {});
        return py::make_tuple(p.height, p.predicted.miss, p.reached);
      },
      py::arg("cor"), "Returns (height, predicted miss, reached).");

  m.def(
      "run_command",
      [](const std::string& command, const std::string& config_path, std::optional<Seed> seed,
         std::optional<std::string> run_dir) {
        const Driver run = driver_for(command);
        auto cfg = eval::load_config(config_path, seed);
        if (run_dir) cfg.run_dir = *run_dir;
        py::gil_scoped_release release;
        return run(cfg);
      },
      py::arg("command"), py::arg("config"), py::arg("seed") = std::nullopt, py::arg("run_dir") = std::nullopt,
      "Runs one CLI subcommand; returns the files written relative to the run directory.");
}
