#include "tunenet/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "parallel.hpp"
#include "tunenet/errors.hpp"
#include "tunenet/format.hpp"

namespace tunenet::eval {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t name_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct Writer {
  const ExperimentConfig& cfg;
  Outputs outputs;

  void text(const std::string& name, const std::string& contents) {
    const auto path = run_paths(cfg).file(name);
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path.string());
    out << contents;
    outputs.push_back(name);
  }
  template <class Fn>
  void csv(const std::string& name, Fn&& fn) {
    std::ostringstream os;
    fn(os);
    text(name, os.str());
  }
};

data::Dataset load(const ExperimentConfig& cfg, const std::string& name) {
  cfg.dataset(name);
  return data::load_dataset(run_paths(cfg).dataset(name).string());
}

TuneNetModel load_model(const ExperimentConfig& cfg, const std::string& name) {
  const auto p = run_paths(cfg);
  return load_tunenet(p.model(name).string(), p.model_meta(name).string());
}

baselines::DirectModel load_direct_model(const ExperimentConfig& cfg) {
  const auto p = run_paths(cfg);
  return baselines::load_direct(p.model("direct").string(), p.model_meta("direct").string());
}

data::Episode episode_of(const data::PairSample& s) { return {s.drop_height, s.camera_seed}; }

std::vector<ParamVector> targets_of(const std::vector<data::PairSample>& samples) {
  std::vector<ParamVector> t;
  for (const auto& s : samples) t.push_back(s.zeta_t);
  return t;
}

void require_nonempty(const std::vector<data::PairSample>& samples, const std::string& what) {
  if (samples.empty()) throw ParameterDomainError(what + " is empty");
}

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

// All tuning runs on one test episode.
struct EpisodeRuns {
  TuneResult tunenet;
  ParamVector direct;
  baselines::CmaesResult cmaes;
  baselines::EntropySearchResult entsearch;
};

struct MethodFlags {
  bool tunenet = true;
  bool direct = true;
  bool cmaes = true;
  bool entsearch = true;
};

std::vector<EpisodeRuns> run_episodes(const ExperimentConfig& cfg, const std::string& dataset_name,
                                      const data::Dataset& ds, const TuneNetModel& model,
                                      const baselines::DirectModel* direct, std::size_t tune_k,
                                      std::size_t budget, MethodFlags flags) {
  const auto& samples = ds.test;
  std::vector<EpisodeRuns> runs(samples.size());
  const auto discrepancy = baselines::normalized_mse(model.norm_t);
  const Seed base = mix_seed(cfg.seed, name_hash(dataset_name));
  detail::parallel_for(samples.size(), [&](std::size_t i) {
    const auto& s = samples[i];
    const Simulator sim = data::proposed_simulator(ds.spec, episode_of(s));
    auto& r = runs[i];
    if (flags.tunenet) r.tunenet = tune(s.o_t, sim, s.zeta_p, model, tune_k, cfg.bounds);
    if (flags.direct && direct) r.direct = baselines::direct_predict(*direct, s.o_t);
    if (flags.cmaes) {
      auto opts = cfg.cmaes;
      opts.seed = mix_seed(base, 2 * i);
      r.cmaes = baselines::cmaes_tune(s.o_t, sim, s.zeta_p, std::max(budget, opts.population), discrepancy, opts);
    }
    if (flags.entsearch) {
      auto opts = cfg.entropy_search;
      opts.seed = mix_seed(base, 2 * i + 1);
      r.entsearch = baselines::entropy_search_tune(s.o_t, sim, s.zeta_p, budget, discrepancy, opts);
    }
  });
  return runs;
}

// Estimate after n rollouts; n == 0 is the initial guess.
ParamVector cmaes_at(const baselines::CmaesResult& r, const ParamVector& initial, std::size_t n,
                     std::size_t population, std::size_t* rollouts) {
  const std::size_t g = std::min(n / population, r.trace.size());
  if (g == 0) {
    if (rollouts) *rollouts = 0;
    return initial;
  }
  if (rollouts) *rollouts = r.trace[g - 1].rollouts;
  return r.trace[g - 1].estimate;
}

ParamVector entsearch_at(const baselines::EntropySearchResult& r, const ParamVector& initial, std::size_t n,
                         std::size_t* rollouts) {
  const std::size_t k = std::min(n, r.trace.size());
  if (k == 0) {
    if (rollouts) *rollouts = 0;
    return initial;
  }
  if (rollouts) *rollouts = r.trace[k - 1].rollouts;
  return r.trace[k - 1].estimate;
}

}  // namespace

// ---------------------------------------------------------------------------

Outputs run_gen_data(const ExperimentConfig& cfg) {
  Writer w{cfg, {}};
  const auto paths = run_paths(cfg);
  std::filesystem::create_directories(paths.root / "data");
  std::ostringstream summary;
  summary << "dataset,split,count,mean_delta\n";
  for (const auto& [name, spec] : cfg.datasets) {
    const data::Dataset ds = data::generate_pairs(spec);
    data::save_dataset(ds, paths.dataset(name).string());
    w.outputs.push_back("data/" + name + ".tnds");
    w.csv("data/" + name + ".csv", [&](std::ostream& os) { data::export_dataset_csv(ds, os); });
    const std::pair<const char*, const std::vector<data::PairSample>*> splits[] = {
        {"train", &ds.train}, {"val", &ds.val}, {"test", &ds.test}};
    for (const auto& [split, samples] : splits) {
      summary << name << ',' << split << ',' << samples->size() << ','
              << (samples->empty() ? std::string() : cell(data::mean_residual(*samples)[0])) << '\n';
    }
  }
  w.text("datasets.csv", summary.str());
  write_manifest(cfg, "gen-data", w.outputs);
  return w.outputs;
}

Outputs run_train(const ExperimentConfig& cfg) {
  Writer w{cfg, {}};
  const auto paths = run_paths(cfg);
  std::filesystem::create_directories(paths.root / "models");
  const data::Dataset ds = load(cfg, cfg.train_dataset);
  require_nonempty(ds.train, "training split of '" + cfg.train_dataset + "'");

  std::ostringstream loss, summary;
  loss << "model,epoch,loss\n";
  summary << "model,dataset,val_residual_mae\n";
  auto train_named = [&](const std::string& model_name, const std::string& ds_name, const data::Dataset& data,
                         const std::vector<double>& scale) {
    const auto res = train_tunenet(data, cfg.training, scale);
    save_tunenet(res.model, paths.model(model_name).string(), paths.model_meta(model_name).string());
    w.outputs.push_back("models/" + model_name + ".json");
    w.outputs.push_back("models/" + model_name + ".meta.json");
    for (std::size_t e = 0; e < res.loss_history.size(); ++e) {
      loss << model_name << ',' << e << ',' << cell(res.loss_history[e]) << '\n';
    }
    summary << model_name << ',' << ds_name << ','
            << (data.val.empty() ? std::string() : cell(residual_mae(res.model, data))) << '\n';
  };
  train_named("tunenet", cfg.train_dataset, ds, cfg.output_scale);

  if (cfg.train_direct) {
    const auto direct = baselines::direct_predict_train(ds, cfg.training);
    baselines::save_direct(direct, paths.model("direct").string(), paths.model_meta("direct").string());
    w.outputs.push_back("models/direct.json");
    w.outputs.push_back("models/direct.meta.json");
    if (!ds.val.empty()) {
      std::vector<ParamVector> est;
      for (const auto& s : ds.val) est.push_back(baselines::direct_predict(direct, s.o_t));
      summary << "direct," << cfg.train_dataset << ',' << cell(parameter_mae(est, targets_of(ds.val))) << '\n';
    }
  }
  if (!cfg.table3.obs_train.empty()) {
    const data::Dataset obs = load(cfg, cfg.table3.obs_train);
    require_nonempty(obs.train, "training split of '" + cfg.table3.obs_train + "'");
    train_named("tunenet_obs", cfg.table3.obs_train, obs, cfg.output_scale);
  }
  if (!cfg.task.train_dataset.empty()) {
    const data::Dataset task = load(cfg, cfg.task.train_dataset);
    require_nonempty(task.train, "training split of '" + cfg.task.train_dataset + "'");
    train_named("tunenet_task", cfg.task.train_dataset, task, cfg.task.output_scale);
  }
  w.text("train_loss.csv", loss.str());
  w.text("train_summary.csv", summary.str());
  write_manifest(cfg, "train", w.outputs);
  return w.outputs;
}

Outputs run_tune(const ExperimentConfig& cfg) {
  Writer w{cfg, {}};
  const data::Dataset ds = load(cfg, cfg.tune.dataset);
  const TuneNetModel model = load_model(cfg, "tunenet");
  require_nonempty(ds.test, "test split of '" + cfg.tune.dataset + "'");
  const std::size_t K = cfg.tune.K;
  const auto runs = run_episodes(cfg, cfg.tune.dataset, ds, model, nullptr, K, 0,
                                 {true, false, false, false});
  std::vector<TracePoint> trace;
  std::vector<std::vector<ParamVector>> per_k(K + 1);
  for (std::size_t i = 0; i < runs.size(); ++i) {
    for (std::size_t k = 0; k <= K; ++k) {
      trace.push_back({"TuneNet", cfg.tune.dataset, i, k, k, runs[i].tunenet.estimates[k], ds.test[i].zeta_t, kNaN});
      per_k[k].push_back(runs[i].tunenet.estimates[k]);
    }
  }
  const auto targets = targets_of(ds.test);
  w.csv("tune_trace.csv", [&](std::ostream& os) { write_trace_csv(trace, os); });
  w.csv("tune_summary.csv", [&](std::ostream& os) {
    os << "dataset,iteration,rollouts,param_mae\n";
    for (std::size_t k = 0; k <= K; ++k) {
      os << cfg.tune.dataset << ',' << k << ',' << k << ',' << cell(parameter_mae(per_k[k], targets)) << '\n';
    }
  });
  write_manifest(cfg, "tune", w.outputs);
  return w.outputs;
}

Outputs run_baseline(const ExperimentConfig& cfg) {
  Writer w{cfg, {}};
  const auto& set = cfg.baseline;
  const data::Dataset ds = load(cfg, set.dataset);
  require_nonempty(ds.test, "test split of '" + set.dataset + "'");
  auto has = [&](const char* m) { return std::find(set.methods.begin(), set.methods.end(), m) != set.methods.end(); };

  // The discrepancy normalizer is TuneNet's, so the optimizers see the same
  // inputs the network does.
  const TuneNetModel model = load_model(cfg, "tunenet");
  std::optional<baselines::DirectModel> direct;
  if (has("direct")) direct = load_direct_model(cfg);
  const auto runs = run_episodes(cfg, set.dataset, ds, model, direct ? &*direct : nullptr, 1, set.budget,
                                 {false, has("direct"), has("cmaes"), has("entsearch")});
  const auto targets = targets_of(ds.test);
  std::vector<TracePoint> trace;
  std::vector<MetricsRow> rows;
  auto add_row = [&](const std::string& method, const std::vector<ParamVector>& est, std::size_t rollouts) {
    rows.push_back({method, set.dataset, set.budget, rollouts, parameter_mae(est, targets), kNaN, kNaN, kNaN});
  };
  if (has("mean")) {
    const ParamVector m = baselines::mean_baseline(targets);
    for (std::size_t i = 0; i < targets.size(); ++i) trace.push_back({"Mean", set.dataset, i, 0, 0, m, targets[i], kNaN});
    add_row("Mean", std::vector<ParamVector>(targets.size(), m), 0);
  }
  if (has("direct")) {
    std::vector<ParamVector> est;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      trace.push_back({"Direct Prediction", set.dataset, i, 0, 0, runs[i].direct, targets[i], kNaN});
      est.push_back(runs[i].direct);
    }
    add_row("Direct Prediction", est, 0);
  }
  if (has("cmaes")) {
    std::vector<ParamVector> est;
    std::size_t total = 0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const auto& r = runs[i].cmaes;
      for (std::size_t g = 0; g < r.trace.size(); ++g) {
        trace.push_back({"CMA-ES", set.dataset, i, g + 1, r.trace[g].rollouts, r.trace[g].estimate, targets[i],
                         r.trace[g].discrepancy});
      }
      est.push_back(r.best);
      total += r.rollouts;
    }
    add_row("CMA-ES", est, total / runs.size());
  }
  if (has("entsearch")) {
    std::vector<ParamVector> est;
    std::size_t total = 0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const auto& r = runs[i].entsearch;
      for (std::size_t s = 0; s < r.trace.size(); ++s) {
        trace.push_back({"EntSearch", set.dataset, i, s + 1, r.trace[s].rollouts, r.trace[s].estimate, targets[i],
                         r.trace[s].discrepancy});
      }
      est.push_back({r.estimate});
      total += r.rollouts;
    }
    add_row("EntSearch", est, total / runs.size());
  }
  w.csv("baseline_trace.csv", [&](std::ostream& os) { write_trace_csv(trace, os); });
  w.csv("baseline_summary.csv", [&](std::ostream& os) { write_metrics_csv(rows, os); });
  write_manifest(cfg, "baseline", w.outputs);
  return w.outputs;
}

Outputs run_table1(const ExperimentConfig& cfg) {
  Writer w{cfg, {}};
  const auto& set = cfg.table1;
  const data::Dataset val_ds = load(cfg, set.val_dataset);
  const data::Dataset test_ds = load(cfg, set.test_dataset);
  const TuneNetModel model = load_model(cfg, "tunenet");
  require_nonempty(val_ds.val, "validation split of '" + set.val_dataset + "'");
  require_nonempty(test_ds.test, "test split of '" + set.test_dataset + "'");

  auto tune_split = [&](const data::Dataset& ds, const std::vector<data::PairSample>& samples,
                        std::vector<TracePoint>& trace, const std::string& label) {
    std::vector<TuneResult> res(samples.size());
    detail::parallel_for(samples.size(), [&](std::size_t i) {
      const auto& s = samples[i];
      res[i] = tune(s.o_t, data::proposed_simulator(ds.spec, episode_of(s)), s.zeta_p, model, set.K, cfg.bounds);
    });
    std::vector<ParamVector> est;
    for (std::size_t i = 0; i < res.size(); ++i) {
      for (std::size_t k = 0; k <= set.K; ++k) {
        trace.push_back({"TuneNet", label, i, k, k, res[i].estimates[k], samples[i].zeta_t, kNaN});
      }
      est.push_back(res[i].final_estimate());
    }
    return est;
  };
  std::vector<TracePoint> trace;
  const std::string val_label = set.val_dataset + "_val";
  const std::string test_label = set.test_dataset + "_test";
  const auto val_targets = targets_of(val_ds.val);
  const auto test_targets = targets_of(test_ds.test);

  std::vector<MetricsRow> rows;
  auto add = [&](const std::string& method, const std::vector<ParamVector>& val_est,
                 const std::vector<ParamVector>& test_est, std::size_t rollouts) {
    rows.push_back({method, val_label, set.K, rollouts, parameter_mae(val_est, val_targets),
                    parameter_pct(val_est, val_targets), kNaN, kNaN});
    rows.push_back({method, test_label, set.K, rollouts, parameter_mae(test_est, test_targets),
                    parameter_pct(test_est, test_targets), kNaN, kNaN});
  };
  const auto& train_spec = cfg.dataset(cfg.train_dataset);
  ParamVector max_train;
  for (const auto& r : train_spec.proposed_range) max_train.push_back(r.hi);
  const ParamVector test_mean = baselines::mean_baseline(test_targets);
  add("Max of training range (" + fixed3(max_train[0]) + ")", std::vector<ParamVector>(val_targets.size(), max_train),
      std::vector<ParamVector>(test_targets.size(), max_train), 0);
  add("Mean of test range (" + fixed3(test_mean[0]) + ")", std::vector<ParamVector>(val_targets.size(), test_mean),
      std::vector<ParamVector>(test_targets.size(), test_mean), 0);
  const auto val_est = tune_split(val_ds, val_ds.val, trace, val_label);
  const auto test_est = tune_split(test_ds, test_ds.test, trace, test_label);
  add("TuneNet", val_est, test_est, set.K);

  w.csv("table1.csv", [&](std::ostream& os) { write_table1_csv(rows, val_label, test_label, os); });
  w.csv("table1_long.csv", [&](std::ostream& os) { write_metrics_csv(rows, os); });
  w.csv("table1_trace.csv", [&](std::ostream& os) { write_trace_csv(trace, os); });
  write_manifest(cfg, "table1", w.outputs);
  return w.outputs;
}

Outputs run_table2(const ExperimentConfig& cfg) {
  Writer w{cfg, {}};
  const auto& set = cfg.table2;
  const TuneNetModel model = load_model(cfg, "tunenet");
  const baselines::DirectModel direct = load_direct_model(cfg);
  std::size_t kmax = set.curve_max;
  for (auto k : set.ks) kmax = std::max(kmax, k);
  const std::size_t pop = cfg.cmaes.population;

  std::vector<MetricsRow> rows;
  std::vector<CurvePoint> curve;
  std::vector<TracePoint> trace;
  for (const auto& name : set.datasets) {
    const data::Dataset ds = load(cfg, name);
    require_nonempty(ds.test, "test split of '" + name + "'");
    const auto runs = run_episodes(cfg, name, ds, model, &direct, kmax, kmax, {});
    const auto targets = targets_of(ds.test);
    const std::size_t n = targets.size();
    const ParamVector mean = baselines::mean_baseline(targets);
    std::vector<ParamVector> direct_est;
    for (const auto& r : runs) direct_est.push_back(r.direct);

    auto estimates = [&](const std::string& method, std::size_t k, bool table_column, std::size_t* rollouts) {
      std::vector<ParamVector> est(n);
      std::size_t total = 0;
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t used = 0;
        const auto& init = ds.test[i].zeta_p;
        if (method == "Mean") est[i] = mean;
        else if (method == "Direct Prediction") est[i] = direct_est[i];
        else if (method == "TuneNet") {
          est[i] = runs[i].tunenet.estimates[k];
          used = k;
        } else if (method == "CMA-ES") {
          // A budget below one generation reports the first generation.
          est[i] = cmaes_at(runs[i].cmaes, init, table_column ? std::max(k, pop) : k, pop, &used);
        } else {
          est[i] = entsearch_at(runs[i].entsearch, init, k, &used);
        }
        total += used;
      }
      if (rollouts) *rollouts = total / n;
      return est;
    };

    const char* methods[] = {"Mean", "EntSearch", "CMA-ES", "Direct Prediction", "TuneNet"};
    for (const char* m : methods) {
      for (auto k : set.ks) {
        std::size_t rollouts = 0;
        const auto est = estimates(m, k, true, &rollouts);
        rows.push_back({m, name, k, rollouts, parameter_mae(est, targets), parameter_pct(est, targets), kNaN, kNaN});
      }
      for (std::size_t k = 0; k <= set.curve_max; ++k) {
        if (std::string(m) == "CMA-ES" && k % pop != 0) continue;
        curve.push_back({m, name, k, parameter_mae(estimates(m, k, false, nullptr), targets)});
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k <= kmax; ++k) {
        trace.push_back({"TuneNet", name, i, k, k, runs[i].tunenet.estimates[k], targets[i], kNaN});
      }
      const auto& c = runs[i].cmaes;
      for (std::size_t g = 0; g < c.trace.size(); ++g) {
        trace.push_back({"CMA-ES", name, i, g + 1, c.trace[g].rollouts, c.trace[g].estimate, targets[i],
                         c.trace[g].discrepancy});
      }
      const auto& e = runs[i].entsearch;
      for (std::size_t s = 0; s < e.trace.size(); ++s) {
        trace.push_back({"EntSearch", name, i, s + 1, e.trace[s].rollouts, e.trace[s].estimate, targets[i],
                         e.trace[s].discrepancy});
      }
    }
  }
  w.csv("table2.csv", [&](std::ostream& os) { write_table2_csv(rows, set.datasets, set.ks, os); });
  w.csv("table2_long.csv", [&](std::ostream& os) { write_metrics_csv(rows, os); });
  w.csv("table2_trace.csv", [&](std::ostream& os) { write_trace_csv(trace, os); });
  w.csv("fig3_curves.csv", [&](std::ostream& os) { write_curve_csv(curve, os); });
  w.csv("fig3.svg", [&](std::ostream& os) { write_curve_svg(curve, os); });
  write_manifest(cfg, "table2", w.outputs);
  return w.outputs;
}

Outputs run_table3(const ExperimentConfig& cfg) {
  Writer w{cfg, {}};
  const auto& set = cfg.table3;
  const data::Dataset ds = load(cfg, set.dataset);
  require_nonempty(ds.test, "test split of '" + set.dataset + "'");
  const TuneNetModel model = load_model(cfg, "tunenet");
  const baselines::DirectModel direct = load_direct_model(cfg);
  const std::size_t n = ds.test.size();

  struct Episode {
    TrajectoryError still, zero, untuned, direct, tuned;
    ParamVector direct_est, tuned_est;
  };
  std::vector<Episode> eps(n);
  detail::parallel_for(n, [&](std::size_t i) {
    const auto& s = ds.test[i];
    const auto ep = episode_of(s);
    const sim::Rollout target = data::scenario_rollout(ds.spec, s.zeta_t, ep);
    auto err_at = [&](const ParamVector& z) { return trajectory_error(data::scenario_rollout(ds.spec, z, ep), target); };
    auto& e = eps[i];
    ParamVector zero(s.zeta_p.size(), 0.0);
    sim::Rollout still = target;
    for (auto& f : still.frames) f = target.frames.front();
    e.still = trajectory_error(still, target);
    e.zero = err_at(zero);
    e.untuned = err_at(s.zeta_p);
    e.direct_est = baselines::direct_predict(direct, s.o_t);
    e.direct = err_at(e.direct_est);
    e.tuned_est = tune(s.o_t, data::proposed_simulator(ds.spec, ep), s.zeta_p, model, set.K, cfg.bounds).final_estimate();
    e.tuned = err_at(e.tuned_est);
  });

  std::vector<MetricsRow> rows;
  const auto targets = targets_of(ds.test);
  auto add = [&](const std::string& method, std::size_t k, std::size_t rollouts, auto member,
                 const std::vector<ParamVector>& est) {
    std::vector<TrajectoryError> errs;
    for (const auto& e : eps) errs.push_back(e.*member);
    const auto pooled = pool_errors(errs);
    rows.push_back({method, set.dataset, k, rollouts, parameter_mae(est, targets), parameter_pct(est, targets),
                    pooled.mae_cm, pooled.pct});
  };
  std::vector<ParamVector> zeros(n, ParamVector(targets.front().size(), 0.0)), untuned, direct_est, tuned_est;
  for (std::size_t i = 0; i < n; ++i) {
    untuned.push_back(ds.test[i].zeta_p);
    direct_est.push_back(eps[i].direct_est);
    tuned_est.push_back(eps[i].tuned_est);
  }
  // Zero prediction: the object never moves from where it starts.
  add("Zero (inelastic)", 0, 0, &Episode::still, zeros);
  add("Zero COR rollout", 0, 0, &Episode::zero, zeros);
  add("Un-Tuned Physics", 0, 0, &Episode::untuned, untuned);
  add("Direct Prediction", 0, 0, &Episode::direct, direct_est);

  if (!set.obs_test.empty()) {
    const data::Dataset obs = load(cfg, set.obs_test);
    require_nonempty(obs.test, "test split of '" + set.obs_test + "'");
    const TuneNetModel obs_model = load_model(cfg, "tunenet_obs");
    std::vector<TrajectoryError> errs(obs.test.size());
    std::vector<ParamVector> est(obs.test.size());
    detail::parallel_for(obs.test.size(), [&](std::size_t i) {
      const auto& s = obs.test[i];
      const auto ep = episode_of(s);
      est[i] = tune(s.o_t, data::proposed_simulator(obs.spec, ep), s.zeta_p, obs_model, set.K, cfg.bounds)
                   .final_estimate();
      errs[i] = trajectory_error(data::scenario_rollout(obs.spec, est[i], ep),
                                 data::scenario_rollout(obs.spec, s.zeta_t, ep));
    });
    const auto pooled = pool_errors(errs);
    const auto obs_targets = targets_of(obs.test);
    rows.push_back({"TuneNet (Obs)", set.obs_test, set.K, set.K, parameter_mae(est, obs_targets),
                    parameter_pct(est, obs_targets), pooled.mae_cm, pooled.pct});
  }
  add("TuneNet (GT)", set.K, set.K, &Episode::tuned, tuned_est);

  w.csv("table3.csv", [&](std::ostream& os) { write_table3_csv(rows, os); });
  w.csv("table3_long.csv", [&](std::ostream& os) { write_metrics_csv(rows, os); });
  write_manifest(cfg, "table3", w.outputs);
  return w.outputs;
}

// ---------------------------------------------------------------------------
// Sim-to-sim bounce shot

sim::Observation world_observation(double cor, double drop_height, const data::DatasetSpec& spec) {
  sim::BallOptions opts;
  opts.integrator = sim::BallIntegrator::semi_implicit_euler;
  return sim::observe_identity(sim::simulate_ball({cor, drop_height}, 1.0 / spec.rate, spec.frames, opts), spec.rate);
}

TaskResult sim2sim_task(const TuneNetModel& model, const data::DatasetSpec& spec, const TaskSettings& settings,
                        Seed seed) {
  if (spec.scenario != data::Scenario::ball) throw ParameterDomainError("bounce-shot task needs a ball model");
  settings.shot.validate();
  TaskResult res;
  res.trials.resize(settings.trials);
  detail::parallel_for(settings.trials, [&](std::size_t i) {
    std::mt19937_64 rng(mix_seed(seed, i));
    auto& t = res.trials[i];
    t.true_cor = std::uniform_real_distribution<double>(settings.true_cor.lo, settings.true_cor.hi)(rng);
    t.drop_height = std::uniform_real_distribution<double>(settings.drop_height.lo, settings.drop_height.hi)(rng);
    const sim::Observation o_t = world_observation(t.true_cor, t.drop_height, spec);
    const Simulator sim = data::proposed_simulator(spec, {t.drop_height, 0});
    const TuneResult tr = tune(o_t, sim, {settings.initial_cor}, model, settings.K, {{0.0, 1.0}});
    t.tuned_cor = tr.final_estimate()[0];
    const auto plan = shot::plan_bounce_shot(t.tuned_cor, settings.shot);
    t.planned_height = plan.height;
    t.executed = shot::simulate_shot(t.true_cor, plan.height, settings.shot, shot::FlightModel::semi_implicit_euler,
                                     settings.world_step);
    const auto oracle = shot::plan_bounce_shot(t.true_cor, settings.shot);
    t.oracle_height = oracle.height;
    t.oracle = shot::simulate_shot(t.true_cor, oracle.height, settings.shot, shot::FlightModel::semi_implicit_euler,
                                   settings.world_step);
  });
  std::size_t ok = 0, oracle_ok = 0;
  for (const auto& t : res.trials) {
    ok += t.executed.success;
    oracle_ok += t.oracle.success;
  }
  res.success_rate = static_cast<double>(ok) / static_cast<double>(settings.trials);
  res.oracle_success_rate = static_cast<double>(oracle_ok) / static_cast<double>(settings.trials);
  return res;
}

Outputs run_task(const ExperimentConfig& cfg) {
  Writer w{cfg, {}};
  const bool own = !cfg.task.train_dataset.empty();
  const TuneNetModel model = load_model(cfg, own ? "tunenet_task" : "tunenet");
  const auto& spec = cfg.dataset(own ? cfg.task.train_dataset : cfg.train_dataset);
  const auto res = sim2sim_task(model, spec, cfg.task, mix_seed(cfg.seed, 303));
  w.csv("task_trials.csv", [&](std::ostream& os) {
    os << "trial,true_cor,drop_height,tuned_cor,planned_height,miss,reached,success,oracle_height,oracle_miss,"
          "oracle_success\n";
    for (std::size_t i = 0; i < res.trials.size(); ++i) {
      const auto& t = res.trials[i];
      os << i << ',' << cell(t.true_cor) << ',' << cell(t.drop_height) << ',' << cell(t.tuned_cor) << ','
         << cell(t.planned_height) << ',' << cell(t.executed.miss) << ',' << t.executed.reached << ','
         << t.executed.success << ',' << cell(t.oracle_height) << ',' << cell(t.oracle.miss) << ','
         << t.oracle.success << '\n';
    }
  });
  w.csv("task_summary.csv", [&](std::ostream& os) {
    os << "method,trials,success_rate\n";
    os << "TuneNet (K=" << cfg.task.K << "),";
    os << res.trials.size() << ',' << cell(res.success_rate) << '\n';
    os << "Oracle COR," << res.trials.size() << ',' << cell(res.oracle_success_rate) << '\n';
  });
  write_manifest(cfg, "task", w.outputs);
  return w.outputs;
}

}  // namespace tunenet::eval
