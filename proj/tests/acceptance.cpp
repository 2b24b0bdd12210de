// Acceptance run: one PASS/FAIL line per criterion. Usage:
//   tunenet_acceptance <work-dir>
// Runs the shipped ball and arm configs twice under <work-dir> and checks the
// resulting tables. Exits non-zero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "tunenet/baselines.hpp"
#include "tunenet/datasets.hpp"
#include "tunenet/experiment.hpp"
#include "tunenet/nn.hpp"
#include "tunenet/sim.hpp"
#include "tunenet/tunenet.hpp"

namespace fs = std::filesystem;
using namespace tunenet;

namespace {

const std::string kSource = TUNENET_SOURCE_DIR;

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
  std::printf("criterion %2d: %s  %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// Long-format CSV lookup

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  static Table read(const fs::path& p) {
    Table t;
    std::ifstream in(p);
    if (!in) throw std::runtime_error("missing " + p.string());
    std::string line;
    std::getline(in, line);
    t.header = split_csv(line);
    while (std::getline(in, line))
      if (!line.empty()) t.rows.push_back(split_csv(line));
    return t;
  }

  std::size_t col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw std::runtime_error("no column " + name);
  }

  // Value of `field` in the first row whose columns match every key.
  double get(const std::map<std::string, std::string>& keys, const std::string& field) const {
    for (const auto& r : rows) {
      bool match = true;
      for (const auto& [k, v] : keys) match = match && r[col(k)] == v;
      if (match) return std::stod(r[col(field)]);
    }
    std::string what = "no row for";
    for (const auto& [k, v] : keys) what += " " + k + "=" + v;
    throw std::runtime_error(what);
  }
};

// ---------------------------------------------------------------------------
// Criteria that need no experiment run

void gradient_check() {
  const nn::Activation kinds[] = {nn::Activation::relu, nn::Activation::tanh, nn::Activation::identity};
  double worst = 0.0;
  for (Seed seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(mix_seed(seed, 77));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_int_distribution<std::size_t> width(1, 6);
    const std::size_t depth = 1 + seed % 3;
    std::vector<std::size_t> dims{width(rng)};
    std::vector<nn::Activation> acts;
    for (std::size_t l = 0; l < depth; ++l) {
      dims.push_back(width(rng));
      acts.push_back(kinds[(seed + l) % 3]);
    }
    const nn::MlpModel m = nn::init_model(dims, acts, seed);
    Eigen::VectorXd x(static_cast<Eigen::Index>(dims.front())), y(static_cast<Eigen::Index>(dims.back()));
    for (auto& v : x) v = u(rng);
    for (auto& v : y) v = u(rng);
    const double lambda = 0.01;
    const Eigen::VectorXd g = nn::gradient(m, x, y, lambda);
    Eigen::VectorXd theta = m.parameters();
    nn::MlpModel probe = m;
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      Eigen::VectorXd t = theta;
      t[i] += h;
      probe.set_parameters(t);
      const double up = nn::sample_loss(probe, x, y, lambda);
      t[i] -= 2 * h;
      probe.set_parameters(t);
      const double fd = (up - nn::sample_loss(probe, x, y, lambda)) / (2 * h);
      worst = std::max(worst, std::abs(fd - g[i]) / std::max({std::abs(fd), std::abs(g[i]), 1e-6}));
    }
  }
  report(1, worst < 1e-4, "max relative error " + fmt("%.2e", worst) + " over 20 networks (< 1e-4)");
}

void rebound_law() {
  double worst = 0.0;
  for (int i = 1; i <= 9; ++i) {
    const double cor = 0.1 * i;
    const auto tr = sim::trace_ball({cor, 4.5}, 1.0 / 60.0, sim::kEpisodeFrames);
    if (tr.apexes.size() < 4) {
      worst = INFINITY;
      continue;
    }
    for (int k = 1; k <= 3; ++k) {
      const double before = tr.apexes[k - 1] - sim::kBallRadius;
      const double after = tr.apexes[k] - sim::kBallRadius;
      worst = std::max(worst, std::abs(after - cor * cor * before) / (cor * cor * before));
    }
  }
  report(2, worst <= 0.02, "max relative rebound-height error " + fmt("%.2e", worst) + " (<= 2%)");
}

void residual_distribution() {
  data::DatasetSpec s;
  s.n_train = 100000;
  s.frames = 2;
  s.seed = 31;
  const auto ds = data::generate_pairs(s);
  const double w = s.proposed_range[0].width();
  const std::size_t bins = 20;
  const auto h = data::residual_histogram(ds.train, bins, {0.0, w});
  double chi2 = 0.0;
  for (std::size_t b = 0; b < bins; ++b) {
    auto cdf = [w](double d) { return (2.0 * w * d - d * d) / (w * w); };
    const double e = static_cast<double>(ds.train.size()) * (cdf((b + 1) * w / bins) - cdf(b * w / bins));
    chi2 += (h.counts[b] - e) * (h.counts[b] - e) / e;
  }
  const double p = boost::math::cdf(boost::math::complement(boost::math::chi_squared(bins - 1.0), chi2));
  report(3, p > 0.01, "chi-square " + fmt("%.2f", chi2) + " on 19 dof, p = " + fmt("%.3f", p) + " (> 0.01)");
}

// ---------------------------------------------------------------------------
// Experiment runs

struct Timings {
  double ball_train = 0.0;
  double task = 0.0;
};

Timings run_all(const fs::path& root) {
  Timings t;
  auto ball = eval::load_config(kSource + "/configs/ball.json");
  ball.run_dir = (root / "ball").string();
  auto arm = eval::load_config(kSource + "/configs/arm.json");
  arm.run_dir = (root / "arm").string();
  fs::remove_all(root);

  eval::run_gen_data(ball);
  auto t0 = std::chrono::steady_clock::now();
  eval::run_train(ball);
  t.ball_train = seconds_since(t0);
  eval::run_tune(ball);
  eval::run_baseline(ball);
  eval::run_table2(ball);
  eval::run_table3(ball);
  t0 = std::chrono::steady_clock::now();
  eval::run_task(ball);
  t.task = seconds_since(t0);

  eval::run_gen_data(arm);
  eval::run_train(arm);
  eval::run_tune(arm);
  eval::run_table1(arm);
  return t;
}

void table2_checks(const fs::path& ball, double train_seconds) {
  const Table t = Table::read(ball / "table2_long.csv");
  auto mae = [&](const std::string& m, const std::string& d, int k) {
    return t.get({{"method", m}, {"dataset", d}, {"K", std::to_string(k)}}, "param_mae");
  };
  const double tn5 = mae("TuneNet", "easy", 5), tn1 = mae("TuneNet", "easy", 1);
  const double direct = mae("Direct Prediction", "easy", 5), mean = mae("Mean", "easy", 5);
  report(4, tn5 <= 0.02 && tn5 < direct && tn5 < mean && tn5 < 0.0968 && tn5 <= tn1 && train_seconds < 900,
         "easy TuneNet K=5 " + fmt("%.4f", tn5) + ", K=1 " + fmt("%.4f", tn1) + ", direct " + fmt("%.4f", direct) +
             ", mean " + fmt("%.4f", mean) + ", training " + fmt("%.0f s", train_seconds));

  const double h10 = mae("TuneNet", "hard", 10), hdirect = mae("Direct Prediction", "hard", 10);
  report(5, h10 <= 0.05 && h10 < hdirect,
         "hard TuneNet K=10 " + fmt("%.4f", h10) + " (<= 0.05), direct " + fmt("%.4f", hdirect));

  bool ok = true;
  std::string detail;
  for (const std::string d : {"easy", "hard"}) {
    const double c100 = mae("CMA-ES", d, 100);
    const double tuned = mae("TuneNet", d, 5);
    double best_small = INFINITY;
    for (int k : {1, 5, 10}) best_small = std::min(best_small, mae("CMA-ES", d, k));
    ok = ok && c100 <= 0.03 && best_small > tuned;
    detail += d + ": CMA-ES@100 " + fmt("%.4f", c100) + ", best CMA-ES@<=10 " + fmt("%.4f", best_small) +
              " vs TuneNet K=5 " + fmt("%.4f", tuned) + "; ";
  }
  report(6, ok, detail);
}

void table3_checks(const fs::path& ball) {
  const Table t = Table::read(ball / "table3_long.csv");
  const double pct = t.get({{"method", "TuneNet (GT)"}}, "trans_err_pct");
  const double cm = t.get({{"method", "TuneNet (GT)"}}, "trans_err_cm");
  const double untuned = t.get({{"method", "Un-Tuned Physics"}}, "trans_err_pct");
  report(7, pct <= 3.0 && cm <= 2.0 && untuned >= 5.0 * pct,
         "tuned " + fmt("%.3f%%", pct) + " / " + fmt("%.3f cm", cm) + ", untuned " + fmt("%.3f%%", untuned) +
             " (" + fmt("%.1fx", untuned / pct) + ")");
}

void table1_checks(const fs::path& arm) {
  const Table t = Table::read(arm / "table1_long.csv");
  const double val = t.get({{"method", "TuneNet"}, {"dataset", "train_val"}}, "param_mae");
  const double test = t.get({{"method", "TuneNet"}, {"dataset", "test_test"}}, "param_mae");
  double worst_const = INFINITY;
  std::string detail;
  for (const auto& r : t.rows) {
    if (r[t.col("method")] == "TuneNet" || r[t.col("dataset")] != "test_test") continue;
    const double v = std::stod(r[t.col("param_mae")]);
    worst_const = std::min(worst_const, v);
    detail += ", " + r[t.col("method")] + " " + fmt("%.3f", v);
  }
  report(8, val <= 0.05 && test < worst_const,
         "val MAE " + fmt("%.4f kg", val) + ", test MAE " + fmt("%.4f kg", test) + detail);
}

void accounting_checks(const fs::path& ball) {
  auto cfg = eval::load_config(kSource + "/configs/ball.json");
  cfg.run_dir = ball.string();
  const eval::RunPaths paths = eval::run_paths(cfg);
  const auto ds = data::load_dataset(paths.dataset(cfg.table2.datasets.front()).string());
  const auto model = load_tunenet(paths.model("tunenet").string(), paths.model_meta("tunenet").string());
  const auto direct =
      baselines::load_direct(paths.model("direct").string(), paths.model_meta("direct").string());
  bool ok = true;
  std::string detail;
  std::size_t calls = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    const auto& s = ds.test[i];
    const auto inner = data::proposed_simulator(ds.spec, {s.drop_height, s.camera_seed});
    const Simulator counted = [&](const ParamVector& z) {
      ++calls;
      return inner(z);
    };
    for (std::size_t K : {1, 5, 10}) {
      calls = 0;
      const auto r = tune(s.o_t, counted, s.zeta_p, model, K, cfg.bounds);
      ok = ok && calls == K && r.rollouts_used == K;
    }
    calls = 0;
    baselines::direct_predict(direct, s.o_t);
    ok = ok && calls == 0;
    auto opt = cfg.cmaes;
    opt.seed = i;
    const auto c = baselines::cmaes_tune(s.o_t, counted, s.zeta_p, 100, baselines::normalized_mse(model.norm_t), opt);
    ok = ok && calls == 10 * c.generations && c.rollouts == calls;
    for (std::size_t g = 0; g < c.trace.size(); ++g) ok = ok && c.trace[g].rollouts == 10 * (g + 1);
    if (i == 0) detail = "CMA-ES episode 0: " + std::to_string(calls) + " calls in " + std::to_string(c.generations) + " generations";
  }
  report(9, ok, "tune K calls == K, direct 0 calls, CMA-ES 10 per generation; " + detail);
}

void task_checks(const fs::path& ball, double seconds) {
  const Table t = Table::read(ball / "task_summary.csv");
  const double tuned = std::stod(t.rows.at(0)[t.col("success_rate")]);
  const double oracle = std::stod(t.rows.at(1)[t.col("success_rate")]);
  report(10, tuned >= 0.8 && oracle >= 0.95 && seconds < 300,
         "TuneNet " + fmt("%.0f%%", 100 * tuned) + " (>= 80%), oracle " + fmt("%.0f%%", 100 * oracle) +
             " (>= 95%), " + fmt("%.1f s", seconds));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void determinism_checks(const fs::path& a, const fs::path& b) {
  std::size_t compared = 0;
  std::vector<std::string> differing;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), a);
    ++compared;
    if (!fs::exists(b / rel) || slurp(entry.path()) != slurp(b / rel)) differing.push_back(rel.string());
  }
  std::string detail = std::to_string(compared) + " files compared";
  for (const auto& d : differing) detail += ", differs: " + d;
  report(11, compared > 0 && differing.empty(), detail);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: tunenet_acceptance <work-dir>\n";
    return 2;
  }
  const fs::path work = argv[1];
  try {
    gradient_check();
    rebound_law();
    residual_distribution();

    const auto t = run_all(work / "run1");
    table2_checks(work / "run1" / "ball", t.ball_train);
    table3_checks(work / "run1" / "ball");
    table1_checks(work / "run1" / "arm");
    accounting_checks(work / "run1" / "ball");
    task_checks(work / "run1" / "ball", t.task);

    run_all(work / "run2");
    determinism_checks(work / "run1", work / "run2");
  } catch (const std::exception& e) {
    std::printf("acceptance aborted: %s\n", e.what());
    return 1;
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
