#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "tunenet/baselines.hpp"
#include "tunenet/datasets.hpp"
#include "tunenet/errors.hpp"
#include "tunenet/gp.hpp"

using namespace tunenet;
using namespace tunenet::baselines;

TEST(Mean, AveragesTargets) {
  const auto m = mean_baseline({{0.2, 1.0}, {0.4, 3.0}});
  EXPECT_DOUBLE_EQ(m[0], 0.3);
  EXPECT_DOUBLE_EQ(m[1], 2.0);
}

TEST(Cmaes, MinimizesShiftedSphere) {
  const Objective f = [](const ParamVector& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - 0.1 * (i + 1)) * (x[i] - 0.1 * (i + 1));
    return s;
  };
  CmaesOptions opt;
  opt.tolerance = 1e-8;
  opt.seed = 3;
  opt.bounds = {{-1, 1}, {-1, 1}, {-1, 1}};
  const CmaesResult r = cmaes_minimize(f, {0.8, -0.8, 0.5}, 2000, opt);
  EXPECT_LT(r.best_value, 1e-8);
  EXPECT_EQ(r.rollouts, 10 * r.generations);
  for (double e : r.min_eigenvalues) EXPECT_GT(e, 0.0);
  // Best-so-far never gets worse.
  for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_LE(r.trace[i].discrepancy, r.trace[i - 1].discrepancy);
}

TEST(Cmaes, CountsTenEvaluationsPerGenerationAndStaysInBounds) {
  std::size_t calls = 0;
  const Objective f = [&](const ParamVector& x) {
    ++calls;
    EXPECT_GE(x[0], 0.0);
    EXPECT_LE(x[0], 1.0);
    return std::abs(x[0] - 0.95);
  };
  CmaesOptions opt;
  opt.tolerance = 0.0;
  opt.bounds = {{0.0, 1.0}};
  for (std::size_t budget : {10, 37, 100}) {
    calls = 0;
    const CmaesResult r = cmaes_minimize(f, {0.5}, budget, opt);
    EXPECT_EQ(r.generations, budget / 10);
    EXPECT_EQ(calls, 10 * r.generations);
    EXPECT_EQ(r.rollouts, calls);
  }
  EXPECT_THROW(cmaes_minimize(f, {0.5}, 9, opt), ParameterDomainError);
}

TEST(Cmaes, SeededRunsRepeat) {
  const Objective f = [](const ParamVector& x) { return (x[0] - 0.3) * (x[0] - 0.3); };
  CmaesOptions opt;
  opt.seed = 11;
  opt.bounds = {{0.0, 1.0}};
  const auto a = cmaes_minimize(f, {0.9}, 100, opt);
  const auto b = cmaes_minimize(f, {0.9}, 100, opt);
  EXPECT_EQ(a.best, b.best);
  EXPECT_EQ(a.generations, b.generations);
}

TEST(Cmaes, TuneUsesTheSimulatorOncePerCandidate) {
  std::size_t calls = 0;
  const Simulator sim = [&](const ParamVector& z) {
    ++calls;
    sim::Observation o;
    o.channels = {{z[0], 2 * z[0]}};
    return o;
  };
  sim::Observation target;
  target.channels = {{0.6, 1.2}};
  CmaesOptions opt;
  opt.bounds = {{0.0, 1.0}};
  opt.tolerance = 1e-4;
  const CmaesResult r = cmaes_tune(target, sim, {0.2}, 100, normalized_mse({}), opt);
  EXPECT_EQ(calls, r.rollouts);
  EXPECT_EQ(r.rollouts % 10, 0u);
  EXPECT_NEAR(r.best[0], 0.6, 0.01);
}

TEST(Grid, CentersSpanInterval) {
  const auto g = grid_centers({0.0, 1.0}, 50);
  ASSERT_EQ(g.size(), 50u);
  EXPECT_DOUBLE_EQ(g.front(), 0.01);
  EXPECT_NEAR(g[30], 0.61, 1e-15);
  EXPECT_NEAR(g.back(), 0.99, 1e-15);
}

TEST(EntropySearch, FindsMinimumBin) {
  const auto centers = grid_centers({0.0, 1.0}, 50);
  const double x_star = centers[30];
  std::size_t calls = 0;
  const auto f = [&](double x) {
    ++calls;
    return (x - x_star) * (x - x_star);
  };
  EntropySearchOptions opt;
  opt.seed = 2;
  opt.early_stop = false;
  const EntropySearchResult r = entropy_search_minimize(f, 0.1, 25, opt);
  EXPECT_EQ(r.rollouts, 25u);
  EXPECT_EQ(calls, 25u);
  EXPECT_NEAR(r.estimate, x_star, 1.5 / 50.0);
  ASSERT_FALSE(r.trace.empty());
  EXPECT_EQ(r.trace.front().rollouts, 1u);
}

TEST(EntropySearch, EarlyStopUsesFewerRollouts) {
  const auto f = [](double x) { return std::abs(x - 0.42); };
  EntropySearchOptions opt;
  opt.seed = 5;
  const EntropySearchResult r = entropy_search_minimize(f, 0.5, 100, opt);
  EXPECT_TRUE(r.stopped_early);
  EXPECT_LT(r.rollouts, 100u);
  EXPECT_EQ(r.trace.size(), r.rollouts);
}

TEST(EntropySearch, TuneRejectsVectorParameters) {
  const Simulator sim = [](const ParamVector&) { return sim::Observation{{{0.0, 1.0}}}; };
  EXPECT_THROW(entropy_search_tune(sim::Observation{{{0.0, 1.0}}}, sim, {0.1, 0.2}, 10, normalized_mse({})),
               DimensionError);
}

TEST(Gp, PosteriorInterpolatesWithSmallVarianceAtData) {
  GpSurrogate gp({0.2, 1.0}, 1e-6);
  const std::vector<double> xs{0.1, 0.4, 0.8};
  const std::vector<double> ys{1.0, -0.5, 0.3};
  gp.fit(xs, ys);
  const auto post = gp.posterior(xs);
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(post.mean[i], ys[i], 1e-4);
    EXPECT_GE(post.cov(i, i), 0.0);
    EXPECT_LT(post.cov(i, i), 1e-5);
  }
  // Far from data the posterior reverts to the prior.
  const auto far = gp.posterior({5.0});
  EXPECT_NEAR(far.mean[0], 0.0, 1e-9);
  EXPECT_NEAR(far.cov(0, 0), 1.0, 1e-9);
  EXPECT_TRUE(std::isfinite(gp.log_marginal_likelihood()));
}

TEST(Gp, PosteriorVarianceMatchesClosedFormForOnePoint) {
  const RbfKernel k{0.3, 2.0};
  const double noise = 0.1;
  GpSurrogate gp(k, noise);
  gp.fit({0.0}, {1.0});
  const double x = 0.2;
  const double kx = k(x, 0.0);
  const auto post = gp.posterior({x});
  EXPECT_NEAR(post.mean[0], kx / (2.0 + noise), 1e-12);
  EXPECT_NEAR(post.cov(0, 0), 2.0 - kx * kx / (2.0 + noise), 1e-12);
}

TEST(Gp, JitterHandlesDuplicatePoints) {
  GpSurrogate gp({0.1, 1.0}, 0.0);
  EXPECT_NO_THROW(gp.fit({0.3, 0.3, 0.3}, {1.0, 1.0, 1.0}));
  EXPECT_GT(gp.jitter(), 0.0);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Identity(2, 2);
  bad(1, 1) = -1.0;
  EXPECT_THROW(robust_cholesky(bad), NumericalError);
}

TEST(Direct, PredictsInRangeWithoutRollouts) {
  data::DatasetSpec s;
  s.n_train = 400;
  s.n_val = 20;
  s.seed = 9;
  const data::Dataset ds = data::generate_pairs(s);
  nn::TrainConfig cfg;
  cfg.epochs = 200;
  cfg.seed = 2;
  const DirectModel m = direct_predict_train(ds, cfg);
  double err = 0.0;
  for (const auto& p : ds.val) {
    const auto z = direct_predict(m, p.o_t);
    EXPECT_GE(z[0], 0.3 - 1e-12);
    EXPECT_LE(z[0], 0.7 + 1e-12);
    err += std::abs(z[0] - p.zeta_t[0]);
  }
  EXPECT_LT(err / ds.val.size(), 0.06) << "constant mean scores about 0.1";

  const auto dir = std::filesystem::temp_directory_path() / "tunenet_direct_rt";
  std::filesystem::create_directories(dir);
  save_direct(m, (dir / "d.json").string(), (dir / "d.meta.json").string());
  const DirectModel back = load_direct((dir / "d.json").string(), (dir / "d.meta.json").string());
  EXPECT_EQ(direct_predict(back, ds.val[0].o_t), direct_predict(m, ds.val[0].o_t));
}
