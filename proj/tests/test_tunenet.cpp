#include <cmath>
#include <filesystem>
#include <numbers>

#include <gtest/gtest.h>

#include "tunenet/datasets.hpp"
#include "tunenet/errors.hpp"
#include "tunenet/tunenet.hpp"

using namespace tunenet;

namespace {

sim::Observation constant_obs(std::size_t channels, std::size_t length, double v) {
  sim::Observation o;
  o.channels.assign(channels, std::vector<double>(length, v));
  return o;
}

// Model whose residual prediction is the constant scale * tanh(b).
TuneNetModel constant_model(double b, double scale) {
  TuneNetModel m = build_tunenet(ObservationShape{1, 8}, ObservationShape{1, 8}, 1, 0);
  auto& last = m.net.layers.back().blocks.back();
  last.weight.setZero();
  last.bias.setConstant(b);
  m.output_scale = {scale};
  return m;
}

data::DatasetSpec small_ball_spec() {
  data::DatasetSpec spec;
  spec.n_train = 400;
  spec.n_val = 50;
  spec.seed = 17;
  return spec;
}

}  // namespace

TEST(Resample, SineKeepsEndpointsAndShape) {
  sim::Observation o;
  const std::size_t n = 401;
  o.sample_rate = 60.0;
  o.channels.resize(1);
  for (std::size_t i = 0; i < n; ++i) o.channels[0].push_back(std::sin(2 * std::numbers::pi * i / (n - 1.0)));
  const sim::Observation r = resample(o, 101);
  ASSERT_EQ(r.length(), 101u);
  EXPECT_EQ(r.channels[0].front(), o.channels[0].front());
  EXPECT_EQ(r.channels[0].back(), o.channels[0].back());
  for (std::size_t j = 0; j < 101; ++j) {
    EXPECT_NEAR(r.channels[0][j], std::sin(2 * std::numbers::pi * j / 100.0), 1e-12);
  }
  EXPECT_NEAR(r.sample_rate, 15.0, 1e-12);
  const sim::Observation up = resample(o, 1001);
  for (std::size_t j = 0; j < 1001; ++j) {
    EXPECT_NEAR(up.channels[0][j], std::sin(2 * std::numbers::pi * j / 1000.0), 1e-4);
  }
  EXPECT_THROW(resample(o, 1), DimensionError);
}

TEST(Normalizer, ScalesPerChannelToUnitInterval) {
  sim::Observation a, b;
  a.channels = {{1, 2, 3}, {5, 5, 5}};
  b.channels = {{-1, 0, 7}, {5, 5, 5}};
  const Normalizer n = Normalizer::fit({&a, &b});
  const auto fa = n.apply(a);
  EXPECT_DOUBLE_EQ(fa[0], 0.25);
  EXPECT_DOUBLE_EQ(fa[2], 0.5);
  EXPECT_DOUBLE_EQ(n.apply(b)[2], 1.0);
  EXPECT_DOUBLE_EQ(fa[3], 0.0);  // degenerate channel
  sim::Observation one;
  one.channels = {{1, 2, 3}};
  EXPECT_THROW(n.apply(one), DimensionError);
}

TEST(Architecture, TwoExtractorsAndEstimatorHead) {
  const TuneNetModel m = build_tunenet(ObservationShape{3, 400}, ObservationShape{1, 400}, 1, 7);
  ASSERT_EQ(m.net.layers.size(), 3u);
  ASSERT_EQ(m.net.layers[0].blocks.size(), 2u);
  EXPECT_EQ(m.net.layers[0].blocks[0].weight.rows(), 32);
  EXPECT_EQ(m.net.layers[0].blocks[0].weight.cols(), 1200);
  EXPECT_EQ(m.net.layers[0].blocks[1].weight.cols(), 400);
  EXPECT_EQ(m.net.layers[0].activation, nn::Activation::relu);
  EXPECT_EQ(m.net.layers[1].input_dim(), 64u);
  EXPECT_EQ(m.net.layers[1].output_dim(), 32u);
  EXPECT_EQ(m.net.layers[2].activation, nn::Activation::tanh);
  EXPECT_EQ(m.param_dim(), 1u);
}

TEST(Tune, OneRolloutPerIterationAndClampedSteps) {
  const TuneNetModel m = constant_model(0.5, 0.4);
  const double step = 0.4 * std::tanh(0.5);
  std::size_t calls = 0;
  const Simulator sim = [&](const ParamVector&) {
    ++calls;
    return constant_obs(1, 8, 0.0);
  };
  for (std::size_t K : {1, 3, 7}) {
    calls = 0;
    const TuneResult r = tune(constant_obs(1, 8, 1.0), sim, {0.0}, m, K, {{0.0, 1.0}});
    EXPECT_EQ(calls, K);
    EXPECT_EQ(r.rollouts_used, K);
    ASSERT_EQ(r.estimates.size(), K + 1);
    ASSERT_EQ(r.deltas.size(), K);
    for (std::size_t k = 1; k <= K; ++k) {
      EXPECT_NEAR(r.deltas[k - 1][0], step, 1e-15);
      EXPECT_NEAR(r.estimates[k][0], std::min(1.0, step * k), 1e-12);
    }
  }
}

TEST(Tune, ValidatesArgumentsAndIndexesSimulatorFailures) {
  const TuneNetModel m = constant_model(0.1, 1.0);
  const Simulator ok = [](const ParamVector&) { return constant_obs(1, 8, 0.0); };
  const auto o_t = constant_obs(1, 8, 0.0);
  EXPECT_THROW(tune(o_t, ok, {0.5}, m, 0, {}), ParameterDomainError);
  EXPECT_THROW(tune(o_t, ok, {0.5, 0.5}, m, 1, {}), DimensionError);
  EXPECT_THROW(tune(o_t, ok, {2.0}, m, 1, {{0.0, 1.0}}), ParameterDomainError);
  std::size_t calls = 0;
  const Simulator flaky = [&](const ParamVector&) {
    if (calls++ == 2) throw std::runtime_error("boom");
    return constant_obs(1, 8, 0.0);
  };
  try {
    tune(o_t, flaky, {0.5}, m, 5, {});
    FAIL();
  } catch (const IndexedError& e) {
    EXPECT_EQ(e.index(), 2u);
  }
}

TEST(Tune, ResamplesTargetToModelLength) {
  const TuneNetModel m = constant_model(0.1, 1.0);
  const Simulator sim = [](const ParamVector&) { return constant_obs(1, 8, 0.0); };
  EXPECT_NO_THROW(tune(constant_obs(1, 30, 0.0), sim, {0.5}, m, 2, {}));
  const Simulator wrong = [](const ParamVector&) { return constant_obs(1, 9, 0.0); };
  EXPECT_THROW(tune(constant_obs(1, 8, 0.0), wrong, {0.5}, m, 1, {}), DimensionError);
}

TEST(ModelFile, RoundTripPreservesPredictions) {
  const auto dir = std::filesystem::temp_directory_path() / "tunenet_model_rt";
  std::filesystem::create_directories(dir);
  TuneNetModel m = build_tunenet(ObservationShape{3, 8}, ObservationShape{1, 8}, 1, 3);
  sim::Observation p = constant_obs(3, 8, 0.0), t = constant_obs(1, 8, 0.0);
  for (std::size_t i = 0; i < 8; ++i) {
    p.channels[2][i] = 0.3 * i;
    t.channels[0][i] = 1.0 - 0.1 * i;
  }
  m.norm_p = Normalizer::fit({&p});
  m.norm_t = Normalizer::fit({&t});
  m.output_scale = {0.4};
  save_tunenet(m, (dir / "m.json").string(), (dir / "m.meta.json").string());
  const TuneNetModel back = load_tunenet((dir / "m.json").string(), (dir / "m.meta.json").string());
  EXPECT_TRUE(back.net == m.net);
  EXPECT_EQ(back.output_scale, m.output_scale);
  EXPECT_EQ(predict_residual(back, p, t), predict_residual(m, p, t));
  EXPECT_THROW(load_tunenet((dir / "missing.json").string(), (dir / "m.meta.json").string()),
               MissingArtifactError);
}

TEST(Training, LearnsBallResidualsAndTuningConverges) {
  const data::Dataset ds = data::generate_pairs(small_ball_spec());
  nn::TrainConfig cfg;
  cfg.epochs = 150;
  cfg.seed = 1;
  const auto res = train_tunenet(ds, cfg);
  ASSERT_EQ(res.model.output_scale.size(), 1u);
  EXPECT_NEAR(res.model.output_scale[0], 0.4, 1e-12);
  EXPECT_LT(res.loss_history.back(), res.loss_history.front());
  EXPECT_LT(residual_mae(res.model, ds), 0.05);
  // Iterating shrinks the parameter error on held-out pairs.
  double err0 = 0.0, err5 = 0.0;
  for (const auto& s : ds.val) {
    const auto sim = data::proposed_simulator(ds.spec, {s.drop_height, s.camera_seed});
    const TuneResult r = tune(s.o_t, sim, s.zeta_p, res.model, 5, {{0.0, 1.0}});
    err0 += std::abs(s.zeta_p[0] - s.zeta_t[0]);
    err5 += std::abs(r.final_estimate()[0] - s.zeta_t[0]);
  }
  EXPECT_LT(err5, 0.5 * err0);
}
