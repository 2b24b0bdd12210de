#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "tunenet/errors.hpp"
#include "tunenet/nn.hpp"

using namespace tunenet;
using namespace tunenet::nn;

namespace {

Eigen::VectorXd random_vector(std::mt19937_64& rng, Eigen::Index n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

// Largest componentwise relative error between backprop and central
// differences of sample_loss.
double max_gradient_error(const MlpModel& model, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                          double lambda) {
  const Eigen::VectorXd g = gradient(model, x, y, lambda);
  const Eigen::VectorXd theta = model.parameters();
  MlpModel probe = model;
  const double h = 1e-6;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Eigen::VectorXd t = theta;
    t[i] += h;
    probe.set_parameters(t);
    const double up = sample_loss(probe, x, y, lambda);
    t[i] -= 2 * h;
    probe.set_parameters(t);
    const double down = sample_loss(probe, x, y, lambda);
    const double fd = (up - down) / (2 * h);
    const double scale = std::max({std::abs(fd), std::abs(g[i]), 1e-6});
    worst = std::max(worst, std::abs(fd - g[i]) / scale);
  }
  return worst;
}

}  // namespace

TEST(Gradient, MatchesFiniteDifferencesOnRandomNetworks) {
  const Activation kinds[] = {Activation::relu, Activation::tanh, Activation::identity};
  double worst = 0.0;
  for (Seed seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t depth = 1 + seed % 3;
    std::vector<std::size_t> dims{2 + seed % 4};
    std::vector<Activation> acts;
    for (std::size_t l = 0; l < depth; ++l) {
      dims.push_back(1 + (seed * 7 + l * 3) % 5);
      acts.push_back(kinds[(seed + l) % 3]);
    }
    const MlpModel m = init_model(dims, acts, seed);
    const Eigen::VectorXd x = random_vector(rng, static_cast<Eigen::Index>(dims.front()));
    const Eigen::VectorXd y = random_vector(rng, static_cast<Eigen::Index>(dims.back()));
    worst = std::max(worst, max_gradient_error(m, x, y, 0.01 * static_cast<double>(seed % 3)));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Gradient, MatchesFiniteDifferencesWithBlockLayers) {
  std::mt19937_64 rng(5);
  MlpModel m;
  const BlockShape two[] = {{3, 4}, {2, 3}};
  m.layers.push_back(init_block_layer(two, Activation::relu, rng));
  const BlockShape head[] = {{7, 5}};
  m.layers.push_back(init_block_layer(head, Activation::relu, rng));
  const BlockShape out[] = {{5, 2}};
  m.layers.push_back(init_block_layer(out, Activation::tanh, rng));
  m.validate();
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::VectorXd x = random_vector(rng, 5);
    const Eigen::VectorXd y = random_vector(rng, 2);
    EXPECT_LT(max_gradient_error(m, x, y, 0.01), 1e-4);
  }
}

TEST(Gradient, PenaltyCoversWeightsOnly) {
  const std::size_t dims[] = {3, 2};
  const Activation acts[] = {Activation::identity};
  MlpModel m = init_model(dims, acts, 1);
  const Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
  const Eigen::VectorXd y = forward(m, x);
  // Zero input and exact target: only the penalty contributes.
  const Eigen::VectorXd g = gradient(m, x, y, 0.5);
  const Eigen::VectorXd theta = m.parameters();
  for (Eigen::Index i = 0; i < 6; ++i) EXPECT_NEAR(g[i], 2 * 0.5 * theta[i], 1e-12);
  for (Eigen::Index i = 6; i < 8; ++i) EXPECT_NEAR(g[i], 0.0, 1e-12);
  EXPECT_NEAR(sample_loss(m, x, y, 0.5), 0.5 * m.weight_norm_squared(), 1e-12);
}

TEST(Forward, BatchMatchesSingle) {
  const std::size_t dims[] = {4, 6, 3};
  const Activation acts[] = {Activation::relu, Activation::tanh};
  const MlpModel m = init_model(dims, acts, 3);
  std::mt19937_64 rng(3);
  Eigen::MatrixXd xs(4, 7);
  for (int c = 0; c < 7; ++c) xs.col(c) = random_vector(rng, 4);
  const Eigen::MatrixXd ys = forward_batch(m, xs);
  for (int c = 0; c < 7; ++c) EXPECT_TRUE(ys.col(c).isApprox(forward(m, xs.col(c)), 1e-14));
}

TEST(Forward, RejectsWrongInputLength) {
  const std::size_t dims[] = {4, 2};
  const Activation acts[] = {Activation::identity};
  const MlpModel m = init_model(dims, acts, 0);
  EXPECT_THROW(forward(m, Eigen::VectorXd::Zero(3)), DimensionError);
}

TEST(Init, WeightsWithinFanInBound) {
  const std::size_t dims[] = {16, 8, 1};
  const Activation acts[] = {Activation::relu, Activation::tanh};
  const MlpModel m = init_model(dims, acts, 11);
  EXPECT_LE(m.layers[0].blocks[0].weight.cwiseAbs().maxCoeff(), 1.0 / 4.0);
  EXPECT_LE(m.layers[1].blocks[0].weight.cwiseAbs().maxCoeff(), 1.0 / std::sqrt(8.0));
  EXPECT_EQ(m.parameter_count(), 16u * 8 + 8 + 8 + 1);
  EXPECT_TRUE(init_model(dims, acts, 11) == m);
  EXPECT_FALSE(init_model(dims, acts, 12) == m);
}

TEST(Schedule, StepDecay) {
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.lr_decay_fraction = 0.01;
  cfg.lr_decay_period_epochs = 5;
  EXPECT_DOUBLE_EQ(cfg.learning_rate_at(0), 0.01);
  EXPECT_DOUBLE_EQ(cfg.learning_rate_at(4), 0.01);
  EXPECT_DOUBLE_EQ(cfg.learning_rate_at(5), 0.01 * 0.99);
  EXPECT_NEAR(cfg.learning_rate_at(12), 0.01 * 0.99 * 0.99, 1e-18);
}

TEST(Schedule, RejectsBadConfig) {
  TrainConfig cfg;
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), ParameterDomainError);
  cfg = {};
  cfg.learning_rate = -1;
  EXPECT_THROW(cfg.validate(), ParameterDomainError);
  cfg = {};
  cfg.lr_decay_fraction = 1.0;
  EXPECT_THROW(cfg.validate(), ParameterDomainError);
}

TEST(Training, FitsLinearMapAndIsDeterministic) {
  std::mt19937_64 rng(9);
  RegressionData data;
  data.inputs.resize(2, 200);
  data.targets.resize(1, 200);
  for (int c = 0; c < 200; ++c) {
    data.inputs.col(c) = random_vector(rng, 2);
    data.targets(0, c) = 0.5 * data.inputs(0, c) - 0.25 * data.inputs(1, c);
  }
  const std::size_t dims[] = {2, 8, 1};
  const Activation acts[] = {Activation::tanh, Activation::identity};
  TrainConfig cfg;
  cfg.epochs = 150;
  cfg.batch_size = 20;
  cfg.learning_rate = 0.1;
  cfg.l2_lambda = 0.0;
  cfg.seed = 4;
  const auto a = train_sgd(init_model(dims, acts, 2), data, cfg);
  ASSERT_EQ(a.loss_history.size(), 150u);
  EXPECT_LT(a.loss_history.back(), 0.05 * a.loss_history.front());
  EXPECT_LT(a.loss_history.back(), 1e-3);
  const auto b = train_sgd(init_model(dims, acts, 2), data, cfg);
  EXPECT_TRUE(a.model == b.model);
  EXPECT_EQ(a.loss_history, b.loss_history);
}

TEST(Training, DivergenceReportsEpoch) {
  RegressionData data;
  data.inputs = Eigen::MatrixXd::Constant(1, 4, 1e3);
  data.targets = Eigen::MatrixXd::Constant(1, 4, 1e3);
  const std::size_t dims[] = {1, 4, 1};
  const Activation acts[] = {Activation::identity, Activation::identity};
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.batch_size = 4;
  cfg.learning_rate = 10.0;
  try {
    train_sgd(init_model(dims, acts, 0), data, cfg);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_LT(e.epoch(), 50u);
  }
}

TEST(ModelFile, RoundTripIsExact) {
  std::mt19937_64 rng(1);
  MlpModel m;
  const BlockShape two[] = {{3, 4}, {2, 3}};
  m.layers.push_back(init_block_layer(two, Activation::relu, rng));
  const BlockShape out[] = {{7, 1}};
  m.layers.push_back(init_block_layer(out, Activation::tanh, rng));
  std::stringstream ss;
  save_model(m, ss);
  const MlpModel back = load_model(ss);
  EXPECT_TRUE(back == m);
}

TEST(ModelFile, RejectsWrongVersionAndCorruption) {
  const std::size_t dims[] = {2, 1};
  const Activation acts[] = {Activation::identity};
  std::stringstream ss;
  save_model(init_model(dims, acts, 0), ss);
  std::string text = ss.str();
  const auto pos = text.find("\"version\":1");
  ASSERT_NE(pos, std::string::npos);
  std::string bumped = text;
  bumped.replace(pos, 11, "\"version\":99");
  std::stringstream a(bumped);
  EXPECT_THROW(load_model(a), FormatError);
  std::stringstream b(text.substr(0, text.size() / 2));
  EXPECT_THROW(load_model(b), FormatError);
}
