#pragma once

// Minimal dense network engine: forward pass, exact backpropagation and
// mini-batch SGD with an L2 penalty on the weights and stepped learning-rate
// decay.
//
// A layer is a list of blocks. Each block owns a dense weight/bias pair that
// reads a contiguous slice of the layer input; block outputs are
// concatenated. An ordinary fully connected layer is a single block, and two
// side-by-side feature extractors are one layer with two blocks.

#include <cstddef>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tunenet/types.hpp"

namespace tunenet::nn {

enum class Activation { relu, tanh, identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct Block {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

struct Layer {
  std::vector<Block> blocks;
  Activation activation = Activation::identity;

  std::size_t input_dim() const;
  std::size_t output_dim() const;
};

struct MlpModel {
  std::vector<Layer> layers;

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t parameter_count() const;

  /// Flat parameter vector: layer by layer, block by block, weights
  /// row-major followed by the bias.
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& flat);
  /// Sum of squared weights (biases excluded).
  double weight_norm_squared() const;
  /// Throws DimensionError when layer dimensions do not chain or weights are
  /// not finite.
  void validate() const;

  bool operator==(const MlpModel& other) const;
};

/// Block shape used by init_block_layer: rows x cols.
struct BlockShape {
  std::size_t inputs = 0;
  std::size_t outputs = 0;
};

/// Fully connected network with layer_dims.size() - 1 layers. Weights and
/// biases are drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
MlpModel init_model(std::span<const std::size_t> layer_dims,
                    std::span<const Activation> activations, Seed seed);

/// One layer made of independent blocks, initialized like init_model.
Layer init_block_layer(std::span<const BlockShape> blocks, Activation activation,
                       std::mt19937_64& rng);

Eigen::VectorXd forward(const MlpModel& model, const Eigen::VectorXd& input);

/// Column-per-sample batch forward pass.
Eigen::MatrixXd forward_batch(const MlpModel& model, const Eigen::MatrixXd& inputs);

/// Exact gradient of ||f(x) - y||^2 + lambda * ||W||^2 with respect to the
/// flat parameter vector.
Eigen::VectorXd gradient(const MlpModel& model, const Eigen::VectorXd& input,
                         const Eigen::VectorXd& target, double lambda);

/// Value of the per-sample objective that gradient() differentiates.
double sample_loss(const MlpModel& model, const Eigen::VectorXd& input,
                   const Eigen::VectorXd& target, double lambda);

enum class Loss { mse_with_l2 };

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 50;
  double learning_rate = 1e-2;
  double l2_lambda = 1e-2;
  double lr_decay_fraction = 0.01;
  std::size_t lr_decay_period_epochs = 5;
  Seed seed = 0;

  void validate() const;
  /// Learning rate in effect during the given zero-based epoch.
  double learning_rate_at(std::size_t epoch) const;
};

/// Column-per-sample training data.
struct RegressionData {
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd targets;

  std::size_t size() const { return static_cast<std::size_t>(inputs.cols()); }
};

struct TrainResult {
  MlpModel model;
  /// Full-dataset objective (mean squared error + lambda * ||W||^2) after
  /// each epoch.
  std::vector<double> loss_history;
};

TrainResult train_sgd(MlpModel model, const RegressionData& data, const TrainConfig& cfg,
                      Loss loss = Loss::mse_with_l2);

/// Full-dataset objective.
double dataset_loss(const MlpModel& model, const RegressionData& data, double lambda);

// Versioned JSON model file: {"format": "tunenet-mlp", "version": 1,
// "layers": [{"activation": "relu", "blocks": [{"rows", "cols",
// "weight" (row-major), "bias"}]}]}.
inline constexpr int kModelFormatVersion = 1;

void save_model(const MlpModel& model, std::ostream& out);
MlpModel load_model(std::istream& in);

}  // namespace tunenet::nn
