#include "tunenet/nn.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "tunenet/errors.hpp"

namespace tunenet::nn {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
  }
  return "identity";
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "identity") return Activation::identity;
  throw FormatError("unknown activation tag '" + s + "'");
}

std::size_t Layer::input_dim() const {
  std::size_t n = 0;
  for (const auto& b : blocks) n += static_cast<std::size_t>(b.weight.cols());
  return n;
}

std::size_t Layer::output_dim() const {
  std::size_t n = 0;
  for (const auto& b : blocks) n += static_cast<std::size_t>(b.weight.rows());
  return n;
}

std::size_t MlpModel::input_dim() const { return layers.empty() ? 0 : layers.front().input_dim(); }
std::size_t MlpModel::output_dim() const { return layers.empty() ? 0 : layers.back().output_dim(); }

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers)
    for (const auto& b : l.blocks) n += static_cast<std::size_t>(b.weight.size() + b.bias.size());
  return n;
}

Eigen::VectorXd MlpModel::parameters() const {
  Eigen::VectorXd flat(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index k = 0;
  for (const auto& l : layers) {
    for (const auto& b : l.blocks) {
      for (Eigen::Index r = 0; r < b.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < b.weight.cols(); ++c) flat[k++] = b.weight(r, c);
      for (Eigen::Index r = 0; r < b.bias.size(); ++r) flat[k++] = b.bias[r];
    }
  }
  return flat;
}

void MlpModel::set_parameters(const Eigen::VectorXd& flat) {
  if (static_cast<std::size_t>(flat.size()) != parameter_count()) {
    throw DimensionError("set_parameters: flat vector has wrong length");
  }
  Eigen::Index k = 0;
  for (auto& l : layers) {
    for (auto& b : l.blocks) {
      for (Eigen::Index r = 0; r < b.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < b.weight.cols(); ++c) b.weight(r, c) = flat[k++];
      for (Eigen::Index r = 0; r < b.bias.size(); ++r) b.bias[r] = flat[k++];
    }
  }
}

double MlpModel::weight_norm_squared() const {
  double s = 0.0;
  for (const auto& l : layers)
    for (const auto& b : l.blocks) s += b.weight.squaredNorm();
  return s;
}

void MlpModel::validate() const {
  if (layers.empty()) throw DimensionError("model has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.blocks.empty()) throw DimensionError("layer " + std::to_string(i) + " has no blocks");
    for (const auto& b : l.blocks) {
      if (b.bias.size() != b.weight.rows()) {
        throw DimensionError("layer " + std::to_string(i) + ": bias/weight row mismatch");
      }
      if (!b.weight.allFinite() || !b.bias.allFinite()) {
        throw DimensionError("layer " + std::to_string(i) + " has non-finite parameters");
      }
    }
    if (i > 0 && layers[i - 1].output_dim() != l.input_dim()) {
      throw DimensionError("layer " + std::to_string(i) + " input does not match previous output");
    }
  }
}

bool MlpModel::operator==(const MlpModel& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& a = layers[i];
    const auto& b = other.layers[i];
    if (a.activation != b.activation || a.blocks.size() != b.blocks.size()) return false;
    for (std::size_t j = 0; j < a.blocks.size(); ++j) {
      const auto& x = a.blocks[j];
      const auto& y = b.blocks[j];
      if (x.weight.rows() != y.weight.rows() || x.weight.cols() != y.weight.cols()) return false;
      if (x.weight != y.weight || x.bias != y.bias) return false;
    }
  }
  return true;
}

Layer init_block_layer(std::span<const BlockShape> shapes, Activation activation,
                       std::mt19937_64& rng) {
  Layer layer;
  layer.activation = activation;
  for (const auto& s : shapes) {
    if (s.inputs == 0 || s.outputs == 0) throw DimensionError("block dimensions must be >= 1");
    const double bound = 1.0 / std::sqrt(static_cast<double>(s.inputs));
    std::uniform_real_distribution<double> u(-bound, bound);
    Block b;
    b.weight.resize(static_cast<Eigen::Index>(s.outputs), static_cast<Eigen::Index>(s.inputs));
    b.bias.resize(static_cast<Eigen::Index>(s.outputs));
    for (Eigen::Index r = 0; r < b.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < b.weight.cols(); ++c) b.weight(r, c) = u(rng);
    for (Eigen::Index r = 0; r < b.bias.size(); ++r) b.bias[r] = u(rng);
    layer.blocks.push_back(std::move(b));
  }
  return layer;
}

MlpModel init_model(std::span<const std::size_t> layer_dims,
                    std::span<const Activation> activations, Seed seed) {
  if (layer_dims.size() < 2) throw DimensionError("init_model needs at least one layer");
  if (activations.size() != layer_dims.size() - 1) {
    throw DimensionError("init_model: one activation per layer required");
  }
  std::mt19937_64 rng(seed);
  MlpModel model;
  for (std::size_t i = 0; i + 1 < layer_dims.size(); ++i) {
    const BlockShape shape{layer_dims[i], layer_dims[i + 1]};
    model.layers.push_back(init_block_layer(std::span(&shape, 1), activations[i], rng));
  }
  return model;
}

namespace {

void apply_activation(Activation a, Eigen::MatrixXd& z) {
  switch (a) {
    case Activation::relu: z = z.cwiseMax(0.0); break;
    case Activation::tanh: z = z.array().tanh().matrix(); break;
    case Activation::identity: break;
  }
}

Eigen::MatrixXd layer_forward(const Layer& layer, const Eigen::MatrixXd& in) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(layer.output_dim()), in.cols());
  Eigen::Index row_in = 0, row_out = 0;
  for (const auto& b : layer.blocks) {
    out.middleRows(row_out, b.weight.rows()).noalias() = b.weight * in.middleRows(row_in, b.weight.cols());
    out.middleRows(row_out, b.weight.rows()).colwise() += b.bias;
    row_in += b.weight.cols();
    row_out += b.weight.rows();
  }
  apply_activation(layer.activation, out);
  return out;
}

// Per-block gradients laid out like MlpModel::layers.
struct Gradients {
  std::vector<std::vector<Block>> layers;
};

// Backpropagates d(sum_i ||f(x_i) - y_i||^2 * scale)/d(theta) for a batch, and
// adds 2 * lambda * W to every weight gradient.
Gradients backprop(const MlpModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                   double scale, double lambda) {
  const std::size_t n_layers = model.layers.size();
  std::vector<Eigen::MatrixXd> acts;
  acts.reserve(n_layers + 1);
  acts.push_back(x);
  for (const auto& l : model.layers) acts.push_back(layer_forward(l, acts.back()));

  Gradients g;
  g.layers.resize(n_layers);
  Eigen::MatrixXd delta = (2.0 * scale) * (acts.back() - y);
  for (std::size_t li = n_layers; li-- > 0;) {
    const Layer& layer = model.layers[li];
    const Eigen::MatrixXd& out = acts[li + 1];
    switch (layer.activation) {
      case Activation::relu: delta = delta.cwiseProduct((out.array() > 0.0).cast<double>().matrix()); break;
      case Activation::tanh: delta = delta.cwiseProduct((1.0 - out.array().square()).matrix()); break;
      case Activation::identity: break;
    }
    const Eigen::MatrixXd& in = acts[li];
    Eigen::MatrixXd delta_in;
    if (li > 0) delta_in.resize(in.rows(), in.cols());
    Eigen::Index row_in = 0, row_out = 0;
    for (const auto& b : layer.blocks) {
      const auto d = delta.middleRows(row_out, b.weight.rows());
      const auto a = in.middleRows(row_in, b.weight.cols());
      Block gb;
      gb.weight.noalias() = d * a.transpose();
      if (lambda != 0.0) gb.weight += (2.0 * lambda) * b.weight;
      gb.bias = d.rowwise().sum();
      if (li > 0) delta_in.middleRows(row_in, b.weight.cols()).noalias() = b.weight.transpose() * d;
      g.layers[li].push_back(std::move(gb));
      row_in += b.weight.cols();
      row_out += b.weight.rows();
    }
    if (li > 0) delta = std::move(delta_in);
  }
  return g;
}

void check_input(const MlpModel& model, Eigen::Index rows) {
  if (static_cast<std::size_t>(rows) != model.input_dim()) {
    throw DimensionError("input length " + std::to_string(rows) + " does not match model input " +
                         std::to_string(model.input_dim()));
  }
}

}  // namespace

Eigen::MatrixXd forward_batch(const MlpModel& model, const Eigen::MatrixXd& inputs) {
  if (model.layers.empty()) throw DimensionError("model has no layers");
  check_input(model, inputs.rows());
  Eigen::MatrixXd a = inputs;
  for (const auto& l : model.layers) a = layer_forward(l, a);
  return a;
}

Eigen::VectorXd forward(const MlpModel& model, const Eigen::VectorXd& input) {
  return forward_batch(model, input);
}

double sample_loss(const MlpModel& model, const Eigen::VectorXd& input,
                   const Eigen::VectorXd& target, double lambda) {
  const Eigen::VectorXd out = forward(model, input);
  if (out.size() != target.size()) throw DimensionError("target length does not match output");
  return (out - target).squaredNorm() + lambda * model.weight_norm_squared();
}

Eigen::VectorXd gradient(const MlpModel& model, const Eigen::VectorXd& input,
                         const Eigen::VectorXd& target, double lambda) {
  check_input(model, input.size());
  if (static_cast<std::size_t>(target.size()) != model.output_dim()) {
    throw DimensionError("target length does not match output");
  }
  const Gradients g = backprop(model, input, target, 1.0, lambda);
  MlpModel shaped = model;
  for (std::size_t li = 0; li < shaped.layers.size(); ++li) shaped.layers[li].blocks = g.layers[li];
  return shaped.parameters();
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ParameterDomainError("learning_rate must be positive");
  if (!(lr_decay_fraction >= 0.0 && lr_decay_fraction < 1.0)) {
    throw ParameterDomainError("lr_decay_fraction must lie in [0, 1)");
  }
  if (batch_size < 1) throw ParameterDomainError("batch_size must be >= 1");
  if (lr_decay_period_epochs < 1) throw ParameterDomainError("lr_decay_period_epochs must be >= 1");
  if (!(l2_lambda >= 0.0)) throw ParameterDomainError("l2_lambda must be non-negative");
}

double TrainConfig::learning_rate_at(std::size_t epoch) const {
  const auto periods = static_cast<double>(epoch / lr_decay_period_epochs);
  return learning_rate * std::pow(1.0 - lr_decay_fraction, periods);
}

double dataset_loss(const MlpModel& model, const RegressionData& data, double lambda) {
  const Eigen::MatrixXd pred = forward_batch(model, data.inputs);
  return (pred - data.targets).squaredNorm() / static_cast<double>(data.size()) +
         lambda * model.weight_norm_squared();
}

TrainResult train_sgd(MlpModel model, const RegressionData& data, const TrainConfig& cfg,
                      Loss /*loss*/) {
  cfg.validate();
  model.validate();
  const std::size_t n = data.size();
  if (n == 0) throw DimensionError("train_sgd: empty dataset");
  check_input(model, data.inputs.rows());
  if (data.targets.cols() != data.inputs.cols() ||
      static_cast<std::size_t>(data.targets.rows()) != model.output_dim()) {
    throw DimensionError("train_sgd: target shape does not match model output");
  }

  std::mt19937_64 rng(cfg.seed);
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  TrainResult result;
  result.loss_history.reserve(cfg.epochs);
  Eigen::MatrixXd xb, yb;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = cfg.learning_rate_at(epoch);
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, n - start);
      xb.resize(data.inputs.rows(), static_cast<Eigen::Index>(count));
      yb.resize(data.targets.rows(), static_cast<Eigen::Index>(count));
      for (std::size_t j = 0; j < count; ++j) {
        xb.col(static_cast<Eigen::Index>(j)) = data.inputs.col(order[start + j]);
        yb.col(static_cast<Eigen::Index>(j)) = data.targets.col(order[start + j]);
      }
      const Gradients g = backprop(model, xb, yb, 1.0 / static_cast<double>(count), cfg.l2_lambda);
      for (std::size_t li = 0; li < model.layers.size(); ++li) {
        auto& blocks = model.layers[li].blocks;
        for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
          blocks[bi].weight -= lr * g.layers[li][bi].weight;
          blocks[bi].bias -= lr * g.layers[li][bi].bias;
        }
      }
    }
    const double loss = dataset_loss(model, data, cfg.l2_lambda);
    if (!std::isfinite(loss)) throw DivergenceError(epoch, "training loss became non-finite");
    result.loss_history.push_back(loss);
  }
  result.model = std::move(model);
  return result;
}

void save_model(const MlpModel& model, std::ostream& out) {
  nlohmann::json j;
  j["format"] = "tunenet-mlp";
  j["version"] = kModelFormatVersion;
  j["input_dim"] = model.input_dim();
  j["output_dim"] = model.output_dim();
  auto& layers = j["layers"] = nlohmann::json::array();
  for (const auto& l : model.layers) {
    nlohmann::json jl;
    jl["activation"] = to_string(l.activation);
    jl["blocks"] = nlohmann::json::array();
    for (const auto& b : l.blocks) {
      std::vector<double> w;
      w.reserve(static_cast<std::size_t>(b.weight.size()));
      for (Eigen::Index r = 0; r < b.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < b.weight.cols(); ++c) w.push_back(b.weight(r, c));
      jl["blocks"].push_back({{"rows", b.weight.rows()},
                              {"cols", b.weight.cols()},
                              {"weight", w},
                              {"bias", std::vector<double>(b.bias.data(), b.bias.data() + b.bias.size())}});
    }
    layers.push_back(std::move(jl));
  }
  out << j.dump() << '\n';
  if (!out) throw FormatError("failed to write model");
}

MlpModel load_model(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("corrupt model file: ") + e.what());
  }
  if (j.value("format", "") != "tunenet-mlp") throw FormatError("not a tunenet-mlp model file");
  if (j.value("version", -1) != kModelFormatVersion) {
    throw FormatError("unsupported model format version " + j.value("version", nlohmann::json()).dump());
  }
  MlpModel model;
  try {
    for (const auto& jl : j.at("layers")) {
      Layer l;
      l.activation = activation_from_string(jl.at("activation").get<std::string>());
      for (const auto& jb : jl.at("blocks")) {
        const auto rows = jb.at("rows").get<Eigen::Index>();
        const auto cols = jb.at("cols").get<Eigen::Index>();
        const auto w = jb.at("weight").get<std::vector<double>>();
        const auto bias = jb.at("bias").get<std::vector<double>>();
        if (static_cast<Eigen::Index>(w.size()) != rows * cols ||
            static_cast<Eigen::Index>(bias.size()) != rows) {
          throw FormatError("model block payload does not match its shape");
        }
        Block b;
        b.weight.resize(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r)
          for (Eigen::Index c = 0; c < cols; ++c) b.weight(r, c) = w[static_cast<std::size_t>(r * cols + c)];
        b.bias = Eigen::Map<const Eigen::VectorXd>(bias.data(), rows);
        l.blocks.push_back(std::move(b));
      }
      model.layers.push_back(std::move(l));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("corrupt model file: ") + e.what());
  }
  model.validate();
  return model;
}

}  // namespace tunenet::nn
