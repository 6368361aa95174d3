#include "oib/inference_net.hpp"

#include "oib/binary_io.hpp"
#include "oib/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace oib {

namespace {

// Seed salt for the ratio draws in multi-ratio training; shuffles use the
// unsalted stream.
constexpr std::uint64_t kRatioStreamSalt = 0x9e3779b97f4a7c15ULL;

Matrix relu(const Matrix& m) { return m.cwiseMax(0.0); }

void check_labels(std::span<const int> labels, Index rows, Index classes) {
  require_dims(static_cast<Index>(labels.size()) == rows, "labels length must equal sample count");
  for (int y : labels)
    if (y < 0 || y >= classes)
      throw std::invalid_argument("label " + std::to_string(y) + " outside [0, " +
                                  std::to_string(classes) + ")");
}

Matrix gather_rows(const Matrix& m, std::span<const Index> idx) {
  Matrix out(static_cast<Index>(idx.size()), m.cols());
  for (size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Index>(i)) = m.row(idx[i]);
  return out;
}

struct AdamState {
  std::vector<Matrix> mw, vw;
  std::vector<Vector> mb, vb;
  long step = 0;
};

AdamState make_adam(const MlpModel& model, Index start) {
  AdamState s;
  for (Index l = start; l < static_cast<Index>(model.layers.size()); ++l) {
    const auto& layer = model.layers[static_cast<size_t>(l)];
    s.mw.push_back(Matrix::Zero(layer.weights.rows(), layer.weights.cols()));
    s.vw.push_back(Matrix::Zero(layer.weights.rows(), layer.weights.cols()));
    s.mb.push_back(Vector::Zero(layer.bias.size()));
    s.vb.push_back(Vector::Zero(layer.bias.size()));
  }
  return s;
}

template <typename Param, typename Moment>
void adam_update(Param& p, const Moment& g, Moment& m, Moment& v, const TrainConfig& cfg,
                 double c1, double c2) {
  m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * g;
  v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * g.cwiseProduct(g);
  p.array() -= cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.adam_eps);
}

void adam_step(MlpModel& model, Index start, const Gradients& g, AdamState& s,
               const TrainConfig& cfg) {
  ++s.step;
  const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(s.step));
  for (size_t k = 0; k < g.weights.size(); ++k) {
    auto& layer = model.layers[static_cast<size_t>(start) + k];
    adam_update(layer.weights, g.weights[k], s.mw[k], s.vw[k], cfg, c1, c2);
    adam_update(layer.bias, g.bias[k], s.mb[k], s.vb[k], cfg, c1, c2);
  }
}

void validate(const TrainConfig& cfg) {
  if (cfg.epochs < 0 || cfg.batch_size < 1 || cfg.learning_rate < 0.0)
    throw std::invalid_argument("TrainConfig: epochs >= 0, batch_size >= 1, learning_rate >= 0");
}

// Mini-batch Adam over layers [start, end). `sources` holds one input matrix
// per compression ratio; with a single source no ratio draws are made.
TrainResult train_segment(MlpModel model, Index start, std::span<const Matrix> sources,
                          std::span<const int> labels, const TrainConfig& cfg) {
  validate(cfg);
  if (sources.empty()) throw std::invalid_argument("training needs at least one input set");
  const Index n = sources.front().rows();
  for (const auto& s : sources) {
    require_dims(s.rows() == n, "all input sets must have the same sample count");
    require_dims(s.cols() == model.layers[static_cast<size_t>(start)].weights.cols(),
                 "input width " + std::to_string(s.cols()) + " does not match layer " +
                     std::to_string(start) + " input " +
                     std::to_string(model.layers[static_cast<size_t>(start)].weights.cols()));
  }
  check_labels(labels, n, model.output_dim());

  std::mt19937_64 shuffle_rng(cfg.seed);
  std::mt19937_64 ratio_rng(cfg.seed ^ kRatioStreamSalt);
  std::uniform_int_distribution<size_t> pick_ratio(0, sources.size() - 1);

  AdamState adam = make_adam(model, start);
  Gradients grads;
  std::vector<Index> order(static_cast<size_t>(n));
  std::vector<int> batch_labels;
  TrainResult out;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), Index{0});
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    for (Index b = 0; b < n; b += cfg.batch_size) {
      const Index len = std::min<Index>(cfg.batch_size, n - b);
      std::span<const Index> idx(order.data() + b, static_cast<size_t>(len));
      const Matrix& src = sources.size() == 1 ? sources.front() : sources[pick_ratio(ratio_rng)];
      const Matrix batch = gather_rows(src, idx);
      batch_labels.resize(static_cast<size_t>(len));
      for (Index i = 0; i < len; ++i) batch_labels[static_cast<size_t>(i)] = labels[static_cast<size_t>(idx[static_cast<size_t>(i)])];
      const double loss = loss_and_gradients(model, start, batch, batch_labels, &grads);
      if (!std::isfinite(loss))
        throw NumericalError("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                             "; lower the learning rate or check input scaling");
      loss_sum += loss * static_cast<double>(len);
      adam_step(model, start, grads, adam, cfg);
    }
    out.loss_trace.push_back(loss_sum / static_cast<double>(n));
  }
  out.model = std::move(model);
  return out;
}

}  // namespace

std::vector<Index> MlpModel::layer_sizes() const {
  std::vector<Index> sizes;
  if (layers.empty()) return sizes;
  sizes.push_back(layers.front().weights.cols());
  for (const auto& l : layers) sizes.push_back(l.weights.rows());
  return sizes;
}

std::vector<Index> shallow_mnist_layer_sizes() { return {784, 256, 128, 64, 16, 10}; }

MlpModel make_mlp(std::span<const Index> sizes, std::uint64_t seed) {
  if (sizes.size() < 2) throw std::invalid_argument("make_mlp: need at least input and output sizes");
  for (Index s : sizes)
    if (s < 1) throw std::invalid_argument("make_mlp: layer sizes must be positive");
  std::mt19937_64 rng(seed);
  MlpModel model;
  for (size_t l = 0; l + 1 < sizes.size(); ++l) {
    const Index in = sizes[l];
    const Index out = sizes[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-limit, limit);
    DenseLayer layer{Matrix(out, in), Vector::Zero(out)};
    for (Index i = 0; i < out; ++i)
      for (Index j = 0; j < in; ++j) layer.weights(i, j) = dist(rng);
    model.layers.push_back(std::move(layer));
  }
  return model;
}

nlohmann::json to_json(const TrainConfig& cfg) {
  return {{"epochs", cfg.epochs},          {"learning_rate", cfg.learning_rate},
          {"batch_size", cfg.batch_size},  {"seed", cfg.seed},
          {"adam_beta1", cfg.adam_beta1},  {"adam_beta2", cfg.adam_beta2},
          {"adam_eps", cfg.adam_eps}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.adam_beta1 = j.value("adam_beta1", cfg.adam_beta1);
  cfg.adam_beta2 = j.value("adam_beta2", cfg.adam_beta2);
  cfg.adam_eps = j.value("adam_eps", cfg.adam_eps);
  return cfg;
}

double loss_and_gradients(const MlpModel& model, Index start_layer, const Matrix& inputs,
                          std::span<const int> labels, Gradients* grads) {
  const Index n_layers = static_cast<Index>(model.layers.size());
  if (start_layer < 0 || start_layer >= n_layers)
    throw std::out_of_range("loss_and_gradients: start_layer out of range");
  const Index batch = inputs.rows();
  check_labels(labels, batch, model.output_dim());

  // activations[k] feeds layer start_layer + k; pre[k] is its output.
  std::vector<Matrix> activations;
  std::vector<Matrix> pre;
  activations.push_back(start_layer > 0 ? relu(inputs) : inputs);
  for (Index l = start_layer; l < n_layers; ++l) {
    const auto& layer = model.layers[static_cast<size_t>(l)];
    Matrix z = activations.back() * layer.weights.transpose();
    z.rowwise() += layer.bias.transpose();
    pre.push_back(std::move(z));
    if (l + 1 < n_layers) activations.push_back(relu(pre.back()));
  }

  Matrix& logits = pre.back();
  Matrix probs(batch, logits.cols());
  double loss = 0.0;
  for (Index i = 0; i < batch; ++i) {
    const double mx = logits.row(i).maxCoeff();
    const auto shifted = (logits.row(i).array() - mx).eval();
    const double lse = std::log(shifted.exp().sum());
    probs.row(i) = (shifted - lse).exp().matrix();
    loss -= shifted(labels[static_cast<size_t>(i)]) - lse;
  }
  loss /= static_cast<double>(batch);
  if (!grads) return loss;

  const size_t count = pre.size();
  grads->weights.resize(count);
  grads->bias.resize(count);
  Matrix delta = probs;
  for (Index i = 0; i < batch; ++i) delta(i, labels[static_cast<size_t>(i)]) -= 1.0;
  delta /= static_cast<double>(batch);
  for (size_t k = count; k-- > 0;) {
    const auto& layer = model.layers[static_cast<size_t>(start_layer) + k];
    grads->weights[k].noalias() = delta.transpose() * activations[k];
    grads->bias[k] = delta.colwise().sum().transpose();
    if (k > 0) {
      Matrix back = delta * layer.weights;
      delta = back.cwiseProduct((pre[k - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return loss;
}

TrainResult train(const MlpModel& model_init, const Matrix& inputs, std::span<const int> labels,
                  const TrainConfig& cfg) {
  if (model_init.layers.empty()) throw std::invalid_argument("train: empty model");
  const Matrix* src = &inputs;
  return train_segment(model_init, 0, std::span<const Matrix>(src, 1), labels, cfg);
}

std::pair<Matrix, Vector> extract_l0(const MlpModel& model) {
  if (model.layers.empty()) throw std::invalid_argument("extract_l0: empty model");
  return {model.layers.front().weights, model.layers.front().bias};
}

Matrix first_layer_preactivations(const MlpModel& model, const Matrix& x_tilde) {
  const auto& l0 = model.layers.front();
  require_dims(x_tilde.cols() == l0.weights.cols(), "first_layer_preactivations: input width");
  Matrix y = x_tilde * l0.weights.transpose();
  y.rowwise() += l0.bias.transpose();
  return y;
}

double default_target_noise(const MlpModel& model, const Matrix& x_tilde) {
  const Matrix y = first_layer_preactivations(model, x_tilde);
  const Vector mean = y.colwise().mean().transpose();
  const double var = (y.rowwise() - mean.transpose()).squaredNorm() /
                     (static_cast<double>(y.rows()) * static_cast<double>(y.cols()));
  return 0.1 * std::sqrt(var);
}

RegressionTargetSet make_regression_targets(const MlpModel& model, const DataMatrix& x_tilde,
                                            std::optional<double> lambda, std::uint64_t seed) {
  if (model.layers.empty()) throw std::invalid_argument("make_regression_targets: empty model");
  RegressionTargetSet out;
  out.x_tilde = x_tilde;
  out.noise_lambda = lambda.value_or(default_target_noise(model, x_tilde.values));
  if (out.noise_lambda < 0.0) throw std::invalid_argument("make_regression_targets: lambda < 0");
  Matrix y = first_layer_preactivations(model, x_tilde.values);
  if (out.noise_lambda > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (Index i = 0; i < y.rows(); ++i)
      for (Index j = 0; j < y.cols(); ++j) y(i, j) += out.noise_lambda * gauss(rng);
  }
  out.y_tilde = DataMatrix(std::move(y));
  return out;
}

Matrix forward_rows_from_layer(const MlpModel& model, Index start_layer, const Matrix& inputs) {
  const Index n_layers = static_cast<Index>(model.layers.size());
  if (start_layer < 0 || start_layer >= n_layers)
    throw std::out_of_range("forward_from_layer: start_layer out of range");
  require_dims(inputs.cols() == model.layers[static_cast<size_t>(start_layer)].weights.cols(),
               "forward_from_layer: input width " + std::to_string(inputs.cols()) +
                   " does not match layer " + std::to_string(start_layer));
  Matrix a = start_layer > 0 ? relu(inputs) : inputs;
  for (Index l = start_layer; l < n_layers; ++l) {
    const auto& layer = model.layers[static_cast<size_t>(l)];
    Matrix z = a * layer.weights.transpose();
    z.rowwise() += layer.bias.transpose();
    a = (l + 1 < n_layers) ? relu(z) : std::move(z);
  }
  return a;
}

Vector forward_from_layer(const MlpModel& model, Index start_layer, const Vector& input) {
  return forward_rows_from_layer(model, start_layer, input.transpose()).row(0).transpose();
}

std::vector<int> predict_labels(const Matrix& logits) {
  std::vector<int> out(static_cast<size_t>(logits.rows()));
  for (Index i = 0; i < logits.rows(); ++i) {
    Index arg = 0;
    logits.row(i).maxCoeff(&arg);
    out[static_cast<size_t>(i)] = static_cast<int>(arg);
  }
  return out;
}

double accuracy(const Matrix& logits, std::span<const int> labels) {
  require_dims(static_cast<Index>(labels.size()) == logits.rows(), "accuracy: label count");
  if (labels.empty()) return 0.0;
  const auto pred = predict_labels(logits);
  size_t hit = 0;
  for (size_t i = 0; i < pred.size(); ++i) hit += pred[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

TrainResult retrain_head(const MlpModel& model, const Matrix& reconstructed_inputs,
                         std::span<const int> labels, const TrainConfig& cfg) {
  if (model.layers.size() < 2) throw std::invalid_argument("retrain_head: model has no head");
  const Matrix* src = &reconstructed_inputs;
  return train_segment(model, 1, std::span<const Matrix>(src, 1), labels, cfg);
}

TrainResult train_head_on_z(const Matrix& z_train, std::span<const int> labels,
                            std::span<const Index> head_sizes, const TrainConfig& cfg) {
  if (head_sizes.empty() || head_sizes.front() != z_train.cols())
    throw DimensionError("train_head_on_z: head input size must equal n_z = " +
                         std::to_string(z_train.cols()));
  // Train on standardized features, then fold the affine map into layer 0 so
  // the returned head consumes raw z.
  const Vector mean = z_train.colwise().mean().transpose();
  Vector scale = ((z_train.rowwise() - mean.transpose()).colwise().squaredNorm() /
                  static_cast<double>(z_train.rows()))
                     .cwiseSqrt()
                     .transpose();
  for (Index j = 0; j < scale.size(); ++j)
    if (!(scale(j) > 0.0)) scale(j) = 1.0;
  const Matrix standardized =
      (z_train.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
  MlpModel head = make_mlp(head_sizes, cfg.seed);
  const Matrix* src = &standardized;
  TrainResult r = train_segment(std::move(head), 0, std::span<const Matrix>(src, 1), labels, cfg);
  DenseLayer& first = r.model.layers.front();
  first.weights = first.weights * scale.cwiseInverse().asDiagonal();
  first.bias -= first.weights * mean;
  return r;
}

TrainResult train_multi_rho_head(const MlpModel& model,
                                 std::span<const Matrix> reconstructed_per_rho,
                                 std::span<const int> labels, const TrainConfig& cfg) {
  if (reconstructed_per_rho.empty()) throw std::invalid_argument("train_multi_rho_head: empty rho set");
  if (model.layers.size() < 2) throw std::invalid_argument("train_multi_rho_head: model has no head");
  return train_segment(model, 1, reconstructed_per_rho, labels, cfg);
}

TrainResult train_multi_rho_head(const MlpModel& model, std::span<const Compressor> compressors,
                                 std::span<const Reexpander> reexpanders, const Matrix& x_tilde,
                                 std::span<const int> labels, const TrainConfig& cfg) {
  require_dims(compressors.size() == reexpanders.size(),
               "train_multi_rho_head: compressor and re-expander families differ in size");
  std::vector<Matrix> recon;
  recon.reserve(compressors.size());
  for (size_t i = 0; i < compressors.size(); ++i)
    recon.push_back(reexpand_rows(reexpanders[i], encode_rows(with_noise(compressors[i], 0.0), x_tilde)));
  return train_multi_rho_head(model, recon, labels, cfg);
}

void save_checkpoint(const MlpModel& model, const std::filesystem::path& stem, std::uint64_t seed,
                     const TrainConfig& cfg) {
  io::Json manifest = {
      {"layer_sizes", model.layer_sizes()},
      {"activation", "relu"},
      {"seed", seed},
      {"train_config", to_json(cfg)},
  };
  std::vector<std::uint8_t> bytes;
  for (const auto& layer : model.layers) {
    for (Index i = 0; i < layer.weights.rows(); ++i)
      for (Index j = 0; j < layer.weights.cols(); ++j)
        io::append_f32_le(bytes, static_cast<float>(layer.weights(i, j)));
    for (Index i = 0; i < layer.bias.size(); ++i)
      io::append_f32_le(bytes, static_cast<float>(layer.bias(i)));
  }
  io::write_json(io::manifest_path(stem), manifest);
  io::write_bytes(io::blob_path(stem), bytes);
}

Checkpoint load_checkpoint(const std::filesystem::path& stem) {
  const io::Json manifest = io::read_json(io::manifest_path(stem));
  Checkpoint ck;
  std::vector<Index> sizes;
  try {
    sizes = manifest.at("layer_sizes").get<std::vector<Index>>();
    if (manifest.at("activation").get<std::string>() != "relu")
      throw IoError("unsupported activation in checkpoint");
    ck.seed = manifest.at("seed").get<std::uint64_t>();
    ck.train_config = train_config_from_json(manifest.at("train_config"));
  } catch (const io::Json::exception& e) {
    throw IoError("bad checkpoint manifest " + io::manifest_path(stem).string() + ": " + e.what());
  }
  if (sizes.size() < 2) throw IoError("checkpoint needs at least two layer sizes");
  size_t expected = 0;
  for (size_t l = 0; l + 1 < sizes.size(); ++l)
    expected += static_cast<size_t>(sizes[l] * sizes[l + 1] + sizes[l + 1]) * 4;
  const auto bytes = io::read_bytes(io::blob_path(stem));
  if (bytes.size() != expected)
    throw IoError("checkpoint blob has " + std::to_string(bytes.size()) + " bytes, expected " +
                  std::to_string(expected));
  const std::uint8_t* p = bytes.data();
  for (size_t l = 0; l + 1 < sizes.size(); ++l) {
    DenseLayer layer{Matrix(sizes[l + 1], sizes[l]), Vector(sizes[l + 1])};
    for (Index i = 0; i < layer.weights.rows(); ++i)
      for (Index j = 0; j < layer.weights.cols(); ++j, p += 4) layer.weights(i, j) = io::read_f32_le(p);
    for (Index i = 0; i < layer.bias.size(); ++i, p += 4) layer.bias(i) = io::read_f32_le(p);
    ck.model.layers.push_back(std::move(layer));
  }
  return ck;
}

MlpModel round_to_float(const MlpModel& model) {
  MlpModel out = model;
  for (auto& layer : out.layers) {
    layer.weights = layer.weights.cast<float>().cast<double>();
    layer.bias = layer.bias.cast<float>().cast<double>();
  }
  return out;
}

}  // namespace oib
