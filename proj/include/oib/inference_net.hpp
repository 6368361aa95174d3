#pragma once

// Fully connected ReLU classifier trained with Adam on softmax cross-entropy,
// plus the pieces needed to cut it after its first linear stage: L0
// extraction, regression targets, truncated forward passes and head
// retraining.

#include "oib/gib_compressor.hpp"
#include "oib/reexpander.hpp"
#include "oib/tensor_stats.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace oib {

struct DenseLayer {
  Matrix weights;  // out x in
  Vector bias;     // out
};

/// ReLU after every layer except the last, which emits logits.
struct MlpModel {
  std::vector<DenseLayer> layers;

  std::vector<Index> layer_sizes() const;
  Index input_dim() const { return layers.front().weights.cols(); }
  Index output_dim() const { return layers.back().weights.rows(); }
};

/// Layer sizes of the MNIST shallow network: 784-256-128-64-16-10.
std::vector<Index> shallow_mnist_layer_sizes();

/// He-uniform weights U(-sqrt(6/fan_in), sqrt(6/fan_in)), zero biases.
MlpModel make_mlp(std::span<const Index> sizes, std::uint64_t seed);

struct TrainConfig {
  int epochs = 30;
  double learning_rate = 1e-3;
  int batch_size = 32;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
};

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct TrainResult {
  MlpModel model;
  std::vector<double> loss_trace;  // mean training loss per epoch
};

/// Per-parameter gradients of the mean cross-entropy over a batch.
struct Gradients {
  std::vector<Matrix> weights;
  std::vector<Vector> bias;
};

/// Loss and gradients for layers [start_layer, end). With start_layer > 0 the
/// input is a pre-activation of layer start_layer-1 and is passed through ReLU
/// first.
double loss_and_gradients(const MlpModel& model, Index start_layer, const Matrix& inputs,
                          std::span<const int> labels, Gradients* grads);

TrainResult train(const MlpModel& model_init, const Matrix& inputs, std::span<const int> labels,
                  const TrainConfig& cfg);

std::pair<Matrix, Vector> extract_l0(const MlpModel& model);

struct RegressionTargetSet {
  DataMatrix x_tilde;
  DataMatrix y_tilde;
  double noise_lambda = 0.0;
};

/// 0.1 sqrt(mean diagonal of the pre-activation covariance).
double default_target_noise(const MlpModel& model, const Matrix& x_tilde);

/// y = L0 x + b0 + lambda eta with eta ~ N(0, I) from `seed`.
RegressionTargetSet make_regression_targets(const MlpModel& model, const DataMatrix& x_tilde,
                                            std::optional<double> lambda, std::uint64_t seed);

/// Pre-activations of the first layer for each row.
Matrix first_layer_preactivations(const MlpModel& model, const Matrix& x_tilde);

/// start_layer = 0 is the full forward pass; otherwise `input` stands in for
/// the pre-activation of layer start_layer-1 and passes through ReLU before
/// layers start_layer.. run.
Vector forward_from_layer(const MlpModel& model, Index start_layer, const Vector& input);
Matrix forward_rows_from_layer(const MlpModel& model, Index start_layer, const Matrix& inputs);

std::vector<int> predict_labels(const Matrix& logits);
double accuracy(const Matrix& logits, std::span<const int> labels);

/// Trains layers 1.. on reconstructed first-layer pre-activations. Layer 0 is
/// carried along untouched and unused by the truncated network.
TrainResult retrain_head(const MlpModel& model, const Matrix& reconstructed_inputs,
                         std::span<const int> labels, const TrainConfig& cfg);

/// Fresh classifier for compressed features. head_sizes[0] must equal n_z.
/// Training runs on per-feature standardized z; the standardization is folded
/// into the first layer of the returned model.
TrainResult train_head_on_z(const Matrix& z_train, std::span<const int> labels,
                            std::span<const Index> head_sizes, const TrainConfig& cfg);

/// One head for several compression ratios: each mini-batch draws a ratio
/// uniformly and uses that ratio's reconstructed inputs.
TrainResult train_multi_rho_head(const MlpModel& model,
                                 std::span<const Matrix> reconstructed_per_rho,
                                 std::span<const int> labels, const TrainConfig& cfg);

/// Builds the reconstructions from matched compressor / re-expander families
/// (deterministic encoding) and delegates.
TrainResult train_multi_rho_head(const MlpModel& model, std::span<const Compressor> compressors,
                                 std::span<const Reexpander> reexpanders, const Matrix& x_tilde,
                                 std::span<const int> labels, const TrainConfig& cfg);

/// <stem>.json {layer_sizes, activation, seed, train_config} and <stem>.bin
/// with float32 little-endian weights then bias per layer, weights row-major.
void save_checkpoint(const MlpModel& model, const std::filesystem::path& stem,
                     std::uint64_t seed, const TrainConfig& cfg);

struct Checkpoint {
  MlpModel model;
  std::uint64_t seed = 0;
  TrainConfig train_config;
};
Checkpoint load_checkpoint(const std::filesystem::path& stem);

/// Rounds every parameter through float32, the checkpoint precision.
MlpModel round_to_float(const MlpModel& model);

}  // namespace oib
