#pragma once

// End-to-end experiment commands behind the `oib` executable. Each command
// takes a validated config, writes its artifacts under config.output_dir and
// returns a JSON summary.

#include "oib/datasets.hpp"
#include "oib/gib_compressor.hpp"
#include "oib/inference_net.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace oib {

enum class EncodingMode { kDeterministic, kStochastic };
EncodingMode encoding_mode_from_string(const std::string& s);
std::string to_string(EncodingMode m);

struct DatasetConfig {
  std::string kind = "idx";  // "idx" or "synthetic"
  /// Directory holding the four MNIST-named files. Empty means $OIB_MNIST_DIR,
  /// then ./data/mnist.
  std::string dir;
  Index train_subset = 10000;  // 0 keeps the full split
  Index test_subset = 2000;
  SyntheticImageSpec synthetic;
};

struct HzConfig {
  int projections = 20;
  Index dims = 10;
  Index samples = 2000;
  double level = 0.05;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  std::vector<Index> layer_sizes = shallow_mnist_layer_sizes();
  TrainConfig train;
  TrainConfig retrain;
  std::vector<CompressorKind> kinds = {CompressorKind::kOib, CompressorKind::kCca, CompressorKind::kPca};
  std::vector<Index> n_z_grid = {10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
  std::optional<double> lambda;  // nullopt: default_target_noise
  double shrinkage = kDefaultShrinkage;
  double ridge = 0.0;
  std::uint64_t seed = 0;
  EncodingMode encoding = EncodingMode::kDeterministic;
  EncodingMode entropy_encoding = EncodingMode::kStochastic;
  /// Encoding used for the least-squares re-expansion fit.
  EncodingMode fit_encoding = EncodingMode::kDeterministic;
  HzConfig hz;
  std::string output_dir = "out";
};

/// Throws ConfigError on unknown keys, wrong types or invalid values.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::filesystem::path& path);

/// FNV-1a over the canonical JSON dump.
std::string config_hash(const ExperimentConfig& cfg);

/// Train / test images after subsetting, mapped through the DFT and centered
/// by the training mean.
struct PreparedData {
  LabeledImageSet train_raw;
  LabeledImageSet test_raw;
  Matrix x_train;
  Matrix x_test;
  Vector train_mean;
};
PreparedData prepare_data(const ExperimentConfig& cfg);

std::filesystem::path checkpoint_stem(const ExperimentConfig& cfg);
std::filesystem::path artifact_stem(const ExperimentConfig& cfg, CompressorKind kind, Index n_z,
                                    const std::string& what);

nlohmann::json cmd_train_base(const ExperimentConfig& cfg);
nlohmann::json cmd_fit_oib(const ExperimentConfig& cfg);
nlohmann::json cmd_evaluate(const ExperimentConfig& cfg);

enum class RetrainMode { kPerRhoHead, kPerRhoOnZ, kAverage };
RetrainMode retrain_mode_from_string(const std::string& s);
std::string to_string(RetrainMode m);
nlohmann::json cmd_retrain(const ExperimentConfig& cfg, const std::vector<RetrainMode>& modes);

nlohmann::json cmd_hz_test(const ExperimentConfig& cfg);
nlohmann::json cmd_macs(const ExperimentConfig& cfg);
nlohmann::json cmd_synth_check(const ExperimentConfig& cfg);

}  // namespace oib
