#pragma once

// IDX image/label ingestion and synthetic jointly Gaussian data with known
// ground truth.

#include "oib/tensor_stats.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace oib {

struct LabeledImageSet {
  DataMatrix images;  // N x (channels*height*width), values in [0, 1], channel-planar
  std::vector<int> labels;
  int height = 0;
  int width = 0;
  int channels = 1;

  Index size() const { return images.samples(); }
  int num_classes() const;
};

class IdxError : public std::runtime_error {
 public:
  enum class Kind { kIo, kBadMagic, kTruncated, kCountMismatch };
  IdxError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Reads an image file (magic 0x00000803, N x H x W, or 0x00000804,
/// N x H x W x C) and a label file (0x00000801). Gzip-compressed files are
/// accepted. Pixels are scaled by 1/255.
LabeledImageSet load_idx(const std::filesystem::path& images_path,
                         const std::filesystem::path& labels_path);

/// Writes the set back as uncompressed IDX, pixels as round(255 v).
void write_idx(const LabeledImageSet& set, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path);

/// Class-stratified seeded subsample of n items, n/K per class (remainder
/// spread over classes in label order, shortfalls redistributed). Output keeps
/// the original relative order.
LabeledImageSet subset(const LabeledImageSet& set, Index n, std::uint64_t seed);

/// Standard MNIST file names under `dir`, with or without .gz.
struct MnistFiles {
  std::filesystem::path train_images, train_labels, test_images, test_labels;
};
std::optional<MnistFiles> find_mnist(const std::filesystem::path& dir);

struct SyntheticGaussianSpec {
  Index n_x = 6;
  Index n_y = 3;
  Index samples = 1000;
  std::uint64_t seed = 0;
  /// When set, x and y each have identity covariance and
  /// cov(x_i, y_i) = canonical_correlations[i]; the conditional eigenvalues
  /// are then 1 - corr_i^2. Otherwise a random PD joint covariance is drawn.
  std::vector<double> canonical_correlations;
};

struct SyntheticGaussianData {
  DataMatrix x;
  DataMatrix y;
  Matrix joint_covariance;  // (n_x + n_y) square, x block first
  CovariancePair true_cov;
  Matrix sigma_xy;
  Matrix sigma_y;
  /// I(z; y) nats of the CCA subspace for n_z = 1..n_x.
  std::vector<double> true_mi_curve;
};

/// Random PD joint covariance for (x, y).
Matrix random_joint_covariance(Index n_x, Index n_y, std::uint64_t seed);

/// Conditional pair from a joint covariance with the x block first.
CovariancePair covariance_pair_from_joint(const Matrix& joint, Index n_x);

SyntheticGaussianData synth_gaussian(const SyntheticGaussianSpec& spec);

/// Small labeled image set for pipeline smoke runs: each class is a random
/// prototype image plus i.i.d. Gaussian pixel noise, clipped to [0, 1].
struct SyntheticImageSpec {
  int height = 8;
  int width = 8;
  int classes = 4;
  Index train = 600;
  Index test = 200;
  double noise = 0.15;
  std::uint64_t seed = 0;
};
std::pair<LabeledImageSet, LabeledImageSet> synth_images(const SyntheticImageSpec& spec);

/// N draws from N(0, cov), one per row.
Matrix sample_gaussian(const Matrix& cov, Index n, std::uint64_t seed);

}  // namespace oib
