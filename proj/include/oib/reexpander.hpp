#pragma once

// Linear re-expansion y_r = theta z + target_mean from compressed features
// back to the first-layer pre-activation space.

#include "oib/tensor_stats.hpp"

#include <filesystem>
#include <optional>

namespace oib {

enum class FitMethod { kLmmsePopulation, kLsSample };

struct Reexpander {
  Matrix theta;  // n_y x n_z
  FitMethod fit_method = FitMethod::kLsSample;
  /// Offset added after theta z. For sample fits this is mean(y) - theta mean(z),
  /// so uncentered z can be fed directly.
  Vector target_mean;

  Index n_y() const { return theta.rows(); }
  Index n_z() const { return theta.cols(); }
};

/// theta = C_yz (C_zz + ridge I)^-1.
Reexpander fit_lmmse(const Matrix& c_yz, const Matrix& c_zz, double ridge = 0.0,
                     std::optional<Vector> target_mean = std::nullopt);

struct LsOptions {
  /// nullopt selects 1e-8 tr(Z^T Z)/n_z on the centered design.
  std::optional<double> ridge;
  /// With ridge = 0 and a rank-deficient design, fall back to the SVD
  /// pseudo-inverse instead of raising.
  bool svd_fallback = true;
};

/// Least squares fit of y on z over training pairs. Both are centered
/// internally; theta is the transpose of (Z^T Z)^-1 Z^T Y.
Reexpander fit_ls(const DataMatrix& z_train, const DataMatrix& y_train, const LsOptions& opts = {});

Vector reexpand(const Reexpander& r, const Vector& z);
/// Row-wise reexpand over an N x n_z matrix.
Matrix reexpand_rows(const Reexpander& r, const Matrix& z);

/// mse - (n_y / 2 pi e) exp(2 H(y|z) / n_y). Non-negative for any estimator.
double mse_entropy_gap(double mse, double cond_entropy, Index n_y);

/// Writes <stem>.json {fit_method, n_y, n_z} and <stem>.bin holding theta then
/// target_mean, row-major little-endian float64.
void save_reexpander(const Reexpander& r, const std::filesystem::path& stem);
Reexpander load_reexpander(const std::filesystem::path& stem);

}  // namespace oib
