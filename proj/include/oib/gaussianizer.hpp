#pragma once

// Orthonormal real-packed 2D DFT used as the Gaussianizing transform, plus the
// Henze-Zirkler multivariate normality test.

#include "oib/tensor_stats.hpp"

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

namespace oib {

/// Real orthonormal 2D DFT on height x width images, applied per channel.
///
/// Packing: slots are emitted walking the spectrum (k, l) row-major. A
/// self-conjugate coefficient (k and l each 0 or the Nyquist index) is real
/// and takes one slot. Every other conjugate pair is visited once, at its
/// lower linear index, and takes two consecutive slots sqrt(2) Re, sqrt(2) Im.
/// With the unitary 1/sqrt(HW) normalization the map is orthonormal and slot 0
/// holds the DC term. Input images are channel-planar, each plane row-major.
class RealDft2dPlan {
 public:
  RealDft2dPlan(int height, int width, int channels = 1);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  Index size() const { return static_cast<Index>(height_) * width_ * channels_; }

  Vector forward(std::span<const double> image) const;
  Vector inverse(std::span<const double> coeffs) const;

  /// Row-wise forward/inverse over an N x n_x sample matrix.
  Matrix forward_rows(const Matrix& images) const;
  Matrix inverse_rows(const Matrix& coeffs) const;

 private:
  enum class Part : std::uint8_t { kReal, kRe, kIm };
  struct Slot {
    int k;
    int l;
    Part part;
  };

  void forward_plane(const double* in, double* out) const;
  void inverse_plane(const double* in, double* out) const;

  int height_;
  int width_;
  int channels_;
  Eigen::MatrixXcd twiddle_h_;  // exp(-2 pi i k m / H)
  Eigen::MatrixXcd twiddle_w_;
  std::vector<Slot> slots_;
};

struct HzTestResult {
  double statistic = 0.0;
  double lognormal_mean = 0.0;  // mean of HZ under the null
  double lognormal_var = 0.0;   // variance of HZ under the null
  double p_value = 1.0;
  bool reject = false;  // p_value < level
};

/// Henze-Zirkler test with beta = ((N(2d+1)/4)^(1/(d+4)))/sqrt(2) and a
/// log-normal p-value. Requires N > d and a positive definite sample
/// covariance (divisor N).
HzTestResult henze_zirkler(const DataMatrix& data, double level = 0.05);

/// Indices of `k` distinct random columns whose variance exceeds
/// `min_var_ratio` times the largest column variance.
std::vector<Index> random_informative_columns(const Matrix& data, Index k, std::uint64_t seed,
                                              double min_var_ratio = 1e-6);

/// Copies the listed columns into a new matrix.
Matrix select_columns(const Matrix& data, std::span<const Index> cols);

}  // namespace oib
