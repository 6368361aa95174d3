#pragma once

// Gaussian entropy and mutual information, in nats.

#include "oib/gib_compressor.hpp"
#include "oib/tensor_stats.hpp"

#include <cstdint>

namespace oib {

struct EntropyReport {
  Index n_z = 0;
  double entropy_nats = 0.0;
  bool normalized = false;
  double covariance_logdet = 0.0;
};

/// 1/2 (n log(2 pi e) + logdet sigma)
double gaussian_entropy(const Matrix& sigma);

/// Scales every sample by sqrt(n_z / tr(cov)) so the mean per-coordinate
/// power is one.
DataMatrix power_normalize(const DataMatrix& z_samples);

/// Entropy of the Gaussian fitted to samples, optionally after power
/// normalization.
EntropyReport sample_entropy(const DataMatrix& z_samples, bool normalize);

/// 1/2 (logdet sigma_z - logdet sigma_z|y)
double gaussian_mi(const Matrix& sigma_z, const Matrix& sigma_z_given_y);

/// I(z; y) for z = M x + eps with eps ~ N(0, sigma_eps).
double linear_map_mi(const Matrix& m, const CovariancePair& cov, const Matrix& sigma_eps);
/// Noise-free variant.
double linear_map_mi(const Matrix& m, const CovariancePair& cov);

/// I(x; y) from the pair itself.
double input_mi(const CovariancePair& cov);

struct LoadingInvarianceReport {
  double max_relative_spread = 0.0;  // across random positive loadings
  double mi_unit_loadings = 0.0;     // CCA rows, eps = 0
  double mi_with_noise = 0.0;        // CCA rows, sigma_eps = I
  bool noise_strictly_reduces = false;
};

/// Evaluates I(z; y) for M = W V over `trials` random positive diagonal W
/// with eps = 0, and once more with sigma_eps = I.
LoadingInvarianceReport mi_loading_invariance_check(const GibSolution& sol,
                                                    const CovariancePair& cov, Index n_z,
                                                    int trials, std::uint64_t seed);

struct ProjectionOptimalityReport {
  double mi_cca = 0.0;
  double best_random_mi = 0.0;
  double margin = 0.0;  // min over trials of mi_cca - mi_random
};

/// Compares the CCA subspace with random Gaussian rank-n_z projections.
ProjectionOptimalityReport random_projection_optimality_check(const CovariancePair& cov, Index n_z,
                                                              int trials, std::uint64_t seed);

}  // namespace oib
