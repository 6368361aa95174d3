#pragma once

// Closed-form Gaussian information-bottleneck compression matrices and the
// CCA / PCA linear baselines that share their encoder structure.

#include "oib/tensor_stats.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace oib {

enum class CompressorKind { kOib, kCca, kPca };

std::string_view to_string(CompressorKind kind);
CompressorKind compressor_kind_from_string(std::string_view name);

struct GibSolution {
  GeneralizedEigenResult eigen;
  Vector beta_critical;  // 1 / (1 - lambda_i), ascending
  Index n_x = 0;
};

/// Linear feature extractor z = A x (+ xi). An empty compressor (n_z = 0)
/// is the all-zero case below the first critical beta.
struct Compressor {
  CompressorKind kind = CompressorKind::kOib;
  Matrix matrix_a;  // n_z x n_x
  Index input_dim = 0;
  double beta = 0.0;       // OIB only
  double noise_std = 0.0;  // 1 for the stochastic GIB mapping, 0 deterministic

  Index n_x() const { return input_dim; }
  Index n_z() const { return matrix_a.rows(); }
  bool empty() const { return matrix_a.rows() == 0; }
  /// n_x / n_z; infinite for the empty compressor.
  double rho() const;
};

GibSolution solve_gib(const CovariancePair& cov);

/// Rows alpha_i v_i^T for every i with beta > beta_i^c, where
/// alpha_i = sqrt((beta (1 - lambda_i) - 1) / (lambda_i r_i)).
Compressor compressor_at_beta(const GibSolution& sol, double beta, double noise_std = 1.0);

/// Beta at the log-midpoint of (beta_{n_z}^c, beta_{n_z+1}^c), with
/// beta_{n_x+1}^c taken as 2 beta_{n_x}^c.
double beta_for_size(const GibSolution& sol, Index n_z);

/// Exactly n_z OIB rows at beta_for_size(n_z).
Compressor compressor_at_size(const GibSolution& sol, Index n_z, double noise_std = 1.0);

/// First n_z canonical directions with unit loadings.
Compressor cca_compressor(const GibSolution& sol, Index n_z, double noise_std = 0.0);

/// Top-n_z variance eigenvectors of sigma_x, descending eigenvalue.
Compressor pca_compressor(const Matrix& sigma_x, Index n_z, double noise_std = 0.0);

/// Same compressor with a different noise level.
Compressor with_noise(Compressor comp, double noise_std);

/// A x plus, when noise_std > 0, i.i.d. N(0, noise_std^2) noise. A given seed
/// makes the draw reproducible; without one the generator is seeded from
/// std::random_device.
Vector encode(const Compressor& comp, const Vector& x_tilde,
              std::optional<std::uint64_t> seed = std::nullopt);

/// Row-wise encoding of an N x n_x matrix. Noise for the whole batch is drawn
/// from one generator, row by row.
Matrix encode_rows(const Compressor& comp, const Matrix& x_tilde,
                   std::optional<std::uint64_t> seed = std::nullopt);

/// Writes <stem>.json {kind, n_x, n_z, beta, noise_std} and <stem>.bin with
/// matrix_a as row-major little-endian float64.
void save_compressor(const Compressor& comp, const std::filesystem::path& stem);
Compressor load_compressor(const std::filesystem::path& stem);

}  // namespace oib
