#pragma once

// Dense linear algebra and sample statistics shared by every stage of the
// pipeline. Matrices follow the samples-by-features convention: one row per
// observation.

#include <Eigen/Dense>

#include <optional>

namespace oib {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// N samples by d features. `centered` records that column means are zero.
struct DataMatrix {
  Matrix values;
  bool centered = false;

  DataMatrix() = default;
  explicit DataMatrix(Matrix v, bool is_centered = false)
      : values(std::move(v)), centered(is_centered) {}

  Index samples() const { return values.rows(); }
  Index features() const { return values.cols(); }
};

struct CenteredData {
  DataMatrix data;
  Vector mean;
};

/// Covariance of x and conditional covariance of x given y, after shrinkage.
struct CovariancePair {
  Matrix sigma_x;
  Matrix sigma_x_given_y;
  double shrinkage = 0.0;
};

/// Solution of sigma_x_given_y v = lambda sigma_x v, ascending in lambda.
/// Rows of `left_eigenvectors` are unit-norm v_i^T, which are the left
/// eigenvectors of sigma_x_given_y * inverse(sigma_x).
struct GeneralizedEigenResult {
  Vector eigenvalues;
  Vector raw_eigenvalues;  // before clamping
  Matrix left_eigenvectors;
  Vector r_values;  // v_i^T sigma_x v_i
  bool clamped = false;
};

inline constexpr double kEigenClamp = 1e-9;
inline constexpr double kDefaultShrinkage = 1e-4;

CenteredData center(const DataMatrix& data);

/// (1-g) S + g (tr(S)/d) I with S = X^T X / N. Requires centered input.
Matrix sample_covariance(const DataMatrix& data, double shrinkage);

/// X^T Y / N for two centered sample sets with matching row counts.
Matrix cross_covariance(const DataMatrix& x, const DataMatrix& y);

/// Schur complement sigma_x - sigma_xy (sigma_y + ridge I)^-1 sigma_xy^T,
/// symmetrized.
Matrix conditional_covariance(const Matrix& sigma_x, const Matrix& sigma_xy,
                              const Matrix& sigma_y, double ridge);

/// Estimates the pair from centered paired samples. The shrinkage is applied
/// to both: sigma_x|y = (1-g) S_x|y + g (tr(S_x)/d) I.
CovariancePair estimate_covariance_pair(const DataMatrix& x, const DataMatrix& y,
                                        double shrinkage, double ridge = 0.0);

GeneralizedEigenResult gib_eigensystem(const CovariancePair& cov);

/// 2 * sum log diag chol(M + jitter I). Default jitter is 1e-10 tr(M)/d.
double logdet_psd(const Matrix& m, std::optional<double> jitter = std::nullopt);

/// (M + M^T)/2
Matrix symmetrize(const Matrix& m);

}  // namespace oib
