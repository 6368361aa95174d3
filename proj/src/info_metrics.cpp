#include "oib/info_metrics.hpp"

#include "oib/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace oib {

double gaussian_entropy(const Matrix& sigma) {
  const double n = static_cast<double>(sigma.rows());
  return 0.5 * (n * std::log(2.0 * std::numbers::pi * std::numbers::e) + logdet_psd(sigma));
}

DataMatrix power_normalize(const DataMatrix& z_samples) {
  const CenteredData c = center(z_samples);
  const double power = c.data.values.squaredNorm() / static_cast<double>(z_samples.samples());
  if (!(power > 0.0)) throw NumericalError("power_normalize: samples have zero variance");
  const double scale = std::sqrt(static_cast<double>(z_samples.features()) / power);
  return DataMatrix(z_samples.values * scale, z_samples.centered);
}

EntropyReport sample_entropy(const DataMatrix& z_samples, bool normalize) {
  const DataMatrix z = normalize ? power_normalize(z_samples) : z_samples;
  const Matrix sigma = sample_covariance(center(z).data, 0.0);
  EntropyReport r;
  r.n_z = z.features();
  r.normalized = normalize;
  r.covariance_logdet = logdet_psd(sigma);
  r.entropy_nats = 0.5 * (static_cast<double>(r.n_z) * std::log(2.0 * std::numbers::pi * std::numbers::e) +
                          r.covariance_logdet);
  return r;
}

double gaussian_mi(const Matrix& sigma_z, const Matrix& sigma_z_given_y) {
  require_dims(sigma_z.rows() == sigma_z_given_y.rows() && sigma_z.cols() == sigma_z_given_y.cols(),
               "gaussian_mi: covariance sizes differ");
  // no jitter: the difference of two logdets is sensitive to unequal shifts
  return 0.5 * (logdet_psd(sigma_z, 0.0) - logdet_psd(sigma_z_given_y, 0.0));
}

double linear_map_mi(const Matrix& m, const CovariancePair& cov, const Matrix& sigma_eps) {
  require_dims(m.cols() == cov.sigma_x.rows(), "linear_map_mi: map width");
  require_dims(sigma_eps.rows() == m.rows() && sigma_eps.cols() == m.rows(), "linear_map_mi: noise size");
  if (m.rows() == 0) return 0.0;
  const Matrix sz = symmetrize(m * cov.sigma_x * m.transpose() + sigma_eps);
  const Matrix szy = symmetrize(m * cov.sigma_x_given_y * m.transpose() + sigma_eps);
  return gaussian_mi(sz, szy);
}

double linear_map_mi(const Matrix& m, const CovariancePair& cov) {
  return linear_map_mi(m, cov, Matrix::Zero(m.rows(), m.rows()));
}

double input_mi(const CovariancePair& cov) {
  return gaussian_mi(cov.sigma_x, cov.sigma_x_given_y);
}

LoadingInvarianceReport mi_loading_invariance_check(const GibSolution& sol,
                                                    const CovariancePair& cov, Index n_z,
                                                    int trials, std::uint64_t seed) {
  if (n_z < 1 || n_z > sol.n_x) throw std::out_of_range("mi_loading_invariance_check: n_z");
  const Matrix v = sol.eigen.left_eigenvectors.topRows(n_z);
  LoadingInvarianceReport r;
  r.mi_unit_loadings = linear_map_mi(v, cov);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> log_scale(std::log(0.05), std::log(20.0));
  double lo = r.mi_unit_loadings;
  double hi = r.mi_unit_loadings;
  for (int t = 0; t < trials; ++t) {
    Vector w(n_z);
    for (Index i = 0; i < n_z; ++i) w(i) = std::exp(log_scale(rng));
    const double mi = linear_map_mi(w.asDiagonal() * v, cov);
    lo = std::min(lo, mi);
    hi = std::max(hi, mi);
  }
  r.max_relative_spread = (hi - lo) / std::max(std::abs(r.mi_unit_loadings), 1e-300);
  r.mi_with_noise = linear_map_mi(v, cov, Matrix::Identity(n_z, n_z));
  r.noise_strictly_reduces = r.mi_with_noise < r.mi_unit_loadings;
  return r;
}

ProjectionOptimalityReport random_projection_optimality_check(const CovariancePair& cov, Index n_z,
                                                              int trials, std::uint64_t seed) {
  const GibSolution sol = solve_gib(cov);
  if (n_z < 1 || n_z > sol.n_x) throw std::out_of_range("random_projection_optimality_check: n_z");
  ProjectionOptimalityReport r;
  r.mi_cca = linear_map_mi(sol.eigen.left_eigenvectors.topRows(n_z), cov);
  r.margin = std::numeric_limits<double>::infinity();
  r.best_random_mi = -std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int t = 0; t < trials; ++t) {
    Matrix m(n_z, sol.n_x);
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j) m(i, j) = gauss(rng);
    const double mi = linear_map_mi(m, cov);
    r.best_random_mi = std::max(r.best_random_mi, mi);
    r.margin = std::min(r.margin, r.mi_cca - mi);
  }
  if (trials <= 0) r.margin = 0.0;
  return r;
}

}  // namespace oib
