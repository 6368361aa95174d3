#include "oib/tensor_stats.hpp"

#include "oib/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace oib {

namespace {

// Row chunk for covariance accumulation. Partial sums are reduced in chunk
// order.
constexpr Index kCovChunk = 4096;

Matrix chunked_gram(const Matrix& a, const Matrix& b) {
  Matrix acc = Matrix::Zero(a.cols(), b.cols());
  for (Index start = 0; start < a.rows(); start += kCovChunk) {
    const Index len = std::min(kCovChunk, a.rows() - start);
    acc.noalias() += a.middleRows(start, len).transpose() * b.middleRows(start, len);
  }
  return acc;
}

}  // namespace

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

CenteredData center(const DataMatrix& data) {
  if (data.samples() < 1) throw DimensionError("center: need at least one sample");
  Vector mean = data.values.colwise().mean().transpose();
  Matrix centered = data.values.rowwise() - mean.transpose();
  return {DataMatrix(std::move(centered), true), std::move(mean)};
}

Matrix sample_covariance(const DataMatrix& data, double shrinkage) {
  if (data.samples() == 0) throw DimensionError("sample_covariance: no samples");
  if (!data.centered) throw std::invalid_argument("sample_covariance: data must be centered");
  if (!(shrinkage >= 0.0 && shrinkage < 1.0))
    throw std::invalid_argument("sample_covariance: shrinkage must lie in [0, 1)");

  const double n = static_cast<double>(data.samples());
  Matrix s = symmetrize(chunked_gram(data.values, data.values) / n);
  if (shrinkage > 0.0) {
    const double scale = s.trace() / static_cast<double>(s.rows());
    s *= (1.0 - shrinkage);
    s.diagonal().array() += shrinkage * scale;
  }
  return s;
}

Matrix cross_covariance(const DataMatrix& x, const DataMatrix& y) {
  require_dims(x.samples() == y.samples(), "cross_covariance: row counts differ");
  if (x.samples() == 0) throw DimensionError("cross_covariance: no samples");
  return chunked_gram(x.values, y.values) / static_cast<double>(x.samples());
}

Matrix conditional_covariance(const Matrix& sigma_x, const Matrix& sigma_xy,
                              const Matrix& sigma_y, double ridge) {
  require_dims(sigma_x.rows() == sigma_x.cols(), "conditional_covariance: sigma_x not square");
  require_dims(sigma_y.rows() == sigma_y.cols(), "conditional_covariance: sigma_y not square");
  require_dims(sigma_xy.rows() == sigma_x.rows() && sigma_xy.cols() == sigma_y.rows(),
               "conditional_covariance: sigma_xy shape");
  if (sigma_y.rows() == 0) return symmetrize(sigma_x);

  Matrix sy = sigma_y;
  sy.diagonal().array() += ridge;
  Eigen::LLT<Matrix> llt(sy);
  if (llt.info() != Eigen::Success)
    throw NumericalError("conditional_covariance: Cholesky of sigma_y + ridge I failed; increase ridge");
  // sigma_xy sy^-1 sigma_yx = (L^-1 sigma_yx)^T (L^-1 sigma_yx)
  Matrix half = llt.matrixL().solve(sigma_xy.transpose());
  return symmetrize(sigma_x - half.transpose() * half);
}

CovariancePair estimate_covariance_pair(const DataMatrix& x, const DataMatrix& y,
                                        double shrinkage, double ridge) {
  require_dims(x.samples() == y.samples(), "estimate_covariance_pair: row counts differ");
  const Matrix sx_raw = sample_covariance(x, 0.0);
  CovariancePair out;
  out.shrinkage = shrinkage;
  Matrix cond = sx_raw;
  if (y.features() > 0) {
    const Matrix sy = sample_covariance(y, 0.0);
    const Matrix sxy = cross_covariance(x, y);
    cond = conditional_covariance(sx_raw, sxy, sy, ridge);
  }
  const double scale = sx_raw.trace() / static_cast<double>(sx_raw.rows());
  out.sigma_x = (1.0 - shrinkage) * sx_raw;
  out.sigma_x.diagonal().array() += shrinkage * scale;
  out.sigma_x_given_y = (1.0 - shrinkage) * cond;
  out.sigma_x_given_y.diagonal().array() += shrinkage * scale;
  return out;
}

GeneralizedEigenResult gib_eigensystem(const CovariancePair& cov) {
  const Index d = cov.sigma_x.rows();
  require_dims(cov.sigma_x.cols() == d && cov.sigma_x_given_y.rows() == d &&
                   cov.sigma_x_given_y.cols() == d,
               "gib_eigensystem: covariance shapes differ");

  Eigen::LLT<Matrix> llt(cov.sigma_x);
  if (llt.info() != Eigen::Success)
    throw NumericalError("gib_eigensystem: sigma_x is not positive definite; raise the shrinkage");

  // Whitened problem: L^-1 sigma_x|y L^-T u = lambda u, then v = L^-T u.
  const auto lower = llt.matrixL();
  Matrix tmp = lower.solve(cov.sigma_x_given_y);
  Matrix whitened = symmetrize(lower.solve(tmp.transpose()));
  Eigen::SelfAdjointEigenSolver<Matrix> eig(whitened);
  if (eig.info() != Eigen::Success) throw NumericalError("gib_eigensystem: eigensolver did not converge");

  Matrix vectors = llt.matrixU().solve(eig.eigenvectors());  // columns v_i

  std::vector<Index> order(static_cast<size_t>(d));
  std::iota(order.begin(), order.end(), Index{0});
  const Vector& vals = eig.eigenvalues();
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return vals(a) < vals(b); });

  GeneralizedEigenResult out;
  out.eigenvalues.resize(d);
  out.raw_eigenvalues.resize(d);
  out.left_eigenvectors.resize(d, d);
  out.r_values.resize(d);
  for (Index i = 0; i < d; ++i) {
    const Index src = order[static_cast<size_t>(i)];
    Vector v = vectors.col(src);
    v /= v.norm();
    // Sign convention: largest-magnitude entry positive.
    Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    const double raw = vals(src);
    const double lam = std::clamp(raw, kEigenClamp, 1.0 - kEigenClamp);
    if (lam != raw) out.clamped = true;
    out.raw_eigenvalues(i) = raw;
    out.eigenvalues(i) = lam;
    out.left_eigenvectors.row(i) = v.transpose();
    out.r_values(i) = v.dot(cov.sigma_x * v);
  }
  return out;
}

double logdet_psd(const Matrix& m, std::optional<double> jitter) {
  require_dims(m.rows() == m.cols(), "logdet_psd: matrix not square");
  if (m.rows() == 0) return 0.0;
  const double j = jitter.value_or(1e-10 * std::abs(m.trace()) / static_cast<double>(m.rows()));
  Matrix shifted = symmetrize(m);
  shifted.diagonal().array() += j;
  Eigen::LLT<Matrix> llt(shifted);
  if (llt.info() != Eigen::Success)
    throw NumericalError("logdet_psd: Cholesky failed after jitter; matrix is not PSD");
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace oib
