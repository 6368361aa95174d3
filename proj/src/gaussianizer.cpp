#include "oib/gaussianizer.hpp"

#include "oib/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace oib {

namespace {

Eigen::MatrixXcd dft_matrix(int n) {
  Eigen::MatrixXcd m(n, n);
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) {
      // k*j reduced mod n before scaling
      const long long r = (static_cast<long long>(k) * j) % n;
      const double angle = -2.0 * std::numbers::pi * static_cast<double>(r) / n;
      m(k, j) = {std::cos(angle), std::sin(angle)};
    }
  }
  return m;
}

bool self_conjugate(int k, int l, int h, int w) {
  return (2 * k) % h == 0 && (2 * l) % w == 0;
}

}  // namespace

RealDft2dPlan::RealDft2dPlan(int height, int width, int channels)
    : height_(height), width_(width), channels_(channels) {
  if (height < 1 || width < 1 || channels < 1)
    throw std::invalid_argument("RealDft2dPlan: dimensions must be positive");
  twiddle_h_ = dft_matrix(height);
  twiddle_w_ = dft_matrix(width);
  slots_.reserve(static_cast<size_t>(height) * width);
  for (int k = 0; k < height; ++k) {
    for (int l = 0; l < width; ++l) {
      if (self_conjugate(k, l, height, width)) {
        slots_.push_back({k, l, Part::kReal});
        continue;
      }
      const int ck = (height - k) % height;
      const int cl = (width - l) % width;
      if (k * width + l < ck * width + cl) {
        slots_.push_back({k, l, Part::kRe});
        slots_.push_back({k, l, Part::kIm});
      }
    }
  }
}

void RealDft2dPlan::forward_plane(const double* in, double* out) const {
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
      img(in, height_, width_);
  const double norm = 1.0 / std::sqrt(static_cast<double>(height_) * width_);
  Eigen::MatrixXcd spec = twiddle_h_ * img.cast<std::complex<double>>() * twiddle_w_;
  spec *= norm;
  const double root2 = std::numbers::sqrt2;
  for (size_t s = 0; s < slots_.size(); ++s) {
    const auto& sl = slots_[s];
    const std::complex<double> c = spec(sl.k, sl.l);
    switch (sl.part) {
      case Part::kReal: out[s] = c.real(); break;
      case Part::kRe: out[s] = root2 * c.real(); break;
      case Part::kIm: out[s] = root2 * c.imag(); break;
    }
  }
}

void RealDft2dPlan::inverse_plane(const double* in, double* out) const {
  Eigen::MatrixXcd spec = Eigen::MatrixXcd::Zero(height_, width_);
  const double inv_root2 = 1.0 / std::numbers::sqrt2;
  for (size_t s = 0; s < slots_.size(); ++s) {
    const auto& sl = slots_[s];
    switch (sl.part) {
      case Part::kReal: spec(sl.k, sl.l) = in[s]; break;
      case Part::kRe: {
        const std::complex<double> c(in[s] * inv_root2, in[s + 1] * inv_root2);
        spec(sl.k, sl.l) = c;
        spec((height_ - sl.k) % height_, (width_ - sl.l) % width_) = std::conj(c);
        break;
      }
      case Part::kIm: break;  // consumed with its kRe partner
    }
  }
  const double norm = 1.0 / std::sqrt(static_cast<double>(height_) * width_);
  Eigen::MatrixXcd img = twiddle_h_.conjugate() * spec * twiddle_w_.conjugate();
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> dst(
      out, height_, width_);
  dst = img.real() * norm;
}

Vector RealDft2dPlan::forward(std::span<const double> image) const {
  require_dims(static_cast<Index>(image.size()) == size(),
               "RealDft2dPlan::forward: expected " + std::to_string(size()) + " values, got " +
                   std::to_string(image.size()));
  Vector out(size());
  const Index plane = static_cast<Index>(height_) * width_;
  for (int c = 0; c < channels_; ++c)
    forward_plane(image.data() + c * plane, out.data() + c * plane);
  return out;
}

Vector RealDft2dPlan::inverse(std::span<const double> coeffs) const {
  require_dims(static_cast<Index>(coeffs.size()) == size(),
               "RealDft2dPlan::inverse: expected " + std::to_string(size()) + " values, got " +
                   std::to_string(coeffs.size()));
  Vector out(size());
  const Index plane = static_cast<Index>(height_) * width_;
  for (int c = 0; c < channels_; ++c)
    inverse_plane(coeffs.data() + c * plane, out.data() + c * plane);
  return out;
}

Matrix RealDft2dPlan::forward_rows(const Matrix& images) const {
  require_dims(images.cols() == size(), "RealDft2dPlan::forward_rows: column count");
  Matrix out(images.rows(), images.cols());
  Vector row(size());
  for (Index i = 0; i < images.rows(); ++i) {
    row = images.row(i).transpose();
    out.row(i) = forward(std::span<const double>(row.data(), static_cast<size_t>(row.size())))
                     .transpose();
  }
  return out;
}

Matrix RealDft2dPlan::inverse_rows(const Matrix& coeffs) const {
  require_dims(coeffs.cols() == size(), "RealDft2dPlan::inverse_rows: column count");
  Matrix out(coeffs.rows(), coeffs.cols());
  Vector row(size());
  for (Index i = 0; i < coeffs.rows(); ++i) {
    row = coeffs.row(i).transpose();
    out.row(i) = inverse(std::span<const double>(row.data(), static_cast<size_t>(row.size())))
                     .transpose();
  }
  return out;
}

HzTestResult henze_zirkler(const DataMatrix& data, double level) {
  const Index n = data.samples();
  const Index d = data.features();
  if (n <= d)
    throw std::invalid_argument("henze_zirkler: need more samples than dimensions (N > d); "
                                "project to fewer coordinates");

  const CenteredData c = center(data);
  const Matrix s = sample_covariance(c.data, 0.0);
  Eigen::LLT<Matrix> llt(s);
  if (llt.info() != Eigen::Success)
    throw NumericalError("henze_zirkler: sample covariance is singular; reduce dimensionality "
                         "or apply shrinkage");
  // Rows y_i with |y_i|^2 the Mahalanobis distance to the mean.
  const Matrix y = llt.matrixL().solve(c.data.values.transpose()).transpose();
  const Vector sq = y.rowwise().squaredNorm();
  const Matrix gram = y * y.transpose();

  const double nd = static_cast<double>(n);
  const double dd = static_cast<double>(d);
  const double beta = std::pow(nd * (2.0 * dd + 1.0) / 4.0, 1.0 / (dd + 4.0)) / std::numbers::sqrt2;
  const double b2 = beta * beta;

  double pair_sum = 0.0;
  for (Index i = 0; i < n; ++i) {
    double row = 0.0;
    for (Index j = i + 1; j < n; ++j) {
      const double dij = std::max(0.0, sq(i) + sq(j) - 2.0 * gram(i, j));
      row += std::exp(-0.5 * b2 * dij);
    }
    pair_sum += row;
  }
  pair_sum = 2.0 * pair_sum + nd;  // symmetric off-diagonal plus D_ii = 0 terms

  double single_sum = 0.0;
  const double shrink = b2 / (2.0 * (1.0 + b2));
  for (Index i = 0; i < n; ++i) single_sum += std::exp(-shrink * sq(i));

  const double hz = pair_sum / nd - 2.0 * std::pow(1.0 + b2, -dd / 2.0) * single_sum +
                    nd * std::pow(1.0 + 2.0 * b2, -dd / 2.0);

  const double a = 1.0 + 2.0 * b2;
  const double b4 = b2 * b2;
  const double b8 = b4 * b4;
  const double mu = 1.0 - std::pow(a, -dd / 2.0) *
                              (1.0 + dd * b2 / a + dd * (dd + 2.0) * b4 / (2.0 * a * a));
  const double w = (1.0 + b2) * (1.0 + 3.0 * b2);
  const double var =
      2.0 * std::pow(1.0 + 4.0 * b2, -dd / 2.0) +
      2.0 * std::pow(a, -dd) * (1.0 + 2.0 * dd * b4 / (a * a) + 3.0 * dd * (dd + 2.0) * b8 / (4.0 * std::pow(a, 4))) -
      4.0 * std::pow(w, -dd / 2.0) * (1.0 + 3.0 * dd * b4 / (2.0 * w) + dd * (dd + 2.0) * b8 / (2.0 * w * w));

  HzTestResult out;
  out.statistic = std::max(0.0, hz);
  out.lognormal_mean = mu;
  out.lognormal_var = var;
  const double log_mu = std::log(std::sqrt(mu * mu * mu * mu / (var + mu * mu)));
  const double log_sd = std::sqrt(std::log((var + mu * mu) / (mu * mu)));
  if (out.statistic <= 0.0) {
    out.p_value = 1.0;
  } else {
    const double zscore = (std::log(out.statistic) - log_mu) / log_sd;
    out.p_value = std::clamp(0.5 * std::erfc(zscore / std::numbers::sqrt2), 0.0, 1.0);
  }
  out.reject = out.p_value < level;
  return out;
}

std::vector<Index> random_informative_columns(const Matrix& data, Index k, std::uint64_t seed,
                                              double min_var_ratio) {
  const Vector mean = data.colwise().mean().transpose();
  const Vector var = (data.rowwise() - mean.transpose()).colwise().squaredNorm().transpose();
  const double cutoff = min_var_ratio * var.maxCoeff();
  std::vector<Index> pool;
  for (Index j = 0; j < data.cols(); ++j)
    if (var(j) > cutoff) pool.push_back(j);
  if (static_cast<Index>(pool.size()) < k)
    throw std::invalid_argument("random_informative_columns: not enough informative columns");
  std::mt19937_64 rng(seed);
  for (Index i = 0; i < k; ++i) {
    std::uniform_int_distribution<size_t> pick(static_cast<size_t>(i), pool.size() - 1);
    std::swap(pool[static_cast<size_t>(i)], pool[pick(rng)]);
  }
  pool.resize(static_cast<size_t>(k));
  return pool;
}

Matrix select_columns(const Matrix& data, std::span<const Index> cols) {
  Matrix out(data.rows(), static_cast<Index>(cols.size()));
  for (size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Index>(j)) = data.col(cols[j]);
  return out;
}

}  // namespace oib
