#include "oib/errors.hpp"
#include "oib/tensor_stats.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstring>
#include <random>

using namespace oib;
using Vector2 = Eigen::Vector2d;
using Vector3 = Eigen::Vector3d;
using Vector4 = Eigen::Vector4d;

namespace {

Matrix random_matrix(Index r, Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = g(rng);
  return m;
}

Matrix random_pd(Index d, std::uint64_t seed) {
  const Matrix a = random_matrix(d, d, seed);
  return a.transpose() * a + Matrix::Identity(d, d);
}

// Conditional pair with sigma_x|y <= sigma_x from a random joint covariance.
CovariancePair random_pair(Index d, std::uint64_t seed) {
  const Matrix j = random_pd(d + 2, seed);
  CovariancePair p;
  p.sigma_x = j.topLeftCorner(d, d);
  p.sigma_x_given_y = j.topLeftCorner(d, d) - j.topRightCorner(d, 2) *
                                                  j.bottomRightCorner(2, 2).inverse() *
                                                  j.bottomLeftCorner(2, d);
  p.sigma_x_given_y = (p.sigma_x_given_y + p.sigma_x_given_y.transpose()) / 2;
  return p;
}

}  // namespace

TEST_CASE("center") {
  Matrix m(2, 2);
  m << 1, 3, 3, 5;
  const CenteredData c = center(DataMatrix(m));
  CHECK(c.data.centered);
  CHECK(c.mean(0) == doctest::Approx(2.0));
  CHECK(c.mean(1) == doctest::Approx(4.0));
  Matrix expect(2, 2);
  expect << -1, -1, 1, 1;
  CHECK((c.data.values - expect).norm() < 1e-15);

  const CenteredData again = center(c.data);
  CHECK((again.data.values - c.data.values).cwiseAbs().maxCoeff() < 1e-12);

  Matrix one(1, 3);
  one << 4, 5, 6;
  const CenteredData single = center(DataMatrix(one));
  CHECK(single.data.values.isZero());
  CHECK((single.mean - one.row(0).transpose()).isZero());
}

TEST_CASE("sample covariance examples") {
  Matrix a(2, 1);
  a << 1, -1;
  CHECK(sample_covariance(DataMatrix(a, true), 0.0)(0, 0) == doctest::Approx(1.0));

  Matrix b(2, 2);
  b << 1, 0, -1, 0;
  const Matrix s = sample_covariance(DataMatrix(b, true), 0.0);
  CHECK(s(0, 0) == doctest::Approx(1.0));
  CHECK(s(1, 1) == 0.0);
  CHECK(s(0, 1) == 0.0);

  const DataMatrix x = center(DataMatrix(random_matrix(50, 4, 1))).data;
  const Matrix raw = sample_covariance(x, 0.0);
  const Matrix full = sample_covariance(x, 1.0 - 1e-9);
  const Matrix target = raw.trace() / 4.0 * Matrix::Identity(4, 4);
  CHECK((full - target).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("sample covariance rejects bad input") {
  CHECK_THROWS(sample_covariance(DataMatrix(random_matrix(5, 2, 2), false), 0.0));
  const DataMatrix x = center(DataMatrix(random_matrix(5, 2, 2))).data;
  CHECK_THROWS(sample_covariance(x, 1.0));
  CHECK_THROWS(sample_covariance(x, -0.1));
  CHECK_THROWS(sample_covariance(DataMatrix(Matrix(0, 2), true), 0.0));
}

TEST_CASE("sample covariance matches a double loop") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Index n = 20 + static_cast<Index>(seed) * 20;
    const Index d = 2 + static_cast<Index>(seed) * 2;
    const DataMatrix x = center(DataMatrix(random_matrix(n, d, seed + 10))).data;
    const Matrix s = sample_covariance(x, 0.0);
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < d; ++j) {
        double acc = 0.0;
        for (Index k = 0; k < n; ++k) acc += x.values(k, i) * x.values(k, j);
        CHECK(std::abs(s(i, j) - acc / static_cast<double>(n)) < 1e-12);
      }
  }
}

TEST_CASE("covariance is bitwise reproducible across the chunk boundary") {
  const DataMatrix x = center(DataMatrix(random_matrix(9000, 3, 3))).data;
  const Matrix a = sample_covariance(x, 1e-4);
  const Matrix b = sample_covariance(x, 1e-4);
  CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * 9) == 0);
  const Matrix direct = x.values.transpose() * x.values / 9000.0;
  CHECK((sample_covariance(x, 0.0) - direct).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("conditional covariance examples") {
  const Matrix i2 = Matrix::Identity(2, 2);
  CHECK(conditional_covariance(i2, i2, i2, 0.0).cwiseAbs().maxCoeff() < 1e-15);
  const Matrix sx = random_pd(3, 4);
  CHECK((conditional_covariance(sx, Matrix::Zero(3, 2), i2, 0.0) - sx).norm() < 1e-14);

  Matrix one(1, 1), half(1, 1);
  one << 1.0;
  half << 0.5;
  CHECK(conditional_covariance(one, half, one, 0.0)(0, 0) == doctest::Approx(0.75));

  CHECK_THROWS_AS(conditional_covariance(one, half, -one, 0.0), NumericalError);
}

TEST_CASE("conditional covariance is monotone in the noise on y") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Matrix j = random_pd(8, 100 + seed);
    const Matrix sx = j.topLeftCorner(4, 4);
    const Matrix sxy = j.topRightCorner(4, 4);
    const Matrix sy = j.bottomRightCorner(4, 4);
    Matrix noisy = sy;
    for (Index k = 0; k < 4; ++k) noisy(k, k) += u(rng);
    const Vector before = Eigen::SelfAdjointEigenSolver<Matrix>(conditional_covariance(sx, sxy, sy, 0.0)).eigenvalues();
    const Vector after = Eigen::SelfAdjointEigenSolver<Matrix>(conditional_covariance(sx, sxy, noisy, 0.0)).eigenvalues();
    for (Index k = 0; k < 4; ++k) CHECK(after(k) >= before(k) - 1e-10);
  }
}

TEST_CASE("estimated pair keeps the PSD order after shrinkage") {
  const Matrix joint = random_pd(6, 77);
  Eigen::LLT<Matrix> llt(joint);
  const Matrix samples = random_matrix(4000, 6, 78) * Matrix(llt.matrixL()).transpose();
  const CenteredData c = center(DataMatrix(samples));
  const DataMatrix x(c.data.values.leftCols(4), true);
  const DataMatrix y(c.data.values.rightCols(2), true);
  for (double g : {0.0, 1e-4, 0.3}) {
    const CovariancePair p = estimate_covariance_pair(x, y, g);
    CHECK(p.shrinkage == g);
    const Vector gap = Eigen::SelfAdjointEigenSolver<Matrix>(p.sigma_x - p.sigma_x_given_y).eigenvalues();
    CHECK(gap.minCoeff() > -1e-8);
    const Vector low = Eigen::SelfAdjointEigenSolver<Matrix>(p.sigma_x_given_y).eigenvalues();
    CHECK(low.minCoeff() > -1e-8);
  }
}

TEST_CASE("gib eigensystem diagonal case") {
  CovariancePair p;
  p.sigma_x = Matrix::Identity(2, 2);
  p.sigma_x_given_y = Vector2(0.9, 0.1).asDiagonal();
  const auto r = gib_eigensystem(p);
  CHECK(r.eigenvalues(0) == doctest::Approx(0.1));
  CHECK(r.eigenvalues(1) == doctest::Approx(0.9));
  CHECK(std::abs(r.left_eigenvectors(0, 1)) == doctest::Approx(1.0));
  CHECK(std::abs(r.left_eigenvectors(1, 0)) == doctest::Approx(1.0));
  CHECK_FALSE(r.clamped);
}

TEST_CASE("gib eigensystem clamps the independent case") {
  CovariancePair p;
  p.sigma_x = random_pd(3, 9);
  p.sigma_x_given_y = p.sigma_x;
  const auto r = gib_eigensystem(p);
  CHECK(r.clamped);
  for (Index i = 0; i < 3; ++i) CHECK(r.eigenvalues(i) == 1.0 - kEigenClamp);
}

TEST_CASE("gib eigensystem left eigenvector residual and orthogonality") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const CovariancePair p = random_pair(5, 200 + seed);
    const auto r = gib_eigensystem(p);
    const Matrix m = p.sigma_x_given_y * p.sigma_x.inverse();  // direct nonsymmetric product
    for (Index i = 0; i < 5; ++i) {
      const Eigen::RowVectorXd v = r.left_eigenvectors.row(i);
      CHECK((v * m - r.eigenvalues(i) * v).norm() < 1e-7);
      CHECK(v.norm() == doctest::Approx(1.0));
      CHECK(r.r_values(i) > 0.0);
      CHECK(r.r_values(i) == doctest::Approx(v * p.sigma_x * v.transpose()));
      CHECK(r.raw_eigenvalues(i) > -1e-8);
      CHECK(r.raw_eigenvalues(i) < 1.0 + 1e-8);
      if (i > 0) CHECK(r.eigenvalues(i) >= r.eigenvalues(i - 1));
    }
    const Matrix gram = r.left_eigenvectors * p.sigma_x * r.left_eigenvectors.transpose();
    for (Index i = 0; i < 5; ++i)
      for (Index j = 0; j < 5; ++j)
        if (i != j) CHECK(std::abs(gram(i, j)) < 1e-7);
  }
}

TEST_CASE("gib eigensystem reports a non-PD sigma_x") {
  CovariancePair p;
  p.sigma_x = Matrix::Zero(2, 2);
  p.sigma_x_given_y = Matrix::Zero(2, 2);
  CHECK_THROWS_AS(gib_eigensystem(p), NumericalError);
}

TEST_CASE("logdet examples") {
  CHECK(logdet_psd(Matrix::Identity(3, 3), 0.0) == doctest::Approx(0.0));
  const Matrix e = std::exp(1.0) * Matrix::Identity(2, 2);
  CHECK(logdet_psd(e, 0.0) == doctest::Approx(2.0));
  const Matrix a = random_pd(4, 31);
  const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(a).eigenvalues();
  CHECK(std::abs(logdet_psd(a) - ev.array().log().sum()) < 1e-8);
  CHECK_THROWS_AS(logdet_psd(-Matrix::Identity(2, 2)), NumericalError);
}
