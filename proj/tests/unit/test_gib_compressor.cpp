#include "oib/errors.hpp"
#include "oib/gib_compressor.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstring>
#include <filesystem>
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

CovariancePair random_pair(Index d, Index d_y, std::uint64_t seed) {
  const Matrix a = random_matrix(d + d_y, d + d_y, seed);
  const Matrix j = a.transpose() * a + 0.5 * Matrix::Identity(d + d_y, d + d_y);
  CovariancePair p;
  p.sigma_x = j.topLeftCorner(d, d);
  const Matrix c = j.topLeftCorner(d, d) -
                   j.topRightCorner(d, d_y) * j.bottomRightCorner(d_y, d_y).inverse() * j.bottomLeftCorner(d_y, d);
  p.sigma_x_given_y = (c + c.transpose()) / 2;
  return p;
}

CovariancePair diagonal_pair(std::vector<double> lambdas) {
  const Index d = static_cast<Index>(lambdas.size());
  CovariancePair p;
  p.sigma_x = Matrix::Identity(d, d);
  p.sigma_x_given_y = Vector::Map(lambdas.data(), d).asDiagonal();
  return p;
}

// Largest principal angle between the row spaces of a and b.
double subspace_angle(const Matrix& a, const Matrix& b) {
  const Matrix qa = Eigen::HouseholderQR<Matrix>(a.transpose()).householderQ() * Matrix::Identity(a.cols(), a.rows());
  const Matrix qb = Eigen::HouseholderQR<Matrix>(b.transpose()).householderQ() * Matrix::Identity(b.cols(), b.rows());
  const Vector s = Eigen::JacobiSVD<Matrix>(qa.transpose() * qb).singularValues();
  return std::acos(std::min(1.0, s.minCoeff()));
}

}  // namespace

TEST_CASE("critical betas") {
  CHECK(solve_gib(diagonal_pair({0.5})).beta_critical(0) == doctest::Approx(2.0));
  const GibSolution s = solve_gib(diagonal_pair({0.8, 0.2}));
  CHECK(s.beta_critical(0) == doctest::Approx(1.25));
  CHECK(s.beta_critical(1) == doctest::Approx(5.0));
  const GibSolution c = solve_gib(diagonal_pair({1.0}));
  CHECK(std::isfinite(c.beta_critical(0)));
  CHECK(c.beta_critical(0) == doctest::Approx(1e9).epsilon(1e-6));
}

TEST_CASE("compressor at beta follows the loading formula") {
  const GibSolution one = solve_gib(diagonal_pair({0.5}));
  const Compressor c = compressor_at_beta(one, 4.0);
  REQUIRE(c.n_z() == 1);
  CHECK(std::abs(c.matrix_a(0, 0)) == doctest::Approx(std::sqrt(2.0)));
  CHECK(c.noise_std == 1.0);

  const Compressor empty = compressor_at_beta(one, 2.0);
  CHECK(empty.empty());
  CHECK(empty.n_x() == 1);
  CHECK(std::isinf(empty.rho()));
  CHECK_THROWS(compressor_at_beta(one, -1.0));

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const CovariancePair p = random_pair(6, 6, 40 + seed);
    const GibSolution sol = solve_gib(p);
    for (double beta : {1.5, 3.0, 10.0, 100.0}) {
      const Compressor a = compressor_at_beta(sol, beta);
      for (Index i = 0; i < a.n_z(); ++i) {
        const double alpha_sq = a.matrix_a.row(i).squaredNorm();
        const double lam = sol.eigen.eigenvalues(i);
        const double r = sol.eigen.left_eigenvectors.row(i) * p.sigma_x * sol.eigen.left_eigenvectors.row(i).transpose();
        CHECK(std::abs(alpha_sq * lam * r + 1.0 - beta * (1.0 - lam)) < 1e-8);
      }
    }
  }
}

TEST_CASE("row count steps by one at each critical beta") {
  const GibSolution sol = solve_gib(random_pair(6, 6, 3));
  CHECK(compressor_at_beta(sol, sol.beta_critical(0)).empty());
  for (Index k = 0; k < 6; ++k) {
    const double bc = sol.beta_critical(k);
    CHECK(compressor_at_beta(sol, bc).n_z() == k);
    CHECK(compressor_at_beta(sol, bc * (1 + 1e-9)).n_z() == k + 1);
  }
  Index prev = 0;
  for (double b = 1.0; b < 1e4; b *= 1.1) {
    const Index n = compressor_at_beta(sol, b).n_z();
    CHECK(n >= prev);
    prev = n;
  }
}

TEST_CASE("compressor at size") {
  const GibSolution sol = solve_gib(random_pair(5, 5, 8));
  const Compressor all = compressor_at_size(sol, 5);
  CHECK(all.n_z() == 5);
  const Compressor one = compressor_at_size(sol, 1);
  CHECK(one.n_z() == 1);
  CHECK(std::abs(one.matrix_a.row(0).normalized().dot(sol.eigen.left_eigenvectors.row(0))) ==
        doctest::Approx(1.0).epsilon(1e-12));
  const Compressor three = compressor_at_size(sol, 3);
  CHECK(subspace_angle(three.matrix_a, sol.eigen.left_eigenvectors.topRows(3)) < 1e-7);
  CHECK(three.beta > sol.beta_critical(2));
  CHECK(three.beta < sol.beta_critical(3));
  CHECK(three.beta == doctest::Approx(std::sqrt(sol.beta_critical(2) * sol.beta_critical(3))));
  CHECK(beta_for_size(sol, 5) == doctest::Approx(std::sqrt(2.0) * sol.beta_critical(4)));
  CHECK_THROWS_AS(compressor_at_size(sol, 0), std::out_of_range);
  CHECK_THROWS_AS(compressor_at_size(sol, 6), std::out_of_range);

  // Directions nest across sizes.
  for (Index k = 1; k <= 3; ++k)
    for (Index i = 0; i < k; ++i)
      CHECK(std::abs(compressor_at_size(sol, k).matrix_a.row(i).normalized().dot(
                three.matrix_a.row(i).normalized())) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("tied critical values still isolate the requested size") {
  const GibSolution sol = solve_gib(diagonal_pair({0.3, 0.3, 0.3, 0.7}));
  const Compressor c = compressor_at_size(sol, 2);
  CHECK(c.n_z() == 2);
}

TEST_CASE("cca and pca baselines") {
  const GibSolution sol = solve_gib(random_pair(5, 5, 12));
  const Compressor oib = compressor_at_size(sol, 3);
  const Compressor cca = cca_compressor(sol, 3);
  CHECK(cca.kind == CompressorKind::kCca);
  CHECK(cca.noise_std == 0.0);
  for (Index i = 0; i < 3; ++i) {
    const double alpha = oib.matrix_a.row(i).norm();
    CHECK((oib.matrix_a.row(i) / alpha - cca.matrix_a.row(i)).norm() < 1e-12);
  }

  Matrix diag = Vector3(3.0, 2.0, 1.0).asDiagonal();
  const Compressor pca = pca_compressor(diag, 2);
  CHECK(std::abs(pca.matrix_a(0, 0)) == doctest::Approx(1.0));
  CHECK(std::abs(pca.matrix_a(1, 1)) == doctest::Approx(1.0));
  CHECK(std::abs(pca.matrix_a(0, 2)) < 1e-12);

  const Matrix a = random_matrix(6, 6, 13);
  const Matrix cov = a.transpose() * a;
  const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(cov).eigenvalues();  // ascending
  for (Index k = 1; k < 6; ++k) {
    const Matrix u = pca_compressor(cov, k).matrix_a;
    const Matrix resid = Matrix::Identity(6, 6) - u.transpose() * u;
    CHECK((resid * cov * resid).trace() == doctest::Approx(ev.head(6 - k).sum()).epsilon(1e-10));
  }
  CHECK_THROWS_AS(pca_compressor(cov, 0), std::out_of_range);
  CHECK_THROWS_AS(cca_compressor(sol, 6), std::out_of_range);
}

TEST_CASE("encode") {
  Compressor sel;
  sel.input_dim = 4;
  sel.matrix_a = Matrix::Zero(2, 4);
  sel.matrix_a(0, 1) = 1.0;
  sel.matrix_a(1, 3) = 1.0;
  const Vector x = Vector4(1.0, 2.0, 3.0, 4.0);
  CHECK(encode(sel, x) == Vector2(2.0, 4.0));
  CHECK_THROWS_AS(encode(sel, Vector3(1, 2, 3)), DimensionError);

  Compressor zero;
  zero.input_dim = 3;
  zero.matrix_a = Matrix::Zero(1, 3);
  zero.noise_std = 1.0;
  const Matrix draws = encode_rows(zero, Matrix::Zero(100000, 3), 5);
  const double mean = draws.mean();
  const double var = (draws.array() - mean).square().mean();
  CHECK(var == doctest::Approx(1.0).epsilon(0.05));

  const Vector a = encode(zero, Vector3(1, 2, 3), 42);
  const Vector b = encode(zero, Vector3(1, 2, 3), 42);
  CHECK(std::memcmp(a.data(), b.data(), sizeof(double)) == 0);
  const Matrix ra = encode_rows(zero, Matrix::Ones(10, 3), 9);
  const Matrix rb = encode_rows(zero, Matrix::Ones(10, 3), 9);
  CHECK(std::memcmp(ra.data(), rb.data(), sizeof(double) * 10) == 0);
}

TEST_CASE("compressor serialization round-trips bit-exactly") {
  const auto dir = std::filesystem::temp_directory_path() / "oib_test_compressor";
  std::filesystem::create_directories(dir);
  const GibSolution sol = solve_gib(random_pair(7, 7, 21));
  for (const Compressor& c : {compressor_at_size(sol, 4), cca_compressor(sol, 2),
                              pca_compressor(random_pair(7, 7, 22).sigma_x, 3), compressor_at_beta(sol, 1.0)}) {
    save_compressor(c, dir / "c");
    const Compressor back = load_compressor(dir / "c");
    CHECK(back.kind == c.kind);
    CHECK(back.input_dim == c.input_dim);
    CHECK(back.n_z() == c.n_z());
    CHECK(std::memcmp(&back.beta, &c.beta, sizeof(double)) == 0);
    CHECK(back.noise_std == c.noise_std);
    if (c.n_z() > 0)
      CHECK(std::memcmp(back.matrix_a.data(), c.matrix_a.data(), sizeof(double) * static_cast<size_t>(c.matrix_a.size())) == 0);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("kind names") {
  CHECK(to_string(CompressorKind::kOib) == "OIB");
  CHECK(compressor_kind_from_string("pca") == CompressorKind::kPca);
  CHECK_THROWS(compressor_kind_from_string("vib"));
}
