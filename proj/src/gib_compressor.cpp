#include "oib/gib_compressor.hpp"

#include "oib/binary_io.hpp"
#include "oib/errors.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace oib {

std::string_view to_string(CompressorKind kind) {
  switch (kind) {
    case CompressorKind::kOib: return "OIB";
    case CompressorKind::kCca: return "CCA";
    case CompressorKind::kPca: return "PCA";
  }
  return "?";
}

CompressorKind compressor_kind_from_string(std::string_view name) {
  if (name == "OIB" || name == "oib") return CompressorKind::kOib;
  if (name == "CCA" || name == "cca") return CompressorKind::kCca;
  if (name == "PCA" || name == "pca") return CompressorKind::kPca;
  throw std::invalid_argument("unknown compressor kind: " + std::string(name));
}

double Compressor::rho() const {
  if (empty()) return std::numeric_limits<double>::infinity();
  return static_cast<double>(input_dim) / static_cast<double>(n_z());
}

GibSolution solve_gib(const CovariancePair& cov) {
  GibSolution sol;
  sol.eigen = gib_eigensystem(cov);
  sol.n_x = sol.eigen.eigenvalues.size();
  sol.beta_critical = (1.0 - sol.eigen.eigenvalues.array()).inverse().matrix();
  return sol;
}

namespace {

void check_size(const GibSolution& sol, Index n_z, const char* who) {
  if (n_z < 1 || n_z > sol.n_x)
    throw std::out_of_range(std::string(who) + ": n_z must lie in [1, " + std::to_string(sol.n_x) +
                            "], got " + std::to_string(n_z));
}

double loading(const GibSolution& sol, Index i, double beta) {
  const double lam = sol.eigen.eigenvalues(i);
  const double r = sol.eigen.r_values(i);
  return std::sqrt((beta * (1.0 - lam) - 1.0) / (lam * r));
}

}  // namespace

Compressor compressor_at_beta(const GibSolution& sol, double beta, double noise_std) {
  if (beta < 0.0) throw std::invalid_argument("compressor_at_beta: beta must be non-negative");
  Index rows = 0;
  while (rows < sol.n_x && beta > sol.beta_critical(rows)) ++rows;

  Compressor comp;
  comp.kind = CompressorKind::kOib;
  comp.input_dim = sol.n_x;
  comp.beta = beta;
  comp.noise_std = noise_std;
  comp.matrix_a.resize(rows, sol.n_x);
  for (Index i = 0; i < rows; ++i)
    comp.matrix_a.row(i) = loading(sol, i, beta) * sol.eigen.left_eigenvectors.row(i);
  return comp;
}

double beta_for_size(const GibSolution& sol, Index n_z) {
  check_size(sol, n_z, "beta_for_size");
  const double lo = sol.beta_critical(n_z - 1);
  const double hi = n_z < sol.n_x ? sol.beta_critical(n_z) : 2.0 * lo;
  double beta = std::sqrt(lo * hi);
  // Tied critical values leave an empty interval; step just above the lower end.
  if (!(beta > lo)) beta = lo * (1.0 + 1e-6);
  return beta;
}

Compressor compressor_at_size(const GibSolution& sol, Index n_z, double noise_std) {
  Compressor comp = compressor_at_beta(sol, beta_for_size(sol, n_z), noise_std);
  if (comp.n_z() > n_z) comp.matrix_a.conservativeResize(n_z, Eigen::NoChange);
  if (comp.n_z() != n_z)
    throw NumericalError("compressor_at_size: could not isolate " + std::to_string(n_z) + " rows");
  return comp;
}

Compressor cca_compressor(const GibSolution& sol, Index n_z, double noise_std) {
  check_size(sol, n_z, "cca_compressor");
  Compressor comp;
  comp.kind = CompressorKind::kCca;
  comp.input_dim = sol.n_x;
  comp.noise_std = noise_std;
  comp.matrix_a = sol.eigen.left_eigenvectors.topRows(n_z);
  return comp;
}

Compressor pca_compressor(const Matrix& sigma_x, Index n_z, double noise_std) {
  require_dims(sigma_x.rows() == sigma_x.cols(), "pca_compressor: sigma_x not square");
  if (n_z < 1 || n_z > sigma_x.rows())
    throw std::out_of_range("pca_compressor: n_z out of range");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(sigma_x));
  if (eig.info() != Eigen::Success) throw NumericalError("pca_compressor: eigensolver failed");
  const Index d = sigma_x.rows();
  Compressor comp;
  comp.kind = CompressorKind::kPca;
  comp.input_dim = d;
  comp.noise_std = noise_std;
  comp.matrix_a.resize(n_z, d);
  for (Index i = 0; i < n_z; ++i) {
    Vector v = eig.eigenvectors().col(d - 1 - i);
    Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    comp.matrix_a.row(i) = v.transpose();
  }
  return comp;
}

Compressor with_noise(Compressor comp, double noise_std) {
  comp.noise_std = noise_std;
  return comp;
}

Vector encode(const Compressor& comp, const Vector& x_tilde, std::optional<std::uint64_t> seed) {
  require_dims(x_tilde.size() == comp.n_x(), "encode: input has " + std::to_string(x_tilde.size()) +
                                                 " entries, compressor expects " +
                                                 std::to_string(comp.n_x()));
  Vector z = comp.matrix_a * x_tilde;
  if (comp.noise_std > 0.0) {
    std::mt19937_64 rng(seed ? *seed : std::random_device{}());
    std::normal_distribution<double> gauss(0.0, comp.noise_std);
    for (Index i = 0; i < z.size(); ++i) z(i) += gauss(rng);
  }
  return z;
}

Matrix encode_rows(const Compressor& comp, const Matrix& x_tilde, std::optional<std::uint64_t> seed) {
  require_dims(x_tilde.cols() == comp.n_x(), "encode_rows: input column count mismatch");
  Matrix z = x_tilde * comp.matrix_a.transpose();
  if (comp.noise_std > 0.0) {
    std::mt19937_64 rng(seed ? *seed : std::random_device{}());
    std::normal_distribution<double> gauss(0.0, comp.noise_std);
    for (Index i = 0; i < z.rows(); ++i)
      for (Index j = 0; j < z.cols(); ++j) z(i, j) += gauss(rng);
  }
  return z;
}

void save_compressor(const Compressor& comp, const std::filesystem::path& stem) {
  io::Json manifest = {
      {"kind", std::string(to_string(comp.kind))},
      {"n_x", comp.n_x()},
      {"n_z", comp.n_z()},
      {"beta", comp.beta},
      {"noise_std", comp.noise_std},
  };
  io::write_json(io::manifest_path(stem), manifest);
  io::write_bytes(io::blob_path(stem), io::encode_f64(comp.matrix_a));
}

Compressor load_compressor(const std::filesystem::path& stem) {
  const io::Json manifest = io::read_json(io::manifest_path(stem));
  Compressor comp;
  try {
    comp.kind = compressor_kind_from_string(manifest.at("kind").get<std::string>());
    comp.input_dim = manifest.at("n_x").get<Index>();
    comp.beta = manifest.at("beta").get<double>();
    comp.noise_std = manifest.at("noise_std").get<double>();
    const Index n_z = manifest.at("n_z").get<Index>();
    const auto bytes = io::read_bytes(io::blob_path(stem));
    if (bytes.size() != static_cast<size_t>(n_z * comp.input_dim) * 8)
      throw IoError("compressor blob size does not match manifest");
    comp.matrix_a = io::decode_f64(bytes, n_z, comp.input_dim);
  } catch (const io::Json::exception& e) {
    throw IoError("bad compressor manifest " + io::manifest_path(stem).string() + ": " + e.what());
  }
  return comp;
}

}  // namespace oib
