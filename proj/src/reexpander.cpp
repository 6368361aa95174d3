#include "oib/reexpander.hpp"

#include "oib/binary_io.hpp"
#include "oib/errors.hpp"

#include <cmath>
#include <numbers>

namespace oib {

Reexpander fit_lmmse(const Matrix& c_yz, const Matrix& c_zz, double ridge,
                     std::optional<Vector> target_mean) {
  require_dims(c_zz.rows() == c_zz.cols(), "fit_lmmse: c_zz not square");
  require_dims(c_yz.cols() == c_zz.rows(), "fit_lmmse: c_yz columns must equal n_z");
  Reexpander r;
  r.fit_method = FitMethod::kLmmsePopulation;
  r.target_mean = target_mean.value_or(Vector::Zero(c_yz.rows()));
  require_dims(r.target_mean.size() == c_yz.rows(), "fit_lmmse: target_mean length");
  if (c_zz.rows() == 0) {
    r.theta = Matrix::Zero(c_yz.rows(), 0);
    return r;
  }
  Matrix czz = symmetrize(c_zz);
  czz.diagonal().array() += ridge;
  Eigen::LLT<Matrix> llt(czz);
  if (llt.info() != Eigen::Success)
    throw NumericalError("fit_lmmse: Cholesky of C_zz + ridge I failed; increase ridge");
  // theta C_zz = C_yz  =>  C_zz theta^T = C_yz^T
  r.theta = llt.solve(c_yz.transpose()).transpose();
  return r;
}

Reexpander fit_ls(const DataMatrix& z_train, const DataMatrix& y_train, const LsOptions& opts) {
  require_dims(z_train.samples() == y_train.samples(), "fit_ls: z and y row counts differ");
  const Index n = z_train.samples();
  const Index nz = z_train.features();
  if (n <= nz)
    throw std::invalid_argument("fit_ls: need more training samples than features (N_tr > n_z)");

  const CenteredData zc = center(z_train);
  const CenteredData yc = center(y_train);
  Reexpander r;
  r.fit_method = FitMethod::kLsSample;
  if (nz == 0) {
    r.theta = Matrix::Zero(y_train.features(), 0);
    r.target_mean = yc.mean;
    return r;
  }

  const Matrix& z = zc.data.values;
  const Matrix& y = yc.data.values;
  Matrix gram = symmetrize(z.transpose() * z);
  const Matrix zty = z.transpose() * y;
  const double ridge = opts.ridge.value_or(1e-8 * gram.trace() / static_cast<double>(nz));

  Matrix coef;  // n_z x n_y, the normal-equation solution
  bool solved = false;
  if (ridge > 0.0) {
    gram.diagonal().array() += ridge;
    Eigen::LLT<Matrix> llt(gram);
    if (llt.info() == Eigen::Success) {
      coef = llt.solve(zty);
      solved = true;
    }
  } else {
    Eigen::LDLT<Matrix> ldlt(gram);
    const auto& d = ldlt.vectorD();
    const double tol = 1e-12 * std::max(1.0, d.cwiseAbs().maxCoeff());
    if (ldlt.info() == Eigen::Success && (d.array() > tol).all()) {
      coef = ldlt.solve(zty);
      solved = true;
    }
  }
  if (!solved) {
    if (!opts.svd_fallback)
      throw NumericalError("fit_ls: Z^T Z is rank deficient; enable the SVD pseudo-inverse "
                           "fallback or use a positive ridge");
    Eigen::BDCSVD<Matrix> svd(z, Eigen::ComputeThinU | Eigen::ComputeThinV);
    coef = svd.solve(y);
  }
  r.theta = coef.transpose();
  r.target_mean = yc.mean - r.theta * zc.mean;
  return r;
}

Vector reexpand(const Reexpander& r, const Vector& z) {
  require_dims(z.size() == r.n_z(), "reexpand: z has " + std::to_string(z.size()) +
                                        " entries, estimator expects " + std::to_string(r.n_z()));
  return r.theta * z + r.target_mean;
}

Matrix reexpand_rows(const Reexpander& r, const Matrix& z) {
  require_dims(z.cols() == r.n_z(), "reexpand_rows: column count mismatch");
  Matrix out = z * r.theta.transpose();
  out.rowwise() += r.target_mean.transpose();
  return out;
}

double mse_entropy_gap(double mse, double cond_entropy, Index n_y) {
  const double ny = static_cast<double>(n_y);
  const double bound = ny / (2.0 * std::numbers::pi * std::numbers::e) * std::exp(2.0 * cond_entropy / ny);
  return mse - bound;
}

namespace {

std::string_view method_name(FitMethod m) {
  return m == FitMethod::kLmmsePopulation ? "LMMSE_population" : "LS_sample";
}

}  // namespace

void save_reexpander(const Reexpander& r, const std::filesystem::path& stem) {
  io::Json manifest = {
      {"fit_method", std::string(method_name(r.fit_method))},
      {"n_y", r.n_y()},
      {"n_z", r.n_z()},
  };
  io::write_json(io::manifest_path(stem), manifest);
  auto bytes = io::encode_f64(r.theta);
  for (Index i = 0; i < r.target_mean.size(); ++i) io::append_f64_le(bytes, r.target_mean(i));
  io::write_bytes(io::blob_path(stem), bytes);
}

Reexpander load_reexpander(const std::filesystem::path& stem) {
  const io::Json manifest = io::read_json(io::manifest_path(stem));
  Reexpander r;
  try {
    const auto method = manifest.at("fit_method").get<std::string>();
    if (method == "LMMSE_population") r.fit_method = FitMethod::kLmmsePopulation;
    else if (method == "LS_sample") r.fit_method = FitMethod::kLsSample;
    else throw IoError("unknown fit_method " + method);
    const Index ny = manifest.at("n_y").get<Index>();
    const Index nz = manifest.at("n_z").get<Index>();
    const auto bytes = io::read_bytes(io::blob_path(stem));
    if (bytes.size() != static_cast<size_t>(ny * nz + ny) * 8)
      throw IoError("reexpander blob size does not match manifest");
    r.theta = io::decode_f64(bytes, ny, nz);
    r.target_mean = io::decode_f64(bytes, ny, 1, static_cast<size_t>(ny * nz) * 8).col(0);
  } catch (const io::Json::exception& e) {
    throw IoError("bad reexpander manifest " + io::manifest_path(stem).string() + ": " + e.what());
  }
  return r;
}

}  // namespace oib
