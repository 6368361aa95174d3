#include "oib/complexity_model.hpp"
#include "oib/datasets.hpp"
#include "oib/errors.hpp"
#include "oib/gaussianizer.hpp"
#include "oib/gib_compressor.hpp"
#include "oib/info_metrics.hpp"
#include "oib/reexpander.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace oib;

PYBIND11_MODULE(_oib, m) {
  m.doc() = "Gaussian information bottleneck compressors and metrics";

  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<CovariancePair>(m, "CovariancePair")
      .def(py::init([](Matrix sx, Matrix sxy, double shrinkage) {
             return CovariancePair{std::move(sx), std::move(sxy), shrinkage};
           }),
           py::arg("sigma_x"), py::arg("sigma_x_given_y"), py::arg("shrinkage") = 0.0)
      .def_readwrite("sigma_x", &CovariancePair::sigma_x)
      .def_readwrite("sigma_x_given_y", &CovariancePair::sigma_x_given_y)
      .def_readwrite("shrinkage", &CovariancePair::shrinkage);

  py::class_<GibSolution>(m, "GibSolution")
      .def_property_readonly("eigenvalues", [](const GibSolution& s) { return s.eigen.eigenvalues; })
      .def_property_readonly("eigenvectors", [](const GibSolution& s) { return s.eigen.left_eigenvectors; })
      .def_property_readonly("r_values", [](const GibSolution& s) { return s.eigen.r_values; })
      .def_property_readonly("clamped", [](const GibSolution& s) { return s.eigen.clamped; })
      .def_readonly("beta_critical", &GibSolution::beta_critical)
      .def_readonly("n_x", &GibSolution::n_x);

  py::class_<Compressor>(m, "Compressor")
      .def_property_readonly("kind", [](const Compressor& c) { return std::string(to_string(c.kind)); })
      .def_readonly("matrix_a", &Compressor::matrix_a)
      .def_readonly("beta", &Compressor::beta)
      .def_readwrite("noise_std", &Compressor::noise_std)
      .def_property_readonly("n_x", &Compressor::n_x)
      .def_property_readonly("n_z", &Compressor::n_z)
      .def_property_readonly("rho", &Compressor::rho);

  py::class_<Reexpander>(m, "Reexpander")
      .def_readonly("theta", &Reexpander::theta)
      .def_readonly("target_mean", &Reexpander::target_mean);

  m.def("estimate_covariance_pair",
        [](const Matrix& x, const Matrix& y, double shrinkage, double ridge) {
          return estimate_covariance_pair(center(DataMatrix(x)).data, center(DataMatrix(y)).data, shrinkage, ridge);
        },
        py::arg("x"), py::arg("y"), py::arg("shrinkage") = kDefaultShrinkage, py::arg("ridge") = 0.0,
        "Centers both sample matrices (rows are samples) and estimates the pair.");
  m.def("solve_gib", &solve_gib, py::arg("cov"));
  m.def("compressor_at_beta", &compressor_at_beta, py::arg("sol"), py::arg("beta"), py::arg("noise_std") = 1.0);
  m.def("compressor_at_size", &compressor_at_size, py::arg("sol"), py::arg("n_z"), py::arg("noise_std") = 1.0);
  m.def("cca_compressor", &cca_compressor, py::arg("sol"), py::arg("n_z"), py::arg("noise_std") = 0.0);
  m.def("pca_compressor", &pca_compressor, py::arg("sigma_x"), py::arg("n_z"), py::arg("noise_std") = 0.0);
  m.def("encode_rows",
        [](const Compressor& c, const Matrix& x, std::optional<std::uint64_t> seed) { return encode_rows(c, x, seed); },
        py::arg("comp"), py::arg("x"), py::arg("seed") = py::none());

  m.def("fit_lmmse",
        [](const Matrix& c_yz, const Matrix& c_zz, double ridge) { return fit_lmmse(c_yz, c_zz, ridge); },
        py::arg("c_yz"), py::arg("c_zz"), py::arg("ridge") = 0.0);
  m.def("fit_ls",
        [](const Matrix& z, const Matrix& y, std::optional<double> ridge) {
          LsOptions o;
          o.ridge = ridge;
          return fit_ls(DataMatrix(z), DataMatrix(y), o);
        },
        py::arg("z"), py::arg("y"), py::arg("ridge") = py::none());
  m.def("reexpand_rows", &reexpand_rows, py::arg("reexpander"), py::arg("z"));

  m.def("gaussian_entropy", &gaussian_entropy, py::arg("sigma"));
  m.def("gaussian_mi", &gaussian_mi, py::arg("sigma_z"), py::arg("sigma_z_given_y"));
  m.def("linear_map_mi",
        [](const Matrix& mm, const CovariancePair& cov, std::optional<Matrix> sigma_eps) {
          return sigma_eps ? linear_map_mi(mm, cov, *sigma_eps) : linear_map_mi(mm, cov);
        },
        py::arg("m"), py::arg("cov"), py::arg("sigma_eps") = py::none());
  m.def("input_mi", &input_mi, py::arg("cov"));

  m.def("dft_forward",
        [](const Matrix& images, int height, int width, int channels) {
          return RealDft2dPlan(height, width, channels).forward_rows(images);
        },
        py::arg("images"), py::arg("height"), py::arg("width"), py::arg("channels") = 1);
  m.def("dft_inverse",
        [](const Matrix& coeffs, int height, int width, int channels) {
          return RealDft2dPlan(height, width, channels).inverse_rows(coeffs);
        },
        py::arg("coeffs"), py::arg("height"), py::arg("width"), py::arg("channels") = 1);
  m.def("henze_zirkler",
        [](const Matrix& x, double level) {
          const HzTestResult r = henze_zirkler(DataMatrix(x), level);
          py::dict d;
          d["statistic"] = r.statistic;
          d["p_value"] = r.p_value;
          d["reject"] = r.reject;
          return d;
        },
        py::arg("x"), py::arg("level") = 0.05);

  m.def("network_macs",
        [](const std::vector<std::int64_t>& sizes) { return network_macs(sizes).total; }, py::arg("layer_sizes"));
  m.def("savings_table",
        [](const std::vector<std::int64_t>& sizes, const std::vector<std::int64_t>& grid) {
          return to_json(savings_table(sizes, grid)).dump();
        },
        py::arg("layer_sizes"), py::arg("n_z_grid"), "Rows as a JSON string.");

  m.def("synth_gaussian",
        [](Index n_x, Index n_y, Index samples, std::uint64_t seed, std::vector<double> corr) {
          SyntheticGaussianSpec s;
          s.n_x = n_x;
          s.n_y = n_y;
          s.samples = samples;
          s.seed = seed;
          s.canonical_correlations = std::move(corr);
          const SyntheticGaussianData d = synth_gaussian(s);
          py::dict out;
          out["x"] = d.x.values;
          out["y"] = d.y.values;
          out["true_cov"] = d.true_cov;
          out["sigma_xy"] = d.sigma_xy;
          out["sigma_y"] = d.sigma_y;
          out["true_mi_curve"] = d.true_mi_curve;
          return out;
        },
        py::arg("n_x") = 6, py::arg("n_y") = 3, py::arg("samples") = 1000, py::arg("seed") = 0,
        py::arg("canonical_correlations") = std::vector<double>{});
}
