#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "blockboot/bootstrap.hpp"
#include "blockboot/experiments.hpp"
#include "blockboot/field.hpp"
#include "blockboot/regression.hpp"

namespace py = pybind11;
using namespace blockboot;

namespace {

Dataset make_dataset(const SiteMatrix& sites, const Mat& weights, const Vec& y, double lambda) {
  Dataset d;
  d.sites = sites;
  d.weights = weights;
  d.y = y;
  d.lambda = lambda;
  d.dim = static_cast<int>(sites.cols());
  d.validate();
  return d;
}

py::dict bootstrap(const SiteMatrix& sites, const Mat& weights, const Vec& y, double lambda, double block,
                   const std::string& variant, const std::string& prototype, std::size_t M, std::uint64_t seed,
                   double level, const std::string& ci, bool exact, const std::string& score, double huber_k) {
  const Dataset data = make_dataset(sites, weights, y, lambda);
  const Region region(parse_prototype(prototype), data.dim, lambda);
  const Score psi = parse_score(score, huber_k);
  BootstrapPlan plan{parse_variant(variant), block, M, parse_ci_method(ci), level, seed, exact};
  plan.validate(region);

  BootstrapOutput out;
  FitResult fitted;
  {
    py::gil_scoped_release release;
    fitted = fit(data, psi);
    out = run_bootstrap(data, fitted, plan, make_geometry(region, data.sites, block), psi);
  }
  py::dict result;
  result["beta_hat"] = out.beta_hat;
  result["var"] = out.var_estimate;
  result["scaled_var"] = out.scaled_var;
  result["se"] = Vec(out.var_estimate.cwiseSqrt());
  result["ci"] = out.ci;
  result["replicates"] = out.replicates;
  result["n_star_mean"] = out.n_star_mean;
  result["failures"] = out.failure_count;
  result["attempted"] = out.attempted;
  result["exact"] = out.exact;
  return result;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Grid-based spatial block bootstrap";
  m.attr("__version__") = BLOCKBOOT_VERSION;

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.def(
      "fit",
      [](const Mat& weights, const Vec& y, const std::string& score, double huber_k) {
        Dataset d;
        d.sites = SiteMatrix::Zero(y.size(), 1);
        d.weights = weights;
        d.y = y;
        const FitResult r = fit(d, parse_score(score, huber_k));
        return py::make_tuple(r.beta_hat, r.residuals);
      },
      py::arg("weights"), py::arg("y"), py::arg("score") = "identity", py::arg("huber_k") = 1.345,
      "M-estimate of beta; returns (beta_hat, residuals).");

  m.def("bootstrap", &bootstrap, py::arg("sites"), py::arg("weights"), py::arg("y"), py::arg("lam"),
        py::arg("block"), py::arg("variant") = "gbbb", py::arg("prototype") = "unit-cube", py::arg("M") = 1000,
        py::arg("seed") = 0, py::arg("level") = 0.9, py::arg("ci") = "normal", py::arg("exact") = false,
        py::arg("score") = "identity", py::arg("huber_k") = 1.345,
        "Fit and run the block bootstrap. Sites are n x d in [0, lam]^d coordinates.");

  m.def(
      "simulate_field",
      [](const SiteMatrix& sites, double sill, double range, const std::string& family, std::uint64_t seed) {
        RandomStream rng = make_stream(seed);
        return simulate(CovarianceModel{parse_covariance_family(family), sill, range}, sites, rng);
      },
      py::arg("sites"), py::arg("sill") = 1.0, py::arg("range") = 2.0, py::arg("family") = "spherical",
      py::arg("seed") = 0, "Zero-mean Gaussian field at the given sites.");

  m.def(
      "sigma_c_mean",
      [](double sill, double range, double c) {
        return sigma_c_mean(CovarianceModel{CovarianceFamily::spherical, sill, range}, Design::uniform(), c);
      },
      py::arg("sill"), py::arg("range"), py::arg("c"),
      "Asymptotic scaled variance of the mean under a uniform design, sigma(0)/c + int sigma.");
}
