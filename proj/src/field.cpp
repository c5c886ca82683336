#include "blockboot/field.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

namespace blockboot {

CovarianceFamily parse_covariance_family(std::string_view name) {
  if (name == "spherical") return CovarianceFamily::spherical;
  if (name == "exponential") return CovarianceFamily::exponential;
  throw ConfigError("unknown covariance family '" + std::string(name) + "'");
}

std::string_view to_string(CovarianceFamily family) {
  return family == CovarianceFamily::spherical ? "spherical" : "exponential";
}

double cov(const CovarianceModel& model, double h) {
  if (h < 0.0 || std::isnan(h)) throw std::invalid_argument("cov: distance must be nonnegative");
  if (model.family == CovarianceFamily::spherical) {
    if (h >= model.range) return 0.0;
    const double t = h / model.range;
    return model.sill * (1.0 - 1.5 * t + 0.5 * t * t * t);
  }
  return model.sill * std::exp(-3.0 * h / model.range);
}

Mat cov_matrix(const CovarianceModel& model, const SiteMatrix& sites) {
  const Eigen::Index n = sites.rows();
  Mat sigma(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    sigma(i, i) = model.sill;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double value = cov(model, (sites.row(i) - sites.row(j)).norm());
      sigma(i, j) = value;
      sigma(j, i) = value;
    }
  }
  return sigma;
}

double cov_integral(const CovarianceModel& model, int dim) {
  if (dim != 2) throw std::invalid_argument("cov_integral: only d = 2 is supported");
  const double r = model.range;
  if (model.family == CovarianceFamily::spherical) return std::numbers::pi * model.sill * r * r / 5.0;
  return 2.0 * std::numbers::pi * model.sill * r * r / 9.0;
}

GaussianFieldSampler::GaussianFieldSampler(const CovarianceModel& model, const SiteMatrix& sites,
                                           std::size_t max_sites) {
  const auto n = static_cast<std::size_t>(sites.rows());
  if (n > max_sites) {
    throw NumericError("field simulation: " + std::to_string(n) + " sites exceed the dense cap of " +
                       std::to_string(max_sites));
  }
  if (n == 0) return;
  if (model.sill == 0.0) {
    factor_ = Mat::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    return;
  }
  const Mat sigma = cov_matrix(model, sites);
  const double tolerance = 1e-8 * model.sill;
  static constexpr std::array<double, 4> jitters{0.0, 1e-12, 1e-10, 1e-8};
  std::ostringstream report;
  for (double eps : jitters) {
    Mat work = sigma;
    work.diagonal().array() += eps * model.sill;
    Eigen::LLT<Mat> llt(work);
    if (llt.info() != Eigen::Success) {
      report << " jitter " << eps << ": not positive definite;";
      continue;
    }
    Mat lower = llt.matrixL();
    const Mat rebuilt = lower.triangularView<Eigen::Lower>() * lower.transpose();
    const double error = (rebuilt - sigma).cwiseAbs().maxCoeff();
    if (error > tolerance) {
      report << " jitter " << eps << ": reconstruction error " << error << ";";
      continue;
    }
    factor_ = std::move(lower);
    jitter_ = eps;
    reconstruction_error_ = error;
    return;
  }
  throw NumericError("covariance factorization failed for " + std::to_string(n) + " sites:" + report.str());
}

Vec GaussianFieldSampler::draw(RandomStream& rng) const {
  Vec xi(factor_.rows());
  for (Eigen::Index i = 0; i < xi.size(); ++i) xi[i] = standard_normal(rng);
  return factor_.triangularView<Eigen::Lower>() * xi;
}

Vec simulate(const CovarianceModel& model, const SiteMatrix& sites, RandomStream& rng, std::size_t max_sites) {
  return GaussianFieldSampler(model, sites, max_sites).draw(rng);
}

}  // namespace blockboot
