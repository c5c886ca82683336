#pragma once

#include <cstddef>
#include <string_view>

#include "blockboot/random.hpp"
#include "blockboot/types.hpp"

namespace blockboot {

enum class CovarianceFamily { spherical, exponential };

CovarianceFamily parse_covariance_family(std::string_view name);
std::string_view to_string(CovarianceFamily family);

/// Stationary isotropic covariance sigma(h) with zero nugget.
struct CovarianceModel {
  CovarianceFamily family = CovarianceFamily::spherical;
  double sill = 1.0;
  double range = 2.0;
};

/// Spherical: sill (1 - 1.5 h/r + 0.5 (h/r)^3) on [0, r], zero beyond.
/// Exponential: sill exp(-3 h / r), so the correlation is about 0.05 at h = r.
double cov(const CovarianceModel& model, double h);

Mat cov_matrix(const CovarianceModel& model, const SiteMatrix& sites);

/// Integral of sigma over R^d (d = 2 only).
double cov_integral(const CovarianceModel& model, int dim);

inline constexpr std::size_t kDefaultMaxSites = 5000;

/// Lower-triangular factor of the covariance matrix on a fixed site set.
/// Draws Z = L xi for independent standard normal xi.
class GaussianFieldSampler {
 public:
  GaussianFieldSampler(const CovarianceModel& model, const SiteMatrix& sites,
                       std::size_t max_sites = kDefaultMaxSites);

  Vec draw(RandomStream& rng) const;
  const Mat& factor() const { return factor_; }
  /// Diagonal jitter (as a multiple of the sill) that made the factorization succeed.
  double jitter() const { return jitter_; }
  /// max |L L' - Sigma| for the accepted factor.
  double reconstruction_error() const { return reconstruction_error_; }
  std::size_t size() const { return static_cast<std::size_t>(factor_.rows()); }

 private:
  Mat factor_;
  double jitter_ = 0.0;
  double reconstruction_error_ = 0.0;
};

/// One draw of the zero-mean field at the sites, values in site order.
Vec simulate(const CovarianceModel& model, const SiteMatrix& sites, RandomStream& rng,
             std::size_t max_sites = kDefaultMaxSites);

}  // namespace blockboot
